#include "gamenet/optim.hpp"

#include "gamenet/error.hpp"

#include <cmath>

namespace gamenet::nn {

OptimizerConfig OptimizerConfig::adam(double lr)
{
    OptimizerConfig c;
    c.kind = OptimizerKind::Adam;
    c.lr = lr;
    c.weight_decay = 0.0;
    return c;
}

OptimizerConfig OptimizerConfig::adamw(double lr, double weight_decay)
{
    OptimizerConfig c;
    c.kind = OptimizerKind::AdamW;
    c.lr = lr;
    c.weight_decay = weight_decay;
    return c;
}

void OptimizerConfig::validate() const
{
    if (!(lr > 0.0))
        throw ConfigError("optimizer lr must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw ConfigError("optimizer betas must be in (0, 1)");
    if (!(eps > 0.0))
        throw ConfigError("optimizer eps must be > 0");
    if (weight_decay < 0.0)
        throw ConfigError("weight decay must be >= 0");
}

std::string to_string(OptimizerKind kind)
{
    return kind == OptimizerKind::Adam ? "adam" : "adamw";
}

OptimizerKind parse_optimizer_kind(const std::string& name)
{
    if (name == "adam")
        return OptimizerKind::Adam;
    if (name == "adamw")
        return OptimizerKind::AdamW;
    throw ConfigError("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(OptimizerConfig cfg, std::vector<ParamTensor*> params)
    : cfg_(cfg), params_(std::move(params))
{
    cfg_.validate();
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto* p : params_) {
        m_.emplace_back(p->value.rows(), p->value.cols());
        v_.emplace_back(p->value.rows(), p->value.cols());
    }
}

void Optimizer::zero_grad()
{
    for (auto* p : params_)
        p->zero_grad();
}

void Optimizer::step()
{
    if (params_.empty())
        throw StateError("optimizer step with no parameters");
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    const bool decoupled = cfg_.kind == OptimizerKind::AdamW && cfg_.weight_decay > 0.0;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        ParamTensor& p = *params_[k];
        if (!p.grad.same_shape(p.value) || !m_[k].same_shape(p.value))
            throw ShapeError("optimizer: moment / gradient shape mismatch for " + p.name);
        require_finite(p.grad, "gradient of " + p.name);
        auto theta = p.value.values();
        auto g = p.grad.values();
        auto m = m_[k].values();
        auto v = v_[k].values();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            if (decoupled)
                theta[i] -= cfg_.lr * cfg_.weight_decay * theta[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Optimizer::load_state(std::size_t step_count, std::vector<Matrix> first, std::vector<Matrix> second)
{
    if (first.size() != params_.size() || second.size() != params_.size())
        throw StateError("optimizer state does not match parameter count");
    for (std::size_t k = 0; k < params_.size(); ++k) {
        require_same_shape(first[k], params_[k]->value, "optimizer first moment");
        require_same_shape(second[k], params_[k]->value, "optimizer second moment");
    }
    step_count_ = step_count;
    m_ = std::move(first);
    v_ = std::move(second);
}

double global_grad_norm(std::span<ParamTensor* const> params)
{
    double sq = 0.0;
    for (const auto* p : params)
        for (double g : p->grad.values())
            sq += g * g;
    return std::sqrt(sq);
}

double clip_grad_norm(std::span<ParamTensor* const> params, double max_norm)
{
    if (!(max_norm > 0.0))
        throw ConfigError("clip_grad_norm: max_norm must be > 0");
    const double norm = global_grad_norm(params);
    if (!(norm > max_norm))
        return 1.0;
    const double factor = max_norm / norm;
    for (auto* p : params)
        for (double& g : p->grad.values())
            g *= factor;
    return factor;
}

} // namespace gamenet::nn
