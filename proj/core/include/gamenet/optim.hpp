#pragma once

#include "gamenet/dense.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gamenet::nn {

enum class OptimizerKind { Adam, AdamW };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Decoupled decay, AdamW only.
    double weight_decay = 0.01;

    static OptimizerConfig adam(double lr);
    static OptimizerConfig adamw(double lr, double weight_decay = 0.01);
    void validate() const;
};

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

/// Adam / AdamW bound to a fixed list of parameters.
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, std::vector<ParamTensor*> params);

    /// One bias-corrected update. AdamW first applies theta -= lr * wd * theta.
    void step();
    void zero_grad();

    double lr() const noexcept { return cfg_.lr; }
    void set_lr(double lr) { cfg_.lr = lr; }
    const OptimizerConfig& config() const noexcept { return cfg_; }
    std::size_t step_count() const noexcept { return step_count_; }
    const std::vector<ParamTensor*>& params() const noexcept { return params_; }

    const std::vector<Matrix>& first_moments() const noexcept { return m_; }
    const std::vector<Matrix>& second_moments() const noexcept { return v_; }
    /// Restores moments and step count (checkpoint loading).
    void load_state(std::size_t step_count, std::vector<Matrix> first, std::vector<Matrix> second);

private:
    OptimizerConfig cfg_;
    std::vector<ParamTensor*> params_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::size_t step_count_ = 0;
};

double global_grad_norm(std::span<ParamTensor* const> params);

/// Scales all gradients by max_norm / norm when the global L2 norm exceeds
/// max_norm. Returns the applied factor (1 when unchanged).
double clip_grad_norm(std::span<ParamTensor* const> params, double max_norm);

} // namespace gamenet::nn
