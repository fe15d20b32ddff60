#include "gamenet/model.hpp"

#include "gamenet/checkpoint.hpp"
#include "gamenet/error.hpp"
#include "gamenet/loss.hpp"
#include "gamenet/optim.hpp"

#include <algorithm>
#include <cmath>

namespace gamenet {

using nn::Json;
using nn::Mode;

namespace {

constexpr const char* kBranchFormat = "gamenet.branch";
constexpr const char* kGateFormat = "gamenet.gate";
constexpr const char* kModelFormat = "gamenet.model";

std::vector<nn::DenseLayerSpec> hidden_specs(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                                             const nn::Activation& act, bool bn,
                                             const std::vector<double>& dropout)
{
    std::vector<nn::DenseLayerSpec> specs;
    std::size_t prev = in_dim;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        specs.push_back({prev, hidden[i], act, bn, dropout[i]});
        prev = hidden[i];
    }
    return specs;
}

void check_format(const Json& j, const char* format)
{
    if (!j.is_object() || j.value("format", std::string{}) != format)
        throw DataError(std::string("expected a '") + format + "' document");
    if (j.value("version", 0) != nn::kCheckpointVersion)
        throw DataError(std::string(format) + ": unsupported version");
}

} // namespace

std::string to_string(Modality m)
{
    switch (m) {
    case Modality::Audio: return "audio";
    case Modality::Lyrics: return "lyrics";
    case Modality::Social: return "social";
    }
    throw ConfigError("invalid modality");
}

Modality parse_modality(const std::string& name)
{
    for (Modality m : kModalities)
        if (to_string(m) == name)
            return m;
    throw ConfigError("unknown modality '" + name + "'");
}

BranchConfig BranchConfig::defaults(Modality m, std::size_t input_dim)
{
    BranchConfig c;
    c.modality = m;
    c.input_dim = input_dim;
    switch (m) {
    case Modality::Audio:
        c.hidden = {512, 256, 128, 64};
        c.dropout = {0.3, 0.2, 0.2, 0.1};
        break;
    case Modality::Lyrics:
        c.hidden = {1024, 512, 256, 128, 64};
        c.dropout = {0.3, 0.3, 0.2, 0.2, 0.1};
        break;
    case Modality::Social:
        c.hidden = {512, 256, 128, 64};
        c.activation = nn::Activation::leaky_relu(0.05);
        c.dropout = {0.1, 0.1, 0.05, 0.0};
        break;
    }
    return c;
}

void BranchConfig::validate() const
{
    const std::string who = to_string(modality) + " branch";
    if (input_dim == 0)
        throw ConfigError(who + ": input_dim must be positive");
    if (hidden.empty())
        throw ConfigError(who + ": needs at least one hidden layer");
    if (dropout.size() != hidden.size())
        throw ConfigError(who + ": dropout list must match hidden layers");
    for (std::size_t h : hidden)
        if (h == 0)
            throw ConfigError(who + ": hidden sizes must be positive");
    for (double p : dropout)
        if (!(p >= 0.0 && p < 1.0))
            throw ConfigError(who + ": dropout must be in [0, 1)");
    activation.validate();
}

Json BranchConfig::to_json() const
{
    return {{"modality", to_string(modality)},
            {"input_dim", input_dim},
            {"hidden", hidden},
            {"activation", nn::to_json(activation)},
            {"batchnorm", batchnorm},
            {"dropout", dropout}};
}

BranchConfig BranchConfig::from_json(const Json& j)
{
    BranchConfig c;
    c.modality = parse_modality(j.at("modality").get<std::string>());
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.activation = nn::activation_from_json(j.at("activation"));
    c.batchnorm = j.at("batchnorm").get<bool>();
    c.dropout = j.at("dropout").get<std::vector<double>>();
    c.validate();
    return c;
}

// ExpertBranch

ExpertBranch::ExpertBranch(BranchConfig cfg, Rng& init_rng) : cfg_(std::move(cfg))
{
    cfg_.validate();
    const std::string name = to_string(cfg_.modality);
    trunk_ = nn::DenseStack(hidden_specs(cfg_.input_dim, cfg_.hidden, cfg_.activation, cfg_.batchnorm, cfg_.dropout),
                            init_rng, name + ".trunk");
    head_ = nn::DenseStack({{cfg_.rep_dim(), 1, nn::Activation::sigmoid(), false, 0.0}}, init_rng, name + ".head");
}

ExpertBranch::ExpertBranch(BranchConfig cfg, nn::DenseStack trunk, nn::DenseStack head)
    : cfg_(std::move(cfg)), trunk_(std::move(trunk)), head_(std::move(head))
{
    cfg_.validate();
    if (trunk_.in_dim() != cfg_.input_dim || trunk_.out_dim() != cfg_.rep_dim() || head_.in_dim() != cfg_.rep_dim() ||
        head_.out_dim() != 1)
        throw ShapeError(to_string(cfg_.modality) + " branch: layers do not match config");
}

void ExpertBranch::check_input(const Matrix& x) const
{
    if (x.cols() != cfg_.input_dim)
        throw ShapeError(to_string(cfg_.modality) + " branch: expected " + std::to_string(cfg_.input_dim) +
                         " features, got " + std::to_string(x.cols()));
}

ExpertBranch::Output ExpertBranch::forward(const Matrix& x, Mode mode, Rng& rng)
{
    check_input(x);
    Output out;
    out.h = trunk_.forward(x, mode, rng);
    out.yhat = head_.forward(out.h, mode, rng);
    return out;
}

ExpertBranch::Output ExpertBranch::infer(const Matrix& x) const
{
    check_input(x);
    Output out;
    out.h = trunk_.infer(x);
    out.yhat = head_.infer(out.h);
    return out;
}

void ExpertBranch::backward(const Matrix& grad_h, const Matrix& grad_yhat)
{
    Matrix g = head_.backward(grad_yhat);
    if (!grad_h.empty()) {
        require_same_shape(g, grad_h, "branch representation gradient");
        for (std::size_t i = 0; i < g.size(); ++i)
            g.values()[i] += grad_h.values()[i];
    }
    trunk_.backward(g);
}

std::vector<nn::ParamTensor*> ExpertBranch::parameters()
{
    auto p = trunk_.parameters();
    auto q = head_.parameters();
    p.insert(p.end(), q.begin(), q.end());
    return p;
}

std::vector<Matrix*> ExpertBranch::buffers()
{
    auto b = trunk_.buffers();
    auto c = head_.buffers();
    b.insert(b.end(), c.begin(), c.end());
    return b;
}

// Standardization

Matrix standardize(const Matrix& h, const Matrix& mu, const Matrix& sigma, double eps)
{
    if (mu.rows() != 1 || sigma.rows() != 1 || mu.cols() != h.cols() || sigma.cols() != h.cols())
        throw ShapeError("standardize: mu / sigma must be 1 x " + std::to_string(h.cols()));
    Matrix out(h.rows(), h.cols());
    for (std::size_t r = 0; r < h.rows(); ++r)
        for (std::size_t c = 0; c < h.cols(); ++c)
            out(r, c) = (h(r, c) - mu(0, c)) / (std::abs(sigma(0, c)) + eps);
    return out;
}

StandardizeGrads standardize_backward(const Matrix& h, const Matrix& mu, const Matrix& sigma, double eps,
                                      const Matrix& grad_out)
{
    require_same_shape(h, grad_out, "standardize_backward");
    StandardizeGrads g{Matrix(h.rows(), h.cols()), Matrix(1, h.cols()), Matrix(1, h.cols())};
    for (std::size_t c = 0; c < h.cols(); ++c) {
        const double s = sigma(0, c);
        const double denom = std::abs(s) + eps;
        const double sign = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
        double dmu = 0.0;
        double dsigma = 0.0;
        for (std::size_t r = 0; r < h.rows(); ++r) {
            const double go = grad_out(r, c);
            g.grad_h(r, c) = go / denom;
            dmu -= go / denom;
            dsigma -= go * (h(r, c) - mu(0, c)) / (denom * denom) * sign;
        }
        g.grad_mu(0, c) = dmu;
        g.grad_sigma(0, c) = dsigma;
    }
    return g;
}

// Gate

void GateConfig::validate() const
{
    for (std::size_t h : hidden)
        if (h == 0)
            throw ConfigError("gate: hidden sizes must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("gate: dropout must be in [0, 1)");
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw ConfigError("gate: eps must be positive");
    activation.validate();
}

Json GateConfig::to_json() const
{
    return {{"hidden", hidden},
            {"activation", nn::to_json(activation)},
            {"batchnorm", batchnorm},
            {"dropout", dropout},
            {"eps", eps},
            {"zero_init_output", zero_init_output}};
}

GateConfig GateConfig::from_json(const Json& j)
{
    GateConfig c;
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.activation = nn::activation_from_json(j.at("activation"));
    c.batchnorm = j.at("batchnorm").get<bool>();
    c.dropout = j.at("dropout").get<double>();
    c.eps = j.at("eps").get<double>();
    c.zero_init_output = j.value("zero_init_output", true);
    c.validate();
    return c;
}

Gate::Gate(std::size_t rep_dim, GateConfig cfg, Rng& init_rng) : rep_dim_(rep_dim), cfg_(std::move(cfg))
{
    cfg_.validate();
    if (rep_dim_ == 0)
        throw ConfigError("gate: rep_dim must be positive");
    for (Modality m : kModalities) {
        mu_[index(m)] = nn::ParamTensor("gate.mu." + to_string(m), 1, rep_dim_, 0.0);
        sigma_[index(m)] = nn::ParamTensor("gate.sigma." + to_string(m), 1, rep_dim_, 1.0);
    }
    auto specs = hidden_specs(kModalityCount * rep_dim_, cfg_.hidden, cfg_.activation, cfg_.batchnorm,
                              std::vector<double>(cfg_.hidden.size(), cfg_.dropout));
    const std::size_t last = cfg_.hidden.empty() ? kModalityCount * rep_dim_ : cfg_.hidden.back();
    specs.push_back({last, kModalityCount, nn::Activation::identity(), false, 0.0});
    mlp_ = nn::DenseStack(specs, init_rng, "gate.mlp");
    if (cfg_.zero_init_output) {
        auto& out = mlp_.layer(mlp_.size() - 1);
        out.weight().value.fill(0.0);
        out.bias().value.fill(0.0);
    }
}

Gate::Gate(std::size_t rep_dim, GateConfig cfg, std::array<nn::ParamTensor, kModalityCount> mu,
           std::array<nn::ParamTensor, kModalityCount> sigma, nn::DenseStack mlp)
    : rep_dim_(rep_dim), cfg_(std::move(cfg)), mu_(std::move(mu)), sigma_(std::move(sigma)), mlp_(std::move(mlp))
{
    cfg_.validate();
    for (std::size_t i = 0; i < kModalityCount; ++i) {
        if (mu_[i].value.rows() != 1 || mu_[i].value.cols() != rep_dim_ || !mu_[i].value.same_shape(sigma_[i].value))
            throw ShapeError("gate: standardization parameters must be 1 x rep_dim");
        mu_[i].grad = Matrix(1, rep_dim_);
        sigma_[i].grad = Matrix(1, rep_dim_);
    }
    if (mlp_.in_dim() != kModalityCount * rep_dim_ || mlp_.out_dim() != kModalityCount)
        throw ShapeError("gate: MLP shape does not match rep_dim");
}

Matrix Gate::standardized_input(std::span<const Matrix, kModalityCount> h) const
{
    std::array<Matrix, kModalityCount> blocks;
    for (std::size_t i = 0; i < kModalityCount; ++i) {
        if (h[i].cols() != rep_dim_)
            throw ShapeError("gate: representation " + std::to_string(i) + " has " + std::to_string(h[i].cols()) +
                             " columns, expected " + std::to_string(rep_dim_));
        if (h[i].rows() != h[0].rows())
            throw ShapeError("gate: representations disagree on batch size");
        blocks[i] = standardize(h[i], mu_[i].value, sigma_[i].value, cfg_.eps);
    }
    return hconcat(blocks);
}

Matrix Gate::forward(std::span<const Matrix, kModalityCount> h, Mode mode, Rng& rng)
{
    const Matrix x = standardized_input(h);
    for (std::size_t i = 0; i < kModalityCount; ++i)
        cached_h_[i] = h[i];
    cached_alpha_ = nn::softmax_rows(mlp_.forward(x, mode, rng));
    cache_valid_ = true;
    return cached_alpha_;
}

Matrix Gate::infer(std::span<const Matrix, kModalityCount> h) const
{
    return nn::softmax_rows(mlp_.infer(standardized_input(h)));
}

std::array<Matrix, kModalityCount> Gate::backward(const Matrix& grad_alpha)
{
    if (!cache_valid_)
        throw StateError("gate backward called without a forward pass");
    const Matrix grad_x = mlp_.backward(nn::softmax_rows_backward(cached_alpha_, grad_alpha));
    std::array<Matrix, kModalityCount> grad_h;
    for (std::size_t i = 0; i < kModalityCount; ++i) {
        const Matrix g = slice_cols(grad_x, i * rep_dim_, (i + 1) * rep_dim_);
        auto s = standardize_backward(cached_h_[i], mu_[i].value, sigma_[i].value, cfg_.eps, g);
        for (std::size_t c = 0; c < rep_dim_; ++c) {
            mu_[i].grad(0, c) += s.grad_mu(0, c);
            sigma_[i].grad(0, c) += s.grad_sigma(0, c);
        }
        grad_h[i] = std::move(s.grad_h);
    }
    cache_valid_ = false;
    return grad_h;
}

std::vector<nn::ParamTensor*> Gate::parameters()
{
    std::vector<nn::ParamTensor*> p;
    for (std::size_t i = 0; i < kModalityCount; ++i) {
        p.push_back(&mu_[i]);
        p.push_back(&sigma_[i]);
    }
    auto q = mlp_.parameters();
    p.insert(p.end(), q.begin(), q.end());
    return p;
}

std::vector<Matrix*> Gate::buffers() { return mlp_.buffers(); }

// Loss

void LossWeights::validate() const
{
    if (!(final_weight >= 0.0) || !(individual_weight >= 0.0) || !std::isfinite(final_weight) ||
        !std::isfinite(individual_weight))
        throw ConfigError("loss weights must be finite and non-negative");
    if (final_weight == 0.0 && individual_weight == 0.0)
        throw ConfigError("loss weights cannot both be zero");
}

Matrix ensemble_combine(const Matrix& alpha, const Matrix& branch_yhat)
{
    require_same_shape(alpha, branch_yhat, "ensemble_combine");
    if (alpha.cols() != kModalityCount)
        throw ShapeError("ensemble_combine: expected 3 columns");
    Matrix y(alpha.rows(), 1);
    for (std::size_t r = 0; r < alpha.rows(); ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < kModalityCount; ++i)
            s += alpha(r, i) * branch_yhat(r, i);
        y(r, 0) = s;
    }
    return y;
}

LossBreakdown total_loss(const Matrix& y, const Prediction& p, const LossWeights& w)
{
    w.validate();
    if (y.cols() != 1 || p.yhat.rows() != y.rows() || p.yhat.cols() != 1 || p.branch_yhat.rows() != y.rows() ||
        p.branch_yhat.cols() != kModalityCount)
        throw ShapeError("total_loss: prediction shapes do not match targets");
    require_finite(y, "targets");
    require_finite(p.yhat, "ensemble prediction");
    require_finite(p.branch_yhat, "branch predictions");

    LossBreakdown out;
    const auto fin = nn::mse_loss(p.yhat, y);
    out.final_loss = fin.value;
    out.grad_yhat = fin.grad;
    for (double& g : out.grad_yhat.values())
        g *= w.final_weight;

    out.grad_branch_yhat = Matrix(y.rows(), kModalityCount);
    const double n = static_cast<double>(y.rows());
    for (std::size_t i = 0; i < kModalityCount; ++i) {
        double s = 0.0;
        for (std::size_t r = 0; r < y.rows(); ++r) {
            const double d = p.branch_yhat(r, i) - y(r, 0);
            s += d * d;
            out.grad_branch_yhat(r, i) = w.individual_weight * 2.0 * d / n;
        }
        out.branch_loss[i] = s / n;
        out.individual_loss += out.branch_loss[i];
    }
    out.total = w.final_weight * out.final_loss + w.individual_weight * out.individual_loss;
    return out;
}

// Model config

ModelConfig ModelConfig::defaults(std::size_t audio_dim, std::size_t lyrics_dim, std::size_t social_dim)
{
    ModelConfig c;
    c.branches = {BranchConfig::defaults(Modality::Audio, audio_dim),
                  BranchConfig::defaults(Modality::Lyrics, lyrics_dim),
                  BranchConfig::defaults(Modality::Social, social_dim)};
    return c;
}

void ModelConfig::validate() const
{
    for (Modality m : kModalities) {
        const auto& b = branches[index(m)];
        if (b.modality != m)
            throw ConfigError("model config: branch order must be audio, lyrics, social");
        b.validate();
        if (b.rep_dim() != branches[0].rep_dim())
            throw ConfigError("model config: all branches must share the representation size");
    }
    gate.validate();
}

Json ModelConfig::to_json() const
{
    Json b = Json::array();
    for (const auto& c : branches)
        b.push_back(c.to_json());
    return {{"branches", b}, {"gate", gate.to_json()}};
}

ModelConfig ModelConfig::from_json(const Json& j)
{
    ModelConfig c;
    const auto& b = j.at("branches");
    if (!b.is_array() || b.size() != kModalityCount)
        throw DataError("model config: expected three branches");
    for (std::size_t i = 0; i < kModalityCount; ++i)
        c.branches[i] = BranchConfig::from_json(b[i]);
    c.gate = GateConfig::from_json(j.at("gate"));
    c.validate();
    return c;
}

// GameNet

GameNet::GameNet(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed)
{
    cfg_.validate();
    Rng root(seed);
    for (Modality m : kModalities) {
        Rng r = root.fork();
        branches_[index(m)] = ExpertBranch(cfg_.branches[index(m)], r);
    }
    Rng g = root.fork();
    gate_ = Gate(cfg_.branches[0].rep_dim(), cfg_.gate, g);
}

GameNet::GameNet(ModelConfig cfg, std::array<ExpertBranch, kModalityCount> branches, Gate gate,
                 std::array<bool, kModalityCount> pretrained, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed), branches_(std::move(branches)), gate_(std::move(gate)),
      pretrained_(pretrained)
{
    cfg_.validate();
    if (gate_.rep_dim() != cfg_.branches[0].rep_dim())
        throw ShapeError("model: gate rep_dim does not match branches");
}

void GameNet::check_inputs(const ModalityInputs& x) const
{
    for (std::size_t i = 1; i < kModalityCount; ++i)
        if (x[i].rows() != x[0].rows())
            throw ShapeError("model: modality inputs disagree on row count");
    if (x[0].rows() == 0)
        throw ShapeError("model: empty input");
}

Prediction GameNet::forward(const ModalityInputs& x, Mode mode, Rng& rng, const Frozen& frozen)
{
    check_inputs(x);
    std::array<Matrix, kModalityCount> h;
    Prediction p;
    p.branch_yhat = Matrix(x[0].rows(), kModalityCount);
    for (std::size_t i = 0; i < kModalityCount; ++i) {
        auto out = frozen[i] ? branches_[i].infer(x[i]) : branches_[i].forward(x[i], mode, rng);
        for (std::size_t r = 0; r < out.yhat.rows(); ++r)
            p.branch_yhat(r, i) = out.yhat(r, 0);
        h[i] = std::move(out.h);
    }
    p.alpha = gate_.forward(h, mode, rng);
    p.yhat = ensemble_combine(p.alpha, p.branch_yhat);
    last_ = p;
    cache_valid_ = true;
    return p;
}

Prediction GameNet::predict(const ModalityInputs& x) const
{
    check_inputs(x);
    std::array<Matrix, kModalityCount> h;
    Prediction p;
    p.branch_yhat = Matrix(x[0].rows(), kModalityCount);
    for (std::size_t i = 0; i < kModalityCount; ++i) {
        auto out = branches_[i].infer(x[i]);
        for (std::size_t r = 0; r < out.yhat.rows(); ++r)
            p.branch_yhat(r, i) = out.yhat(r, 0);
        h[i] = std::move(out.h);
    }
    p.alpha = gate_.infer(h);
    p.yhat = ensemble_combine(p.alpha, p.branch_yhat);
    return p;
}

void GameNet::backward(const Matrix& grad_yhat, const Matrix& grad_branch_yhat, const Frozen& frozen)
{
    if (!cache_valid_)
        throw StateError("model backward called without a forward pass");
    const std::size_t n = last_.yhat.rows();
    if (grad_yhat.rows() != n || grad_yhat.cols() != 1 || grad_branch_yhat.rows() != n ||
        grad_branch_yhat.cols() != kModalityCount)
        throw ShapeError("model backward: gradient shapes do not match the last forward pass");

    Matrix grad_alpha(n, kModalityCount);
    std::array<Matrix, kModalityCount> grad_yi;
    for (std::size_t i = 0; i < kModalityCount; ++i)
        grad_yi[i] = Matrix(n, 1);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < kModalityCount; ++i) {
            grad_alpha(r, i) = grad_yhat(r, 0) * last_.branch_yhat(r, i);
            grad_yi[i](r, 0) = grad_yhat(r, 0) * last_.alpha(r, i) + grad_branch_yhat(r, i);
        }
    auto grad_h = gate_.backward(grad_alpha);
    for (std::size_t i = 0; i < kModalityCount; ++i)
        if (!frozen[i])
            branches_[i].backward(grad_h[i], grad_yi[i]);
    cache_valid_ = false;
}

bool GameNet::all_pretrained() const
{
    return std::all_of(pretrained_.begin(), pretrained_.end(), [](bool b) { return b; });
}

std::vector<nn::ParamTensor*> GameNet::parameters()
{
    std::vector<nn::ParamTensor*> p;
    for (auto& b : branches_) {
        auto q = b.parameters();
        p.insert(p.end(), q.begin(), q.end());
    }
    auto g = gate_.parameters();
    p.insert(p.end(), g.begin(), g.end());
    return p;
}

std::vector<Matrix*> GameNet::buffers()
{
    std::vector<Matrix*> out;
    for (auto& b : branches_) {
        auto q = b.buffers();
        out.insert(out.end(), q.begin(), q.end());
    }
    auto g = gate_.buffers();
    out.insert(out.end(), g.begin(), g.end());
    return out;
}

// Data

MultimodalData MultimodalData::subset(std::span<const std::size_t> rows) const
{
    MultimodalData out;
    out.ids.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= size())
            throw ShapeError("subset: row index out of range");
        if (!ids.empty())
            out.ids.push_back(ids[r]);
    }
    for (std::size_t i = 0; i < kModalityCount; ++i)
        out.x[i] = select_rows(x[i], rows);
    out.y = select_rows(y, rows);
    return out;
}

void MultimodalData::validate() const
{
    if (y.cols() != 1)
        throw ShapeError("targets must be a single column");
    for (std::size_t i = 0; i < kModalityCount; ++i) {
        if (x[i].rows() != y.rows())
            throw ShapeError(to_string(kModalities[i]) + " features have " + std::to_string(x[i].rows()) +
                             " rows, targets have " + std::to_string(y.rows()));
        require_finite(x[i], to_string(kModalities[i]) + " features");
    }
    if (!ids.empty() && ids.size() != y.rows())
        throw ShapeError("ids do not match row count");
    require_unit_targets(y);
}

void require_unit_targets(const Matrix& y)
{
    for (double v : y.values())
        if (!(v >= 0.0 && v <= 1.0))
            throw DataError("targets must be scaled to [0, 1]; found " + std::to_string(v));
}

// Training

nn::TrainConfig phase1_defaults()
{
    nn::TrainConfig c;
    c.optimizer = nn::OptimizerConfig::adam(1e-4);
    c.batch_size = 256;
    c.patience = 25;
    c.clip_norm = 1.0;
    c.use_plateau = true;
    return c;
}

nn::TrainHistory phase1_train(ExpertBranch& branch, const Matrix& x_train, const Matrix& y_train,
                              const Matrix& x_val, const Matrix& y_val, const nn::TrainConfig& cfg)
{
    cfg.validate();
    if (y_train.cols() != 1 || y_val.cols() != 1 || x_train.rows() != y_train.rows() || x_val.rows() != y_val.rows())
        throw ShapeError("phase1: feature and target rows disagree");
    if (x_train.rows() < 2 || x_val.rows() == 0)
        throw DataError("phase1: need at least two training rows and one validation row");
    require_unit_targets(y_train);
    require_unit_targets(y_val);
    require_finite(x_train, "phase1 training features");
    require_finite(x_val, "phase1 validation features");

    nn::Optimizer opt(cfg.optimizer, branch.parameters());
    nn::Optimizer* opts[] = {&opt};
    nn::TrainHooks hooks;
    hooks.train_batch = [&](std::span<const std::size_t> batch, Rng& rng) {
        const Matrix xb = select_rows(x_train, batch);
        const Matrix yb = select_rows(y_train, batch);
        auto out = branch.forward(xb, Mode::Train, rng);
        auto loss = nn::mse_loss(out.yhat, yb);
        branch.backward({}, loss.grad);
        return loss.value;
    };
    hooks.validate = [&] { return nn::mse_loss(branch.infer(x_val).yhat, y_val).value; };
    auto hist = nn::fit(cfg, x_train.rows(), opts, branch.buffers(), hooks);
    branch.trunk().clear_cache();
    branch.head().clear_cache();
    return hist;
}

nn::TrainHistory phase1_train(GameNet& model, Modality m, const MultimodalData& train, const MultimodalData& val,
                              const nn::TrainConfig& cfg)
{
    train.validate();
    val.validate();
    auto hist = phase1_train(model.branch(m), train.x[index(m)], train.y, val.x[index(m)], val.y, cfg);
    model.mark_pretrained(m);
    return hist;
}

Phase2Config::Phase2Config()
{
    train.optimizer = nn::OptimizerConfig::adamw(5e-6, 0.01);
    train.batch_size = 256;
    train.patience = 25;
    train.clip_norm = 1.0;
    train.use_plateau = true;
}

nn::TrainHistory phase2_train(GameNet& model, const MultimodalData& train, const MultimodalData& val,
                              const Phase2Config& cfg)
{
    cfg.train.validate();
    cfg.weights.validate();
    if (!model.all_pretrained()) {
        std::string missing;
        for (Modality m : kModalities)
            if (!model.pretrained(m))
                missing += (missing.empty() ? "" : ", ") + to_string(m);
        throw StateError("phase2 requires completed phase 1 for every branch (missing: " + missing + ")");
    }
    if (!(cfg.social_weight_decay >= 0.0))
        throw ConfigError("social weight decay must be non-negative");
    train.validate();
    val.validate();
    if (train.size() < 2 || val.size() == 0)
        throw DataError("phase2: need at least two training rows and one validation row");

    const GameNet::Frozen frozen = cfg.finetune_branches ? GameNet::Frozen{} : GameNet::Frozen{true, true, true};

    std::vector<nn::ParamTensor*> decayed = model.gate().parameters();
    std::vector<nn::ParamTensor*> social;
    if (cfg.finetune_branches) {
        for (Modality m : {Modality::Audio, Modality::Lyrics}) {
            auto p = model.branch(m).parameters();
            decayed.insert(decayed.end(), p.begin(), p.end());
        }
        social = model.branch(Modality::Social).parameters();
    }

    nn::Optimizer main_opt(cfg.train.optimizer, decayed);
    std::vector<nn::Optimizer> extra;
    if (!social.empty()) {
        nn::OptimizerConfig sc = cfg.train.optimizer;
        if (sc.kind == nn::OptimizerKind::AdamW)
            sc.weight_decay = cfg.social_weight_decay;
        extra.emplace_back(sc, social);
    }
    std::vector<nn::Optimizer*> opts{&main_opt};
    for (auto& o : extra)
        opts.push_back(&o);

    std::vector<Matrix*> buffers = model.gate().buffers();
    if (cfg.finetune_branches)
        buffers = model.buffers();

    nn::TrainHooks hooks;
    hooks.train_batch = [&](std::span<const std::size_t> batch, Rng& rng) {
        const MultimodalData b = train.subset(batch);
        auto p = model.forward(b.x, Mode::Train, rng, frozen);
        auto loss = total_loss(b.y, p, cfg.weights);
        model.backward(loss.grad_yhat, loss.grad_branch_yhat, frozen);
        return loss.total;
    };
    hooks.validate = [&] { return nn::mse_loss(model.predict(val.x).yhat, val.y).value; };
    return nn::fit(cfg.train, train.size(), opts, buffers, hooks);
}

// Reports

GateReport summarize_alpha(const Matrix& alpha, const std::vector<std::string>* group_keys)
{
    if (alpha.cols() != kModalityCount)
        throw ShapeError("gate report: alpha must have three columns");
    if (group_keys && group_keys->size() != alpha.rows())
        throw ShapeError("gate report: group keys do not match row count");
    GateReport rep;
    rep.alpha = alpha;
    const std::size_t n = alpha.rows();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < kModalityCount; ++i) {
            rep.mean[i] += alpha(r, i);
            if (group_keys)
                rep.group_mean[(*group_keys)[r]][i] += alpha(r, i);
        }
    if (n > 0)
        for (double& m : rep.mean)
            m /= static_cast<double>(n);
    if (group_keys) {
        for (const auto& k : *group_keys)
            ++rep.group_count[k];
        for (auto& [k, v] : rep.group_mean)
            for (double& x : v)
                x /= static_cast<double>(rep.group_count[k]);
    }
    return rep;
}

GateReport gate_report(const GameNet& model, const ModalityInputs& x, const std::vector<std::string>* group_keys)
{
    return summarize_alpha(model.predict(x).alpha, group_keys);
}

// Serialization

Json to_json(const ExpertBranch& b)
{
    return {{"format", kBranchFormat},
            {"version", nn::kCheckpointVersion},
            {"config", b.config().to_json()},
            {"trunk", nn::to_json(b.trunk())},
            {"head", nn::to_json(b.head())}};
}

ExpertBranch branch_from_json(const Json& j)
{
    check_format(j, kBranchFormat);
    return ExpertBranch(BranchConfig::from_json(j.at("config")), nn::stack_from_json(j.at("trunk")),
                        nn::stack_from_json(j.at("head")));
}

Json to_json(const Gate& g)
{
    Json mu = Json::array();
    Json sigma = Json::array();
    for (Modality m : kModalities) {
        mu.push_back(nn::to_json(g.mu(m).value));
        sigma.push_back(nn::to_json(g.sigma(m).value));
    }
    return {{"format", kGateFormat},
            {"version", nn::kCheckpointVersion},
            {"rep_dim", g.rep_dim()},
            {"config", g.config().to_json()},
            {"mu", mu},
            {"sigma", sigma},
            {"mlp", nn::to_json(g.mlp())}};
}

Gate gate_from_json(const Json& j)
{
    check_format(j, kGateFormat);
    std::array<nn::ParamTensor, kModalityCount> mu;
    std::array<nn::ParamTensor, kModalityCount> sigma;
    const auto& jm = j.at("mu");
    const auto& js = j.at("sigma");
    if (jm.size() != kModalityCount || js.size() != kModalityCount)
        throw DataError("gate: expected three standardization entries");
    for (Modality m : kModalities) {
        const std::size_t i = index(m);
        mu[i].name = "gate.mu." + to_string(m);
        mu[i].value = nn::matrix_from_json(jm[i]);
        sigma[i].name = "gate.sigma." + to_string(m);
        sigma[i].value = nn::matrix_from_json(js[i]);
    }
    return Gate(j.at("rep_dim").get<std::size_t>(), GateConfig::from_json(j.at("config")), std::move(mu),
                std::move(sigma), nn::stack_from_json(j.at("mlp")));
}

void save_model(const std::filesystem::path& dir, const GameNet& model, const Json& extra)
{
    std::filesystem::create_directories(dir);
    Json files = Json::object();
    for (Modality m : kModalities) {
        const std::string file = "branch_" + to_string(m) + ".json";
        nn::write_json_file(dir / file, to_json(model.branch(m)));
        files[to_string(m)] = file;
    }
    nn::write_json_file(dir / "gate.json", to_json(model.gate()));
    files["gate"] = "gate.json";
    Json pre = Json::object();
    for (Modality m : kModalities)
        pre[to_string(m)] = model.pretrained(m);
    Json manifest = {{"format", kModelFormat},
                     {"version", nn::kCheckpointVersion},
                     {"seed", model.seed()},
                     {"config", model.config().to_json()},
                     {"pretrained", pre},
                     {"files", files},
                     {"extra", extra}};
    nn::write_json_file(dir / "manifest.json", manifest);
}

LoadedModel load_model(const std::filesystem::path& dir)
{
    if (!std::filesystem::exists(dir / "manifest.json"))
        throw InputError("model bundle not found: " + (dir / "manifest.json").string());
    const Json manifest = nn::read_json_file(dir / "manifest.json");
    check_format(manifest, kModelFormat);
    ModelConfig cfg = ModelConfig::from_json(manifest.at("config"));
    const auto& files = manifest.at("files");
    std::array<ExpertBranch, kModalityCount> branches;
    std::array<bool, kModalityCount> pre{};
    for (Modality m : kModalities) {
        branches[index(m)] = branch_from_json(nn::read_json_file(dir / files.at(to_string(m)).get<std::string>()));
        pre[index(m)] = manifest.at("pretrained").at(to_string(m)).get<bool>();
        const auto& a = branches[index(m)].config().to_json();
        if (a != cfg.branches[index(m)].to_json())
            throw DataError("model bundle: " + to_string(m) + " branch does not match manifest config");
    }
    Gate gate = gate_from_json(nn::read_json_file(dir / files.at("gate").get<std::string>()));
    LoadedModel out{GameNet(std::move(cfg), std::move(branches), std::move(gate), pre,
                            manifest.at("seed").get<std::uint64_t>()),
                    manifest.value("extra", Json::object())};
    return out;
}

} // namespace gamenet
