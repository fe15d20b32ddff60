#pragma once

#include "gamenet/network.hpp"
#include "gamenet/train_control.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gamenet {

enum class Modality : std::size_t { Audio = 0, Lyrics = 1, Social = 2 };
inline constexpr std::size_t kModalityCount = 3;
inline constexpr std::array<Modality, kModalityCount> kModalities = {Modality::Audio, Modality::Lyrics,
                                                                     Modality::Social};

std::string to_string(Modality m);
Modality parse_modality(const std::string& name);
constexpr std::size_t index(Modality m) noexcept { return static_cast<std::size_t>(m); }

using ModalityInputs = std::array<Matrix, kModalityCount>;

/// Dense trunk ending in the representation exposed to the gate, plus a
/// sigmoid head producing the branch prediction.
struct BranchConfig {
    Modality modality = Modality::Audio;
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    nn::Activation activation = nn::Activation::elu(0.1);
    bool batchnorm = true;
    std::vector<double> dropout; ///< one rate per hidden layer

    /// audio [512,256,128,64] ELU(0.1) dropout [0.3,0.2,0.2,0.1];
    /// lyrics [1024,512,256,128,64] ELU(0.1) dropout [0.3,0.3,0.2,0.2,0.1];
    /// social [512,256,128,64] LeakyReLU(0.05) dropout [0.1,0.1,0.05,0].
    static BranchConfig defaults(Modality m, std::size_t input_dim);
    void validate() const;
    std::size_t rep_dim() const { return hidden.empty() ? 0 : hidden.back(); }

    nlohmann::json to_json() const;
    static BranchConfig from_json(const nlohmann::json& j);
};

class ExpertBranch {
public:
    struct Output {
        Matrix h;    ///< batch x rep_dim
        Matrix yhat; ///< batch x 1, in (0, 1)
    };

    ExpertBranch() = default;
    ExpertBranch(BranchConfig cfg, Rng& init_rng);
    ExpertBranch(BranchConfig cfg, nn::DenseStack trunk, nn::DenseStack head);

    Output forward(const Matrix& x, nn::Mode mode, Rng& rng);
    Output infer(const Matrix& x) const;
    /// grad_h may be empty (head loss only).
    void backward(const Matrix& grad_h, const Matrix& grad_yhat);

    std::vector<nn::ParamTensor*> parameters();
    std::vector<Matrix*> buffers();

    const BranchConfig& config() const noexcept { return cfg_; }
    nn::DenseStack& trunk() noexcept { return trunk_; }
    nn::DenseStack& head() noexcept { return head_; }
    const nn::DenseStack& trunk() const noexcept { return trunk_; }
    const nn::DenseStack& head() const noexcept { return head_; }

private:
    void check_input(const Matrix& x) const;

    BranchConfig cfg_;
    nn::DenseStack trunk_;
    nn::DenseStack head_;
};

/// (h - mu) / (|sigma| + eps), with mu and sigma broadcast over rows.
Matrix standardize(const Matrix& h, const Matrix& mu, const Matrix& sigma, double eps);

struct StandardizeGrads {
    Matrix grad_h;
    Matrix grad_mu;
    Matrix grad_sigma;
};

/// d|sigma|/dsigma is taken as sign(sigma), with 0 at sigma == 0.
StandardizeGrads standardize_backward(const Matrix& h, const Matrix& mu, const Matrix& sigma, double eps,
                                      const Matrix& grad_out);

struct GateConfig {
    std::vector<std::size_t> hidden{128, 64};
    nn::Activation activation = nn::Activation::leaky_relu(0.01);
    bool batchnorm = true;
    double dropout = 0.01;
    double eps = 1e-6;
    /// Zero the logit layer so training starts from uniform weights.
    bool zero_init_output = true;

    void validate() const;
    nlohmann::json to_json() const;
    static GateConfig from_json(const nlohmann::json& j);
};

/// Learnable per-modality standardization, gating MLP and softmax.
class Gate {
public:
    Gate() = default;
    Gate(std::size_t rep_dim, GateConfig cfg, Rng& init_rng);
    Gate(std::size_t rep_dim, GateConfig cfg, std::array<nn::ParamTensor, kModalityCount> mu,
         std::array<nn::ParamTensor, kModalityCount> sigma, nn::DenseStack mlp);

    /// Attention weights, batch x 3, rows summing to 1.
    Matrix forward(std::span<const Matrix, kModalityCount> h, nn::Mode mode, Rng& rng);
    Matrix infer(std::span<const Matrix, kModalityCount> h) const;
    /// Accumulates gate gradients; returns dL/dh for each modality.
    std::array<Matrix, kModalityCount> backward(const Matrix& grad_alpha);

    std::vector<nn::ParamTensor*> parameters();
    std::vector<Matrix*> buffers();

    nn::ParamTensor& mu(Modality m) { return mu_[index(m)]; }
    nn::ParamTensor& sigma(Modality m) { return sigma_[index(m)]; }
    const nn::ParamTensor& mu(Modality m) const { return mu_[index(m)]; }
    const nn::ParamTensor& sigma(Modality m) const { return sigma_[index(m)]; }
    nn::DenseStack& mlp() noexcept { return mlp_; }
    const nn::DenseStack& mlp() const noexcept { return mlp_; }
    const GateConfig& config() const noexcept { return cfg_; }
    std::size_t rep_dim() const noexcept { return rep_dim_; }

private:
    Matrix standardized_input(std::span<const Matrix, kModalityCount> h) const;

    std::size_t rep_dim_ = 0;
    GateConfig cfg_;
    std::array<nn::ParamTensor, kModalityCount> mu_;
    std::array<nn::ParamTensor, kModalityCount> sigma_;
    nn::DenseStack mlp_;
    std::array<Matrix, kModalityCount> cached_h_;
    Matrix cached_alpha_;
    bool cache_valid_ = false;
};

struct LossWeights {
    double final_weight = 1.0;
    double individual_weight = 0.3;

    void validate() const;
};

struct Prediction {
    Matrix yhat;        ///< batch x 1
    Matrix alpha;       ///< batch x 3
    Matrix branch_yhat; ///< batch x 3
};

/// Row-wise sum_i alpha_i * branch_yhat_i.
Matrix ensemble_combine(const Matrix& alpha, const Matrix& branch_yhat);

struct LossBreakdown {
    double total = 0.0;
    double final_loss = 0.0;
    double individual_loss = 0.0;
    std::array<double, kModalityCount> branch_loss{};
    Matrix grad_yhat;
    Matrix grad_branch_yhat;
};

/// final_weight * MSE(y, yhat) + individual_weight * sum_i MSE(y, yhat_i).
LossBreakdown total_loss(const Matrix& y, const Prediction& p, const LossWeights& w);

struct ModelConfig {
    std::array<BranchConfig, kModalityCount> branches;
    GateConfig gate;

    static ModelConfig defaults(std::size_t audio_dim, std::size_t lyrics_dim, std::size_t social_dim);
    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

/// Three modality experts fused by the gate.
class GameNet {
public:
    using Frozen = std::array<bool, kModalityCount>;

    GameNet() = default;
    GameNet(ModelConfig cfg, std::uint64_t seed);
    GameNet(ModelConfig cfg, std::array<ExpertBranch, kModalityCount> branches, Gate gate,
            std::array<bool, kModalityCount> pretrained, std::uint64_t seed);

    /// Frozen branches run in eval mode and keep no cache.
    Prediction forward(const ModalityInputs& x, nn::Mode mode, Rng& rng, const Frozen& frozen = {});
    Prediction predict(const ModalityInputs& x) const;
    void backward(const Matrix& grad_yhat, const Matrix& grad_branch_yhat, const Frozen& frozen = {});

    ExpertBranch& branch(Modality m) { return branches_[index(m)]; }
    const ExpertBranch& branch(Modality m) const { return branches_[index(m)]; }
    Gate& gate() noexcept { return gate_; }
    const Gate& gate() const noexcept { return gate_; }
    const ModelConfig& config() const noexcept { return cfg_; }
    std::uint64_t seed() const noexcept { return seed_; }

    bool pretrained(Modality m) const { return pretrained_[index(m)]; }
    bool all_pretrained() const;
    void mark_pretrained(Modality m) { pretrained_[index(m)] = true; }

    std::vector<nn::ParamTensor*> parameters();
    std::vector<Matrix*> buffers();

private:
    void check_inputs(const ModalityInputs& x) const;

    ModelConfig cfg_;
    std::uint64_t seed_ = 0;
    std::array<ExpertBranch, kModalityCount> branches_;
    Gate gate_;
    std::array<bool, kModalityCount> pretrained_{};
    Prediction last_;
    bool cache_valid_ = false;
};

/// Row-aligned multimodal samples with targets in [0, 1].
struct MultimodalData {
    std::vector<std::string> ids;
    ModalityInputs x;
    Matrix y; ///< n x 1

    std::size_t size() const noexcept { return y.rows(); }
    MultimodalData subset(std::span<const std::size_t> rows) const;
    void validate() const;
};

/// Throws DataError unless every target lies in [0, 1].
void require_unit_targets(const Matrix& y);

nn::TrainConfig phase1_defaults();

/// Per-branch MSE training (Adam, plateau schedule, early stopping on
/// validation MSE). Leaves the best-validation weights in place.
nn::TrainHistory phase1_train(ExpertBranch& branch, const Matrix& x_train, const Matrix& y_train,
                              const Matrix& x_val, const Matrix& y_val, const nn::TrainConfig& cfg);
/// Trains one branch of the model and marks it pretrained.
nn::TrainHistory phase1_train(GameNet& model, Modality m, const MultimodalData& train, const MultimodalData& val,
                              const nn::TrainConfig& cfg);

struct Phase2Config {
    nn::TrainConfig train;
    LossWeights weights;
    bool finetune_branches = true;
    /// AdamW decay for the social branch; other parameters use train.optimizer.
    double social_weight_decay = 0.0;

    Phase2Config();
};

/// Joint training of the gate (and, if enabled, the branches) under
/// total_loss. Early stopping tracks validation ensemble MSE. Throws
/// StateError if any branch has not completed phase 1.
nn::TrainHistory phase2_train(GameNet& model, const MultimodalData& train, const MultimodalData& val,
                              const Phase2Config& cfg);

struct GateReport {
    Matrix alpha;
    std::array<double, kModalityCount> mean{};
    std::map<std::string, std::array<double, kModalityCount>> group_mean;
    std::map<std::string, std::size_t> group_count;
};

GateReport gate_report(const GameNet& model, const ModalityInputs& x,
                       const std::vector<std::string>* group_keys = nullptr);
GateReport summarize_alpha(const Matrix& alpha, const std::vector<std::string>* group_keys = nullptr);

/// Bundle: one checkpoint per branch, the gate checkpoint and manifest.json
/// holding configs, seed, pretraining flags and `extra` (e.g. scalers).
void save_model(const std::filesystem::path& dir, const GameNet& model, const nlohmann::json& extra = {});
struct LoadedModel {
    GameNet model;
    nlohmann::json extra;
};
LoadedModel load_model(const std::filesystem::path& dir);

nlohmann::json to_json(const ExpertBranch& b);
ExpertBranch branch_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Gate& g);
Gate gate_from_json(const nlohmann::json& j);

} // namespace gamenet
