#pragma once

#include "gamenet/network.hpp"
#include "gamenet/train_control.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

/// Group-wise autoencoder ensemble whose concatenated bottlenecks form a
/// compressed audio embedding.
namespace gamenet::ae {

struct FeatureGroup {
    std::string name;
    std::size_t begin = 0; ///< first raw column
    std::size_t end = 0;   ///< one past the last raw column
    std::size_t bottleneck = 0;

    std::size_t input_dim() const noexcept { return end - begin; }
    friend bool operator==(const FeatureGroup&, const FeatureGroup&) = default;
};

struct GroupRegistry {
    std::vector<FeatureGroup> groups;

    /// Bottleneck < input dim, non-empty slices, pairwise disjoint, and
    /// (if raw_cols > 0) inside the raw matrix.
    void validate(std::size_t raw_cols = 0) const;
    std::size_t total_bottleneck() const;
    std::size_t total_input() const;

    nlohmann::json to_json() const;
    static GroupRegistry from_json(const nlohmann::json& j);
};

/// The seven audio groups with contiguous column ranges. Small Combined and
/// BLF bottlenecks follow the 29.2% / 11.4% compression anchors; the other
/// five are chosen so the embedding totals 2352 dims.
GroupRegistry default_registry();

/// Hidden widths between input and bottleneck: [d/2, d/3, d/5] above 4000,
/// [d/2, d/4] for 2000..4000 inclusive, [d/2] below 2000 (floor division).
std::vector<std::size_t> plan_architecture(std::size_t d);

struct LayerPlan {
    std::vector<std::size_t> encoder; ///< output widths, ending with the bottleneck
    std::vector<std::size_t> decoder; ///< output widths, ending with d
};

/// Layer widths of a d -> bottleneck autoencoder built from plan_architecture.
LayerPlan plan_layers(std::size_t d, std::size_t bottleneck);

/// 0.001 * 128 / d_enc.
double lambda_for(std::size_t bottleneck);

struct AELossTerms {
    double recon = 0.0;
    double latent_penalty = 0.0;
    double lambda = 0.0;

    double total() const noexcept { return recon + latent_penalty; }
};

struct AELoss {
    AELossTerms terms;
    Matrix grad_recon; ///< dL/dx_hat
    Matrix grad_z;     ///< dL/dz
};

/// MSE(x, x_hat) + lambda * mean over rows of ||z_row||^2.
AELoss ae_loss(const Matrix& x, const Matrix& x_hat, const Matrix& z, double lambda);

/// sum (x - x_hat)^2 / sum (x - colmean(x))^2. Throws DataError if x has no variance.
double rel_mse(const Matrix& x, const Matrix& x_hat);

struct AELayerConfig {
    nn::Activation activation = nn::Activation::elu(0.1);
    double dropout = 0.05;
    bool batchnorm = true;
};

/// Symmetric encoder/decoder. Hidden layers use the configured activation,
/// batchnorm and dropout; the bottleneck and reconstruction layers are linear
/// with neither.
class Autoencoder {
public:
    Autoencoder() = default;
    Autoencoder(std::size_t input_dim, std::size_t bottleneck, Rng& init_rng,
                const AELayerConfig& cfg = {}, const std::string& name = "ae");
    Autoencoder(nn::DenseStack encoder, nn::DenseStack decoder);

    struct Output {
        Matrix z;
        Matrix reconstruction;
    };

    Output forward(const Matrix& x, nn::Mode mode, Rng& rng);
    void backward(const Matrix& grad_reconstruction, const Matrix& grad_z);
    Matrix encode(const Matrix& x) const;
    Matrix reconstruct(const Matrix& x) const;

    std::vector<nn::ParamTensor*> parameters();
    std::vector<Matrix*> buffers();

    nn::DenseStack& encoder() noexcept { return encoder_; }
    nn::DenseStack& decoder() noexcept { return decoder_; }
    const nn::DenseStack& encoder() const noexcept { return encoder_; }
    const nn::DenseStack& decoder() const noexcept { return decoder_; }
    std::size_t input_dim() const { return encoder_.in_dim(); }
    std::size_t bottleneck() const { return encoder_.out_dim(); }
    /// Output widths of the encoder layers, ending with the bottleneck.
    std::vector<std::size_t> encoder_dims() const;
    std::vector<std::size_t> decoder_dims() const;

private:
    nn::DenseStack encoder_;
    nn::DenseStack decoder_;
};

/// Per-column z-score fitted on training rows. Zero-variance columns keep
/// a unit divisor and are reported as degenerate.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<std::size_t> degenerate;

    static Standardizer fit(const Matrix& x);
    Matrix apply(const Matrix& x) const;
    nlohmann::json to_json() const;
    static Standardizer from_json(const nlohmann::json& j);
};

struct AETrainConfig {
    nn::TrainConfig train;
    double val_fraction = 0.1;
    AELayerConfig layers;

    AETrainConfig();
};

struct TrainedGroup {
    FeatureGroup group;
    Standardizer standardizer;
    Autoencoder model;
    nn::TrainHistory history;
    double val_relmse = 0.0;
    std::uint64_t seed = 0;
};

/// Standardizes `data` (the group's raw training columns), holds out a seeded
/// validation split, trains with early stopping and returns the best-validation
/// parameters with their validation RelMSE.
TrainedGroup train_group_autoencoder(const FeatureGroup& group, const Matrix& data, const AETrainConfig& cfg);

class OnionEnsemble {
public:
    OnionEnsemble() = default;
    explicit OnionEnsemble(std::vector<TrainedGroup> groups);

    /// Eval-mode encoding of every group, concatenated in registry order.
    Matrix compress(const Matrix& raw) const;
    std::size_t output_dim() const;
    GroupRegistry registry() const;
    const std::vector<TrainedGroup>& groups() const noexcept { return groups_; }
    std::vector<std::string> output_names() const;

private:
    std::vector<TrainedGroup> groups_;
};

/// Trains every registry group on the raw training matrix. Groups are
/// independent and run on up to `threads` workers; results do not depend on
/// the thread count.
OnionEnsemble train_ensemble(const GroupRegistry& registry, const Matrix& raw_train,
                             const AETrainConfig& cfg, std::size_t threads = 1);

nlohmann::json to_json(const TrainedGroup& group);
TrainedGroup trained_group_from_json(const nlohmann::json& j);

/// One checkpoint per group plus manifest.json (registry, its hash, files).
void save_ensemble(const std::filesystem::path& dir, const OnionEnsemble& ensemble);
OnionEnsemble load_ensemble(const std::filesystem::path& dir);

} // namespace gamenet::ae
