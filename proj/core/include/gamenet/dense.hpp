#pragma once

#include "gamenet/activation.hpp"
#include "gamenet/matrix.hpp"
#include "gamenet/rng.hpp"

#include <string>
#include <vector>

namespace gamenet::nn {

enum class Mode { Train, Eval };

/// Trainable tensor and its accumulated gradient (same shape).
struct ParamTensor {
    std::string name;
    Matrix value;
    Matrix grad;

    ParamTensor() = default;
    ParamTensor(std::string n, std::size_t rows, std::size_t cols, double fill = 0.0)
        : name(std::move(n)), value(rows, cols, fill), grad(rows, cols)
    {
    }

    void zero_grad() { grad.fill(0.0); }
};

struct DenseLayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation;
    bool batchnorm = false;
    double dropout = 0.0;

    void validate() const;
    friend bool operator==(const DenseLayerSpec&, const DenseLayerSpec&) = default;
};

struct BatchNormConfig {
    double momentum = 0.1;
    double eps = 1e-5;
};

/// Fully connected layer: linear -> batchnorm -> activation -> dropout.
///
/// Dropout is inverted (train-mode outputs are divided by 1-p), so eval mode
/// applies no rescaling. In eval mode batchnorm uses the running statistics.
/// backward() uses the cache written by the most recent forward().
class DenseLayer {
public:
    DenseLayer(DenseLayerSpec spec, Rng& init_rng, std::string name = "dense",
               BatchNormConfig bn = {});

    const DenseLayerSpec& spec() const noexcept { return spec_; }
    const std::string& name() const noexcept { return name_; }
    const BatchNormConfig& batchnorm_config() const noexcept { return bn_; }

    Matrix forward(const Matrix& x, Mode mode, Rng& rng);
    /// Accumulates parameter gradients and returns dL/dx.
    Matrix backward(const Matrix& grad_out);
    /// Eval-mode forward without touching the cache; safe for concurrent use.
    Matrix infer(const Matrix& x) const;

    std::vector<ParamTensor*> parameters();
    /// Non-trainable state (batchnorm running mean / variance).
    std::vector<Matrix*> buffers();

    ParamTensor& weight() noexcept { return weight_; }
    ParamTensor& bias() noexcept { return bias_; }
    ParamTensor& gamma() noexcept { return gamma_; }
    ParamTensor& beta() noexcept { return beta_; }
    Matrix& running_mean() noexcept { return running_mean_; }
    Matrix& running_var() noexcept { return running_var_; }
    const ParamTensor& weight() const noexcept { return weight_; }
    const ParamTensor& bias() const noexcept { return bias_; }
    const ParamTensor& gamma() const noexcept { return gamma_; }
    const ParamTensor& beta() const noexcept { return beta_; }
    const Matrix& running_mean() const noexcept { return running_mean_; }
    const Matrix& running_var() const noexcept { return running_var_; }

    /// Drops the forward cache; a later backward() without forward() throws.
    void clear_cache() { cache_ = {}; }

private:
    struct Cache {
        bool valid = false;
        Mode mode = Mode::Eval;
        Matrix input;
        Matrix xhat;
        std::vector<double> inv_std;
        Matrix pre_activation;
        Matrix activated;
        Matrix mask;
    };

    DenseLayerSpec spec_;
    std::string name_;
    BatchNormConfig bn_;
    ParamTensor weight_;
    ParamTensor bias_;
    ParamTensor gamma_;
    ParamTensor beta_;
    Matrix running_mean_;
    Matrix running_var_;
    Cache cache_;
};

} // namespace gamenet::nn
