#pragma once

#include "gamenet/dense.hpp"

#include <string>
#include <vector>

namespace gamenet::nn {

/// Sequential stack of dense layers.
class DenseStack {
public:
    DenseStack() = default;
    DenseStack(const std::vector<DenseLayerSpec>& specs, Rng& init_rng, const std::string& name,
               BatchNormConfig bn = {});

    Matrix forward(const Matrix& x, Mode mode, Rng& rng);
    Matrix backward(const Matrix& grad_out);
    /// Eval-mode forward without caches.
    Matrix infer(const Matrix& x) const;

    std::vector<ParamTensor*> parameters();
    std::vector<Matrix*> buffers();
    void zero_grad();
    void clear_cache();

    std::size_t in_dim() const;
    std::size_t out_dim() const;
    std::size_t size() const noexcept { return layers_.size(); }
    bool empty() const noexcept { return layers_.empty(); }
    std::size_t parameter_count() const;

    std::vector<DenseLayerSpec> specs() const;
    DenseLayer& layer(std::size_t i) { return layers_.at(i); }
    const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
    std::vector<DenseLayer> layers_;
};

/// Copies of every parameter value and buffer, in a fixed order.
using StateSnapshot = std::vector<Matrix>;

StateSnapshot snapshot(const std::vector<ParamTensor*>& params, const std::vector<Matrix*>& buffers);
void restore(const StateSnapshot& state, const std::vector<ParamTensor*>& params,
             const std::vector<Matrix*>& buffers);

} // namespace gamenet::nn
