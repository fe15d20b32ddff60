#pragma once

#include "gamenet/matrix.hpp"

#include <span>
#include <vector>

namespace gamenet::nn {

struct LossValue {
    double value = 0.0;
    Matrix grad; ///< dL/dpred
};

/// Mean over all elements of (pred - target)^2; grad = 2 (pred - target) / N.
LossValue mse_loss(const Matrix& pred, const Matrix& target);

/// Max-shifted softmax; outputs are positive and sum to 1.
std::vector<double> softmax(std::span<const double> logits);
/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);
/// dL/dlogits given softmax probabilities and dL/dprobs.
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs);

} // namespace gamenet::nn
