#include "gamenet/loss.hpp"

#include "gamenet/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gamenet::nn {

LossValue mse_loss(const Matrix& pred, const Matrix& target)
{
    require_same_shape(pred, target, "mse_loss");
    if (pred.empty())
        throw ShapeError("mse_loss: empty input");
    LossValue out;
    out.grad = Matrix(pred.rows(), pred.cols());
    const double n = static_cast<double>(pred.size());
    auto p = pred.values();
    auto t = target.values();
    auto g = out.grad.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        sum += d * d;
        g[i] = 2.0 * d / n;
    }
    out.value = sum / n;
    return out;
}

std::vector<double> softmax(std::span<const double> logits)
{
    std::vector<double> out(logits.size());
    if (logits.empty())
        return out;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        // Floor at the smallest normal double so every weight stays strictly positive.
        out[i] = std::max(std::exp(logits[i] - mx), std::numeric_limits<double>::min());
        z += out[i];
    }
    for (double& v : out)
        v /= z;
    return out;
}

Matrix softmax_rows(const Matrix& logits)
{
    require_finite(logits, "softmax");
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto p = softmax(logits.row(r));
        std::copy(p.begin(), p.end(), out.row(r).begin());
    }
    return out;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs)
{
    require_same_shape(probs, grad_probs, "softmax_rows_backward");
    Matrix out(probs.rows(), probs.cols());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t k = 0; k < probs.cols(); ++k)
            dot += probs(r, k) * grad_probs(r, k);
        for (std::size_t k = 0; k < probs.cols(); ++k)
            out(r, k) = probs(r, k) * (grad_probs(r, k) - dot);
    }
    return out;
}

} // namespace gamenet::nn
