#include "gamenet/activation.hpp"

#include "gamenet/error.hpp"

#include <cmath>
#include <limits>

namespace gamenet::nn {
namespace {

// Largest double below 1 and smallest normal double: keeps sigmoid outputs
// strictly inside (0, 1) even when exp() saturates.
constexpr double kSigmoidHi = 1.0 - 0x1.0p-53;
constexpr double kSigmoidLo = std::numeric_limits<double>::min();

double sigmoid(double v) noexcept
{
    double s;
    if (v >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-v));
    } else {
        const double e = std::exp(v);
        s = e / (1.0 + e);
    }
    if (s > kSigmoidHi)
        return kSigmoidHi;
    if (s < kSigmoidLo)
        return kSigmoidLo;
    return s;
}

} // namespace

void Activation::validate() const
{
    switch (kind) {
    case ActivationKind::ELU:
        if (!(param > 0.0))
            throw ConfigError("ELU alpha must be > 0");
        break;
    case ActivationKind::LeakyReLU:
        if (!(param > 0.0 && param < 1.0))
            throw ConfigError("LeakyReLU slope must be in (0, 1)");
        break;
    default:
        break;
    }
}

std::string Activation::name() const
{
    switch (kind) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::ELU: return "elu";
    case ActivationKind::LeakyReLU: return "leaky_relu";
    case ActivationKind::Sigmoid: return "sigmoid";
    }
    return "unknown";
}

ActivationKind parse_activation_kind(const std::string& name)
{
    if (name == "identity")
        return ActivationKind::Identity;
    if (name == "elu")
        return ActivationKind::ELU;
    if (name == "leaky_relu")
        return ActivationKind::LeakyReLU;
    if (name == "sigmoid")
        return ActivationKind::Sigmoid;
    throw ConfigError("unknown activation '" + name + "'");
}

double activate(double v, const Activation& act) noexcept
{
    switch (act.kind) {
    case ActivationKind::Identity: return v;
    case ActivationKind::ELU: return v > 0.0 ? v : act.param * std::expm1(v);
    case ActivationKind::LeakyReLU: return v > 0.0 ? v : act.param * v;
    case ActivationKind::Sigmoid: return sigmoid(v);
    }
    return v;
}

Matrix activation_forward(const Matrix& x, const Activation& act)
{
    require_finite(x, "activation_forward(" + act.name() + ")");
    if (act.kind == ActivationKind::Identity)
        return x;
    Matrix y(x.rows(), x.cols());
    auto in = x.values();
    auto out = y.values();
    for (std::size_t i = 0; i < in.size(); ++i)
        out[i] = activate(in[i], act);
    return y;
}

Matrix activation_backward(const Matrix& pre, const Matrix& out, const Matrix& grad_out,
                           const Activation& act)
{
    require_same_shape(pre, grad_out, "activation_backward");
    if (act.kind == ActivationKind::Identity)
        return grad_out;
    Matrix g(pre.rows(), pre.cols());
    auto p = pre.values();
    auto y = out.values();
    auto go = grad_out.values();
    auto gi = g.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = 1.0;
        switch (act.kind) {
        case ActivationKind::ELU: d = p[i] > 0.0 ? 1.0 : y[i] + act.param; break;
        case ActivationKind::LeakyReLU: d = p[i] > 0.0 ? 1.0 : act.param; break;
        case ActivationKind::Sigmoid: d = y[i] * (1.0 - y[i]); break;
        case ActivationKind::Identity: break;
        }
        gi[i] = go[i] * d;
    }
    return g;
}

} // namespace gamenet::nn
