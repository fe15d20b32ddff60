#pragma once

#include "gamenet/matrix.hpp"

#include <string>

namespace gamenet::nn {

enum class ActivationKind { Identity, ELU, LeakyReLU, Sigmoid };

struct Activation {
    ActivationKind kind = ActivationKind::Identity;
    /// ELU alpha or LeakyReLU negative slope; unused otherwise.
    double param = 0.0;

    static Activation identity() { return {}; }
    static Activation elu(double alpha) { return {ActivationKind::ELU, alpha}; }
    static Activation leaky_relu(double slope) { return {ActivationKind::LeakyReLU, slope}; }
    static Activation sigmoid() { return {ActivationKind::Sigmoid, 0.0}; }

    /// Throws ConfigError for alpha <= 0 or slope outside (0, 1).
    void validate() const;
    std::string name() const;

    friend bool operator==(const Activation&, const Activation&) = default;
};

ActivationKind parse_activation_kind(const std::string& name);

double activate(double v, const Activation& act) noexcept;

/// Elementwise activation. Rejects non-finite input with NumericError.
Matrix activation_forward(const Matrix& x, const Activation& act);

/// dL/dx given the pre-activation input, the activation output and dL/dy.
Matrix activation_backward(const Matrix& pre, const Matrix& out, const Matrix& grad_out,
                           const Activation& act);

} // namespace gamenet::nn
