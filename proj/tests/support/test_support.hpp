#pragma once

#include "gamenet/dense.hpp"
#include "gamenet/matrix.hpp"
#include "gamenet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace gamenet::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0)
{
    Matrix m(rows, cols);
    for (double& v : m.values())
        v = rng.normal() * scale;
    return m;
}

inline Matrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi)
{
    Matrix m(rows, cols);
    for (double& v : m.values())
        v = rng.uniform(lo, hi);
    return m;
}

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::string worst;
    std::size_t checked = 0;
};

/// Central differences over every entry of `targets`.
///
/// `loss` must recompute the scalar loss from scratch (re-seeding any rng it
/// uses so dropout masks repeat). `analytic` must return the analytic
/// gradient of each target, in the same order, as computed at the current point.
inline GradCheck finite_difference(std::vector<Matrix*> targets, const std::vector<std::string>& names,
                                   const std::function<double()>& loss,
                                   const std::vector<Matrix>& analytic, double h = 1e-5)
{
    GradCheck out;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        Matrix& m = *targets[t];
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double orig = m.values()[i];
            m.values()[i] = orig + h;
            const double lp = loss();
            m.values()[i] = orig - h;
            const double lm = loss();
            m.values()[i] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double e = rel_err(analytic[t].values()[i], numeric);
            ++out.checked;
            if (e > out.max_rel_err) {
                out.max_rel_err = e;
                out.worst = names[t] + "[" + std::to_string(i) + "] analytic=" +
                            std::to_string(analytic[t].values()[i]) + " numeric=" + std::to_string(numeric);
            }
        }
    }
    return out;
}

/// Convenience wrapper for parameter tensors: `backward` zeroes grads and
/// runs forward + backward once at the current point.
inline GradCheck check_params(const std::vector<nn::ParamTensor*>& params, const std::function<double()>& loss,
                              const std::function<void()>& backward, double h = 1e-5)
{
    for (auto* p : params)
        p->zero_grad();
    backward();
    std::vector<Matrix*> targets;
    std::vector<std::string> names;
    std::vector<Matrix> grads;
    for (auto* p : params) {
        targets.push_back(&p->value);
        names.push_back(p->name);
        grads.push_back(p->grad);
    }
    return finite_difference(targets, names, loss, grads, h);
}

/// True if central differences at h and h/10 agree for every entry, i.e. no
/// activation kink lies within the step. Independent of any analytic gradient.
inline bool smooth_within_step(const std::vector<Matrix*>& targets, const std::function<double()>& loss,
                               double h = 1e-5, double tol = 1e-2)
{
    for (Matrix* m : targets) {
        for (std::size_t i = 0; i < m->size(); ++i) {
            const double orig = m->values()[i];
            auto diff = [&](double step) {
                m->values()[i] = orig + step;
                const double lp = loss();
                m->values()[i] = orig - step;
                const double lm = loss();
                m->values()[i] = orig;
                return (lp - lm) / (2.0 * step);
            };
            const double coarse = diff(h);
            const double fine = diff(h / 10.0);
            if (std::abs(coarse - fine) > tol * std::max({std::abs(coarse), std::abs(fine), 1e-6}))
                return false;
        }
    }
    return true;
}

inline std::vector<Matrix*> values_of(const std::vector<nn::ParamTensor*>& params)
{
    std::vector<Matrix*> out;
    for (auto* p : params)
        out.push_back(&p->value);
    return out;
}

} // namespace gamenet::testing
