#include "gamenet/dense.hpp"

#include "gamenet/error.hpp"

#include <cmath>

namespace gamenet::nn {

void DenseLayerSpec::validate() const
{
    if (in_dim == 0 || out_dim == 0)
        throw ConfigError("dense layer dims must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("dropout probability must be in [0, 1)");
    activation.validate();
}

DenseLayer::DenseLayer(DenseLayerSpec spec, Rng& init_rng, std::string name, BatchNormConfig bn)
    : spec_(spec), name_(std::move(name)), bn_(bn),
      weight_(name_ + ".weight", spec.in_dim, spec.out_dim),
      bias_(name_ + ".bias", 1, spec.out_dim)
{
    spec_.validate();
    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and bias.
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec_.in_dim));
    for (double& w : weight_.value.values())
        w = init_rng.uniform(-bound, bound);
    for (double& b : bias_.value.values())
        b = init_rng.uniform(-bound, bound);
    if (spec_.batchnorm) {
        gamma_ = ParamTensor(name_ + ".bn.gamma", 1, spec_.out_dim, 1.0);
        beta_ = ParamTensor(name_ + ".bn.beta", 1, spec_.out_dim, 0.0);
        running_mean_ = Matrix(1, spec_.out_dim, 0.0);
        running_var_ = Matrix(1, spec_.out_dim, 1.0);
    }
}

std::vector<ParamTensor*> DenseLayer::parameters()
{
    std::vector<ParamTensor*> out{&weight_, &bias_};
    if (spec_.batchnorm) {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }
    return out;
}

std::vector<Matrix*> DenseLayer::buffers()
{
    if (!spec_.batchnorm)
        return {};
    return {&running_mean_, &running_var_};
}

Matrix DenseLayer::forward(const Matrix& x, Mode mode, Rng& rng)
{
    if (x.cols() != spec_.in_dim)
        throw ShapeError("layer '" + name_ + "': expected " + std::to_string(spec_.in_dim) +
                         " input columns, got " + std::to_string(x.cols()));
    require_finite(x, "layer '" + name_ + "' input");

    const std::size_t n = x.rows();
    const std::size_t m = spec_.out_dim;
    Cache c;
    c.mode = mode;
    c.input = x;

    Matrix z = matmul(x, weight_.value);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < m; ++j)
            z(r, j) += bias_.value(0, j);

    if (spec_.batchnorm) {
        c.xhat = Matrix(n, m);
        c.inv_std.assign(m, 0.0);
        const bool batch_stats = mode == Mode::Train;
        for (std::size_t j = 0; j < m; ++j) {
            double mean = running_mean_(0, j);
            double var = running_var_(0, j);
            if (batch_stats) {
                mean = 0.0;
                for (std::size_t r = 0; r < n; ++r)
                    mean += z(r, j);
                mean /= static_cast<double>(n);
                var = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    const double d = z(r, j) - mean;
                    var += d * d;
                }
                var /= static_cast<double>(n);
                const double unbiased =
                    n > 1 ? var * static_cast<double>(n) / static_cast<double>(n - 1) : var;
                running_mean_(0, j) = (1.0 - bn_.momentum) * running_mean_(0, j) + bn_.momentum * mean;
                running_var_(0, j) = (1.0 - bn_.momentum) * running_var_(0, j) + bn_.momentum * unbiased;
            }
            const double inv_std = 1.0 / std::sqrt(var + bn_.eps);
            c.inv_std[j] = inv_std;
            for (std::size_t r = 0; r < n; ++r) {
                const double xh = (z(r, j) - mean) * inv_std;
                c.xhat(r, j) = xh;
                z(r, j) = gamma_.value(0, j) * xh + beta_.value(0, j);
            }
        }
    }

    Matrix a = activation_forward(z, spec_.activation);

    if (mode == Mode::Train && spec_.dropout > 0.0) {
        const double keep_scale = 1.0 / (1.0 - spec_.dropout);
        c.mask = Matrix(n, m);
        Matrix out(n, m);
        auto mask = c.mask.values();
        auto av = a.values();
        auto ov = out.values();
        for (std::size_t i = 0; i < av.size(); ++i) {
            mask[i] = rng.uniform() >= spec_.dropout ? keep_scale : 0.0;
            ov[i] = av[i] * mask[i];
        }
        c.pre_activation = std::move(z);
        c.activated = std::move(a);
        c.valid = true;
        cache_ = std::move(c);
        return out;
    }

    c.pre_activation = std::move(z);
    c.activated = a;
    c.valid = true;
    cache_ = std::move(c);
    return a;
}

Matrix DenseLayer::infer(const Matrix& x) const
{
    if (x.cols() != spec_.in_dim)
        throw ShapeError("layer '" + name_ + "': expected " + std::to_string(spec_.in_dim) +
                         " input columns, got " + std::to_string(x.cols()));
    require_finite(x, "layer '" + name_ + "' input");
    Matrix z = matmul(x, weight_.value);
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t j = 0; j < z.cols(); ++j)
            z(r, j) += bias_.value(0, j);
    if (spec_.batchnorm) {
        for (std::size_t j = 0; j < z.cols(); ++j) {
            const double inv_std = 1.0 / std::sqrt(running_var_(0, j) + bn_.eps);
            for (std::size_t r = 0; r < z.rows(); ++r)
            {
                const double xh = (z(r, j) - running_mean_(0, j)) * inv_std;
                z(r, j) = gamma_.value(0, j) * xh + beta_.value(0, j);
            }
        }
    }
    return activation_forward(z, spec_.activation);
}

Matrix DenseLayer::backward(const Matrix& grad_out)
{
    if (!cache_.valid)
        throw StateError("layer '" + name_ + "': backward called without a recorded forward pass");
    const std::size_t n = cache_.input.rows();
    const std::size_t m = spec_.out_dim;
    if (grad_out.rows() != n || grad_out.cols() != m)
        throw ShapeError("layer '" + name_ + "': gradient shape does not match forward output");

    Matrix g = grad_out;
    if (!cache_.mask.empty()) {
        auto gv = g.values();
        auto mask = cache_.mask.values();
        for (std::size_t i = 0; i < gv.size(); ++i)
            gv[i] *= mask[i];
    }
    g = activation_backward(cache_.pre_activation, cache_.activated, g, spec_.activation);

    if (spec_.batchnorm) {
        Matrix dz(n, m);
        const double nn = static_cast<double>(n);
        for (std::size_t j = 0; j < m; ++j) {
            double sum_dy = 0.0;
            double sum_dy_xhat = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                sum_dy += g(r, j);
                sum_dy_xhat += g(r, j) * cache_.xhat(r, j);
            }
            gamma_.grad(0, j) += sum_dy_xhat;
            beta_.grad(0, j) += sum_dy;
            const double gam = gamma_.value(0, j);
            const double inv_std = cache_.inv_std[j];
            if (cache_.mode == Mode::Train) {
                // Batch statistics depend on every row of the batch.
                for (std::size_t r = 0; r < n; ++r)
                    dz(r, j) = gam * inv_std / nn *
                               (nn * g(r, j) - sum_dy - cache_.xhat(r, j) * sum_dy_xhat);
            } else {
                for (std::size_t r = 0; r < n; ++r)
                    dz(r, j) = gam * inv_std * g(r, j);
            }
        }
        g = std::move(dz);
    }

    Matrix dw = matmul_at_b(cache_.input, g);
    auto wg = weight_.grad.values();
    auto dwv = dw.values();
    for (std::size_t i = 0; i < wg.size(); ++i)
        wg[i] += dwv[i];
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < m; ++j)
            bias_.grad(0, j) += g(r, j);

    return matmul_a_bt(g, weight_.value);
}

} // namespace gamenet::nn
