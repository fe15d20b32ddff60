#include "gamenet/network.hpp"

#include "gamenet/error.hpp"

namespace gamenet::nn {

DenseStack::DenseStack(const std::vector<DenseLayerSpec>& specs, Rng& init_rng,
                       const std::string& name, BatchNormConfig bn)
    : name_(name)
{
    layers_.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (i > 0 && specs[i].in_dim != specs[i - 1].out_dim)
            throw ShapeError(name + ": layer " + std::to_string(i) + " expects " +
                             std::to_string(specs[i].in_dim) + " inputs but previous layer emits " +
                             std::to_string(specs[i - 1].out_dim));
        layers_.emplace_back(specs[i], init_rng, name + "." + std::to_string(i), bn);
    }
}

Matrix DenseStack::forward(const Matrix& x, Mode mode, Rng& rng)
{
    Matrix h = x;
    for (auto& l : layers_)
        h = l.forward(h, mode, rng);
    return h;
}

Matrix DenseStack::infer(const Matrix& x) const
{
    Matrix h = x;
    for (const auto& l : layers_)
        h = l.infer(h);
    return h;
}

Matrix DenseStack::backward(const Matrix& grad_out)
{
    Matrix g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        g = it->backward(g);
    return g;
}

std::vector<ParamTensor*> DenseStack::parameters()
{
    std::vector<ParamTensor*> out;
    for (auto& l : layers_)
        for (auto* p : l.parameters())
            out.push_back(p);
    return out;
}

std::vector<Matrix*> DenseStack::buffers()
{
    std::vector<Matrix*> out;
    for (auto& l : layers_)
        for (auto* b : l.buffers())
            out.push_back(b);
    return out;
}

void DenseStack::zero_grad()
{
    for (auto* p : parameters())
        p->zero_grad();
}

void DenseStack::clear_cache()
{
    for (auto& l : layers_)
        l.clear_cache();
}

std::size_t DenseStack::in_dim() const
{
    return layers_.empty() ? 0 : layers_.front().spec().in_dim;
}

std::size_t DenseStack::out_dim() const
{
    return layers_.empty() ? 0 : layers_.back().spec().out_dim;
}

std::size_t DenseStack::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers_) {
        const auto& s = l.spec();
        n += s.in_dim * s.out_dim + s.out_dim;
        if (s.batchnorm)
            n += 2 * s.out_dim;
    }
    return n;
}

std::vector<DenseLayerSpec> DenseStack::specs() const
{
    std::vector<DenseLayerSpec> out;
    for (const auto& l : layers_)
        out.push_back(l.spec());
    return out;
}

StateSnapshot snapshot(const std::vector<ParamTensor*>& params, const std::vector<Matrix*>& buffers)
{
    StateSnapshot s;
    s.reserve(params.size() + buffers.size());
    for (const auto* p : params)
        s.push_back(p->value);
    for (const auto* b : buffers)
        s.push_back(*b);
    return s;
}

void restore(const StateSnapshot& state, const std::vector<ParamTensor*>& params,
             const std::vector<Matrix*>& buffers)
{
    if (state.size() != params.size() + buffers.size())
        throw StateError("restore: snapshot does not match the parameter layout");
    std::size_t i = 0;
    for (auto* p : params) {
        require_same_shape(state[i], p->value, "restore " + p->name);
        p->value = state[i++];
    }
    for (auto* b : buffers) {
        require_same_shape(state[i], *b, "restore buffer");
        *b = state[i++];
    }
}

} // namespace gamenet::nn
