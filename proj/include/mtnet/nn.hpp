#pragma once
// Parameterized layers on top of the op library. Parameters are named through
// a flat registry so checkpoints and the optimizer see one list; layers shared
// between call sites register once.

#include <string>
#include <utility>
#include <vector>

#include "mtnet/ops.hpp"
#include "mtnet/ops_conv.hpp"
#include "mtnet/rng.hpp"

namespace mtnet {

template <class T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>>>;

// Fan-in-scaled uniform init, U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
template <class T>
Tensor<T> init_uniform(Rng& rng, Shape shape, std::int64_t fan_in) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<T> data(shape_numel(shape));
    for (auto& v : data) v = static_cast<T>(rng.uniform(-limit, limit));
    auto t = Tensor<T>::from(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    return t;
}

template <class T>
struct Conv2d {
    Tensor<T> w, b;
    std::int64_t stride = 1, pad = 0, groups = 1;

    Conv2d() = default;
    Conv2d(Rng& rng, std::int64_t cin, std::int64_t cout, std::int64_t k, std::int64_t stride_,
           std::int64_t pad_, std::int64_t groups_ = 1, bool bias = true)
        : stride(stride_), pad(pad_), groups(groups_) {
        const std::int64_t fan_in = (cin / groups_) * k * k;
        w = init_uniform<T>(rng, {cout, cin / groups_, k, k}, fan_in);
        if (bias) b = init_uniform<T>(rng, {cout}, fan_in);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w, b, stride, pad, groups); }

    void params(const std::string& prefix, ParamList<T>& out) {
        out.emplace_back(prefix + ".w", w);
        if (b.defined()) out.emplace_back(prefix + ".b", b);
    }
};

template <class T>
struct Linear {
    Tensor<T> w, b;

    Linear() = default;
    Linear(Rng& rng, std::int64_t in, std::int64_t out, bool bias = true) {
        w = init_uniform<T>(rng, {in, out}, in);
        if (bias) b = init_uniform<T>(rng, {out}, in);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return linear(x, w, b); }

    void params(const std::string& prefix, ParamList<T>& out) {
        out.emplace_back(prefix + ".w", w);
        if (b.defined()) out.emplace_back(prefix + ".b", b);
    }
};

// Affine starts at (1, 0).
template <class T>
struct LayerNorm {
    Tensor<T> gamma, beta;
    int axis = 1;

    LayerNorm() = default;
    LayerNorm(std::int64_t dim, int axis_) : axis(axis_) {
        gamma = Tensor<T>::full({dim}, T(1));
        gamma.set_requires_grad(true);
        beta = Tensor<T>::zeros({dim});
        beta.set_requires_grad(true);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return layernorm(x, gamma, beta, axis); }

    void params(const std::string& prefix, ParamList<T>& out) {
        out.emplace_back(prefix + ".gamma", gamma);
        out.emplace_back(prefix + ".beta", beta);
    }
};

// Batch stats over (N,H,W) while training, running averages at inference.
template <class T>
struct BatchNorm2d {
    Tensor<T> gamma, beta;            // stored [1,C,1,1] for broadcasting
    Tensor<T> running_mean, running_var;  // buffers, not graph leaves
    T momentum = T(0.1);
    T eps = T(1e-5);

    BatchNorm2d() = default;
    explicit BatchNorm2d(std::int64_t c) {
        gamma = Tensor<T>::full({1, c, 1, 1}, T(1));
        gamma.set_requires_grad(true);
        beta = Tensor<T>::zeros({1, c, 1, 1});
        beta.set_requires_grad(true);
        running_mean = Tensor<T>::zeros({1, c, 1, 1});
        running_var = Tensor<T>::full({1, c, 1, 1}, T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        if (training) {
            auto mu = reduce_mean(reduce_mean(reduce_mean(x, 3), 2), 0);
            auto xc = sub(x, mu);
            auto var = reduce_mean(reduce_mean(reduce_mean(mul(xc, xc), 3), 2), 0);
            // Population variance in both the normalization and the buffers.
            for (std::int64_t i = 0; i < running_mean.numel(); ++i) {
                running_mean.values()[i] = (T(1) - momentum) * running_mean.values()[i] +
                                           momentum * mu.values()[i];
                running_var.values()[i] = (T(1) - momentum) * running_var.values()[i] +
                                          momentum * var.values()[i];
            }
            auto norm = mul(xc, rsqrt(add_const(var, eps)));
            return add(mul(norm, gamma), beta);
        }
        auto xc = sub(x, running_mean);
        auto norm = mul(xc, rsqrt(add_const(running_var, eps)));
        return add(mul(norm, gamma), beta);
    }

    void params(const std::string& prefix, ParamList<T>& out) {
        out.emplace_back(prefix + ".gamma", gamma);
        out.emplace_back(prefix + ".beta", beta);
        // Buffers travel in checkpoints but take no gradient.
        out.emplace_back(prefix + ".running_mean", running_mean);
        out.emplace_back(prefix + ".running_var", running_var);
    }
};

}  // namespace mtnet
