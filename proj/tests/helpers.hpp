#pragma once
// Shared test utilities: random tensors, an independent finite-difference
// gradient checker, and naive reference implementations used as oracles.

#include <functional>
#include <vector>

#include "mtnet/ops.hpp"
#include "mtnet/rng.hpp"

namespace testutil {

using mtnet::Rng;
using mtnet::Shape;
using mtnet::Tensor;

template <class T>
Tensor<T> rand_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0,
                      bool requires_grad = true) {
    std::vector<T> data(mtnet::shape_numel(shape));
    for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
    auto t = Tensor<T>::from(std::move(shape), std::move(data));
    t.set_requires_grad(requires_grad);
    return t;
}

struct GradCheckResult {
    double max_rel_err = 0;
    std::int64_t checked = 0;
};

// Central-difference check of d(loss)/d(inputs[i]) at `coords` random
// coordinates per input. `loss_fn` must rebuild the graph from the current
// input values on every call.
inline GradCheckResult check_gradients(const std::function<Tensor<double>()>& loss_fn,
                                       std::vector<Tensor<double>> inputs, Rng& rng,
                                       int coords_per_input = 4, double h = 1e-6) {
    auto loss = loss_fn();
    mtnet::backward(loss);

    GradCheckResult res;
    for (auto& input : inputs) {
        const auto analytic = input.grad();  // copy before perturbing
        for (int c = 0; c < coords_per_input; ++c) {
            const std::int64_t i = rng.randint(0, input.numel() - 1);
            const double orig = input.data()[i];
            input.data()[i] = orig + h;
            const double fp = loss_fn().item();
            input.data()[i] = orig - h;
            const double fm = loss_fn().item();
            input.data()[i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
            res.max_rel_err = std::max(res.max_rel_err, std::abs(a - numeric) / denom);
            ++res.checked;
        }
        input.zero_grad();
    }
    return res;
}

// Triple-loop matrix product, the matmul oracle.
inline std::vector<double> naive_matmul(const std::vector<double>& a,
                                        const std::vector<double>& b, std::int64_t m,
                                        std::int64_t k, std::int64_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            for (std::int64_t l = 0; l < k; ++l) c[i * n + j] += a[i * k + l] * b[l * n + j];
    return c;
}

// Six-loop direct convolution, the conv2d oracle (groups supported).
inline std::vector<double> naive_conv2d(const std::vector<double>& x,
                                        const std::vector<double>& w,
                                        const std::vector<double>& b, std::int64_t N,
                                        std::int64_t C, std::int64_t H, std::int64_t W,
                                        std::int64_t Co, std::int64_t k, std::int64_t stride,
                                        std::int64_t pad, std::int64_t groups) {
    const std::int64_t Ho = (H + 2 * pad - k) / stride + 1;
    const std::int64_t Wo = (W + 2 * pad - k) / stride + 1;
    const std::int64_t Cg = C / groups, Cog = Co / groups;
    std::vector<double> y(N * Co * Ho * Wo, 0.0);
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t co = 0; co < Co; ++co) {
            const std::int64_t g = co / Cog;
            for (std::int64_t oy = 0; oy < Ho; ++oy)
                for (std::int64_t ox = 0; ox < Wo; ++ox) {
                    double acc = b.empty() ? 0.0 : b[co];
                    for (std::int64_t ci = 0; ci < Cg; ++ci)
                        for (std::int64_t ky = 0; ky < k; ++ky)
                            for (std::int64_t kx = 0; kx < k; ++kx) {
                                const std::int64_t iy = oy * stride + ky - pad;
                                const std::int64_t ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += x[((n * C + g * Cg + ci) * H + iy) * W + ix] *
                                       w[((co * Cg + ci) * k + ky) * k + kx];
                            }
                    y[((n * Co + co) * Ho + oy) * Wo + ox] = acc;
                }
        }
    return y;
}

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) return 1e30;
    double m = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(double(a.values()[i]) - double(b.values()[i])));
    return m;
}

}  // namespace testutil
