#pragma once
// AdamW with decoupled weight decay and bias-corrected moments.

#include <cmath>

#include "mtnet/nn.hpp"

namespace mtnet {

template <class T>
struct AdamW {
    ParamList<T> params;
    double lr, beta1, beta2, eps, weight_decay;
    std::int64_t t = 0;
    std::vector<std::vector<double>> m, v;  // moments kept in double

    AdamW(ParamList<T> p, double lr_, double b1 = 0.9, double b2 = 0.999, double wd = 0.01,
          double eps_ = 1e-8)
        : params(std::move(p)), lr(lr_), beta1(b1), beta2(b2), eps(eps_), weight_decay(wd) {
        for (auto& [name, tens] : params) {
            m.emplace_back(tens.numel(), 0.0);
            v.emplace_back(tens.numel(), 0.0);
        }
    }

    void zero_grad() {
        for (auto& [name, tens] : params)
            if (tens.requires_grad()) tens.zero_grad();
    }

    void step() {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, double(t));
        const double bc2 = 1.0 - std::pow(beta2, double(t));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& tens = params[i].second;
            if (!tens.requires_grad()) continue;  // running buffers ride along for checkpoints
            if (!tens.has_grad())
                throw std::runtime_error("adamw: step before backward (missing gradient)");
            T* w = tens.data();
            const T* g = tens.grad().data();
            for (std::int64_t j = 0; j < tens.numel(); ++j) {
                const double gj = double(g[j]);
                m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * gj;
                v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * gj * gj;
                const double mhat = m[i][j] / bc1;
                const double vhat = v[i][j] / bc2;
                double wj = double(w[j]);
                wj -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * wj);
                w[j] = T(wj);
            }
        }
    }
};

}  // namespace mtnet
