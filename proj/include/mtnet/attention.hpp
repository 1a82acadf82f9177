#pragma once
// Multi-head attention core, window partitioning, and the instrumented
// multiply counter for the attention products (QK^T and attn*V only;
// projections are not counted).

#include <cstdint>

#include "mtnet/nn.hpp"

namespace mtnet {

struct AttnMultCounter {
    static inline bool enabled = false;
    static inline std::uint64_t mults = 0;
    static void reset() { mults = 0; }
};

// Exact multiply counts for one attention pass at the given geometry.
struct AttentionFlops {
    std::uint64_t lttl_mults;
    std::uint64_t gttl_mults;
    std::uint64_t dense_mults;
};

// M is the window side; r the key/value spatial reduction ratio. Window
// counts include the zero-padding to the next multiple of M, matching the
// implementation. Note the window cost is dense * M^2/(H*W): running the
// grid reading (window side H/M) reproduces the dense/M^2 scaling.
inline AttentionFlops count_attention_flops(std::int64_t T, std::int64_t H, std::int64_t W,
                                            std::int64_t d, std::int64_t M, std::int64_t r) {
    if (T < 1 || H < 1 || W < 1 || d < 1 || M < 1 || r < 1)
        throw std::runtime_error("count_attention_flops: dims must be positive");
    const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v); };
    const std::uint64_t n_dense = u(T) * u(H) * u(W);
    const std::uint64_t wy = u((H + M - 1) / M), wx = u((W + M - 1) / M);
    const std::uint64_t n_win = u(T) * u(M) * u(M);
    const std::uint64_t n_kv = u(T) * u(H / r) * u(W / r);
    return {2 * wy * wx * n_win * n_win * u(d), 2 * n_dense * n_kv * u(d),
            2 * n_dense * n_dense * u(d)};
}

// q [B,Nq,d], kv [B,Nk,d], optional additive mask broadcastable to
// [B,h,Nq,Nk]. Scaled dot-product per head with 1/sqrt(d/h).
template <class T>
struct MultiHeadAttention {
    Linear<T> wq, wk, wv, wo;
    std::int64_t dim = 0, heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(Rng& rng, std::int64_t d, std::int64_t h)
        : wq(rng, d, d), wk(rng, d, d), wv(rng, d, d), wo(rng, d, d), dim(d), heads(h) {
        if (d % h != 0) throw std::runtime_error("attention: heads must divide dim");
    }

    Tensor<T> forward(const Tensor<T>& q_in, const Tensor<T>& kv_in,
                      const Tensor<T>& mask = Tensor<T>()) const {
        const std::int64_t B = q_in.dim(0), Nq = q_in.dim(1), Nk = kv_in.dim(1);
        const std::int64_t dh = dim / heads;

        auto heads_view = [&](Tensor<T> t, std::int64_t n) {
            t = reshape(t, {B, n, heads, dh});
            return permute(t, {0, 2, 1, 3});  // [B,h,N,dh]
        };
        auto q = heads_view(wq.forward(q_in), Nq);
        auto k = heads_view(wk.forward(kv_in), Nk);
        auto v = heads_view(wv.forward(kv_in), Nk);

        auto kt = permute(k, {0, 1, 3, 2});  // [B,h,dh,Nk]
        if (AttnMultCounter::enabled)
            AttnMultCounter::mults += static_cast<std::uint64_t>(B) * Nq * Nk * dim;
        auto scores = scale(matmul(q, kt), static_cast<T>(1.0 / std::sqrt(double(dh))));
        if (mask.defined()) scores = add(scores, mask);
        auto attn = softmax(scores, 3);
        if (AttnMultCounter::enabled)
            AttnMultCounter::mults += static_cast<std::uint64_t>(B) * Nq * Nk * dim;
        auto out = matmul(attn, v);                   // [B,h,Nq,dh]
        out = permute(out, {0, 2, 1, 3});             // [B,Nq,h,dh]
        return wo.forward(reshape(out, {B, Nq, dim}));
    }

    void params(const std::string& p, ParamList<T>& out) {
        wq.params(p + ".wq", out);
        wk.params(p + ".wk", out);
        wv.params(p + ".wv", out);
        wo.params(p + ".wo", out);
    }
};

// ---- window partitioning ---------------------------------------------------

struct WindowGrid {
    std::int64_t m;          // window side
    std::int64_t h, w;       // unpadded extents
    std::int64_t hp, wp;     // padded extents, multiples of m
    std::int64_t windows() const { return (hp / m) * (wp / m); }
    std::int64_t tokens_per_window(std::int64_t t) const { return t * m * m; }
};

inline WindowGrid make_window_grid(std::int64_t h, std::int64_t w, std::int64_t m) {
    if (m < 1) throw std::runtime_error("window grid: window side must be >= 1");
    WindowGrid g;
    g.m = m;
    g.h = h;
    g.w = w;
    g.hp = (h + m - 1) / m * m;
    g.wp = (w + m - 1) / m * m;
    return g;
}

// [T,d,H,W] -> [nWin, T*M*M, d]; pads bottom/right with zeros.
template <class T>
Tensor<T> window_partition(const Tensor<T>& x, const WindowGrid& g) {
    const std::int64_t t = x.dim(0), d = x.dim(1);
    auto p = pad2d(x, 0, g.hp - g.h, 0, g.wp - g.w);
    const std::int64_t wy = g.hp / g.m, wx = g.wp / g.m;
    auto r = reshape(p, {t, d, wy, g.m, wx, g.m});
    auto q = permute(r, {2, 4, 0, 3, 5, 1});  // [wy,wx,T,M,M,d]
    return reshape(q, {wy * wx, t * g.m * g.m, d});
}

// Inverse of window_partition; crops the padding back off.
template <class T>
Tensor<T> window_unpartition(const Tensor<T>& tokens, const WindowGrid& g, std::int64_t t,
                             std::int64_t d) {
    const std::int64_t wy = g.hp / g.m, wx = g.wp / g.m;
    auto r = reshape(tokens, {wy, wx, t, g.m, g.m, d});
    auto q = permute(r, {2, 5, 0, 3, 1, 4});  // [T,d,wy,M,wx,M]
    auto full = reshape(q, {t, d, g.hp, g.wp});
    if (g.hp != g.h) full = slice(full, 2, 0, g.h);
    if (g.wp != g.w) full = slice(full, 3, 0, g.w);
    return full;
}

// Additive key mask [nWin,1,1,T*M*M]: padded token positions get a large
// negative logit so they drop out of the softmax.
template <class T>
Tensor<T> window_pad_mask(const WindowGrid& g, std::int64_t t) {
    const std::int64_t wy = g.hp / g.m, wx = g.wp / g.m;
    const std::int64_t n = g.tokens_per_window(t);
    std::vector<T> data(wy * wx * n, T(0));
    for (std::int64_t iy = 0; iy < wy; ++iy)
        for (std::int64_t ix = 0; ix < wx; ++ix)
            for (std::int64_t ti = 0; ti < t; ++ti)
                for (std::int64_t my = 0; my < g.m; ++my)
                    for (std::int64_t mx = 0; mx < g.m; ++mx) {
                        const bool padded = iy * g.m + my >= g.h || ix * g.m + mx >= g.w;
                        if (padded)
                            data[((iy * wx + ix) * t + ti) * g.m * g.m + my * g.m + mx] =
                                T(-1e9);
                    }
    return Tensor<T>::from({wy * wx, 1, 1, n}, std::move(data));
}

// [T,d,H,W] <-> [1, T*H*W, d] token views for global attention.
template <class T>
Tensor<T> to_tokens(const Tensor<T>& x) {
    const std::int64_t t = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
    return reshape(permute(x, {0, 2, 3, 1}), {1, t * h * w, d});
}

template <class T>
Tensor<T> from_tokens(const Tensor<T>& tok, std::int64_t t, std::int64_t d, std::int64_t h,
                      std::int64_t w) {
    return permute(reshape(tok, {t, h, w, d}), {0, 3, 1, 2});
}

}  // namespace mtnet
