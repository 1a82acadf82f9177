#pragma once
// Mixed Temporal Transformer: a local windowed spatio-temporal attention
// layer followed by a global layer whose keys/values are spatially reduced
// per frame, each with a pre-norm FFN residual.

#include "mtnet/attention.hpp"

namespace mtnet {

// 1x1-conv FFN on [T,d,H,W], expand 4x.
template <class T>
struct ConvFFN {
    Conv2d<T> fc1, fc2;

    ConvFFN() = default;
    ConvFFN(Rng& rng, std::int64_t d, std::int64_t expand = 4)
        : fc1(rng, d, d * expand, 1, 1, 0), fc2(rng, d * expand, d, 1, 1, 0) {}

    Tensor<T> forward(const Tensor<T>& x) const { return fc2.forward(relu(fc1.forward(x))); }

    void params(const std::string& p, ParamList<T>& out) {
        fc1.params(p + ".fc1", out);
        fc2.params(p + ".fc2", out);
    }
};

template <class T>
struct MixedBlock {
    std::int64_t dim = 0, window_m = 1, sr_ratio = 1;
    LayerNorm<T> ln1, ln2, ln3, ln4;  // channel-axis LN == per-token LN
    MultiHeadAttention<T> local_attn, global_attn;
    ConvFFN<T> ffn1, ffn2;
    Conv2d<T> sr_conv;     // kernel = stride = r, per-frame
    LayerNorm<T> sr_norm;

    MixedBlock() = default;
    MixedBlock(Rng& rng, std::int64_t d, std::int64_t heads, std::int64_t m, std::int64_t r)
        : dim(d),
          window_m(m),
          sr_ratio(r),
          ln1(d, 1),
          ln2(d, 1),
          ln3(d, 1),
          ln4(d, 1),
          local_attn(rng, d, heads),
          global_attn(rng, d, heads),
          ffn1(rng, d),
          ffn2(rng, d) {
        if (r > 1) {
            sr_conv = Conv2d<T>(rng, d, d, r, r, 0);
            sr_norm = LayerNorm<T>(d, 1);
        }
    }

    // Windowed spatio-temporal multi-head self-attention; padded positions
    // are masked out of the softmax and cropped from the result.
    Tensor<T> lttl(const Tensor<T>& x) const {
        const std::int64_t t = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
        auto grid = make_window_grid(h, w, window_m);
        auto tok = window_partition(x, grid);
        Tensor<T> mask;
        if (grid.hp != h || grid.wp != w) mask = window_pad_mask<T>(grid, t);
        auto out = local_attn.forward(tok, tok, mask);
        return window_unpartition(out, grid, t, d);
    }

    // Full-query attention against per-frame spatially reduced keys/values.
    Tensor<T> gttl(const Tensor<T>& x) const {
        const std::int64_t t = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
        auto q = to_tokens(x);
        Tensor<T> kv = q;
        if (sr_ratio > 1) {
            if (h % sr_ratio != 0 || w % sr_ratio != 0)
                throw std::runtime_error("gttl: sr ratio must divide the spatial extents");
            auto red = sr_norm.forward(sr_conv.forward(x));  // [T,d,H/r,W/r]
            kv = to_tokens(red);
        }
        auto out = global_attn.forward(q, kv);
        return from_tokens(out, t, d, h, w);
    }

    Tensor<T> forward(const Tensor<T>& b) const {
        auto l = add(lttl(ln1.forward(b)), b);
        auto lp = add(ffn1.forward(ln2.forward(l)), l);
        auto g = add(gttl(ln3.forward(lp)), lp);
        return add(ffn2.forward(ln4.forward(g)), g);
    }

    void params(const std::string& p, ParamList<T>& out) {
        ln1.params(p + ".ln1", out);
        ln2.params(p + ".ln2", out);
        ln3.params(p + ".ln3", out);
        ln4.params(p + ".ln4", out);
        local_attn.params(p + ".local", out);
        global_attn.params(p + ".global", out);
        ffn1.params(p + ".ffn1", out);
        ffn2.params(p + ".ffn2", out);
        if (sr_ratio > 1) {
            sr_conv.params(p + ".sr_conv", out);
            sr_norm.params(p + ".sr_norm", out);
        }
    }
};

// Stack of mixed blocks for one pyramid stage.
template <class T>
struct MixedTemporalTransformer {
    std::vector<MixedBlock<T>> blocks;

    MixedTemporalTransformer() = default;
    MixedTemporalTransformer(Rng& rng, std::int64_t d, std::int64_t heads, std::int64_t m,
                             std::int64_t r, std::int64_t depth) {
        for (std::int64_t i = 0; i < depth; ++i) blocks.emplace_back(rng, d, heads, m, r);
    }

    Tensor<T> forward(Tensor<T> x) const {
        for (const auto& b : blocks) x = b.forward(x);
        return x;
    }

    void params(const std::string& p, ParamList<T>& out) {
        for (size_t i = 0; i < blocks.size(); ++i)
            blocks[i].params(p + ".block" + std::to_string(i), out);
    }
};

}  // namespace mtnet
