#pragma once
// Cascaded decoder: per-level depthwise-conv refinement with SE channel
// attention and an FFN residual, chained strictly deep-to-shallow, plus the
// per-level 1x1 mask heads.

#include <array>
#include <optional>

#include "mtnet/nn.hpp"

namespace mtnet {

template <class T>
struct SEBlock {
    Conv2d<T> fc1, fc2;  // bottleneck ratio 4

    SEBlock() = default;
    SEBlock(Rng& rng, std::int64_t c)
        : fc1(rng, c, std::max<std::int64_t>(1, c / 4), 1, 1, 0),
          fc2(rng, std::max<std::int64_t>(1, c / 4), c, 1, 1, 0) {}

    Tensor<T> forward(const Tensor<T>& x) const {
        auto s = sigmoid(fc2.forward(relu(fc1.forward(global_avg_pool(x)))));
        return mul(s, x);
    }

    void params(const std::string& p, ParamList<T>& out) {
        fc1.params(p + ".fc1", out);
        fc2.params(p + ".fc2", out);
    }
};

// Depthwise 7x7 followed by a norm (BN by default, channel-LN behind the
// config flag) and ReLU.
template <class T>
struct DWConvBlock {
    Conv2d<T> dw;
    BatchNorm2d<T> bn;
    LayerNorm<T> ln;
    bool use_ln = false;

    DWConvBlock() = default;
    DWConvBlock(Rng& rng, std::int64_t c, bool layer_norm)
        : dw(rng, c, c, 7, 1, 3, c), use_ln(layer_norm) {
        if (layer_norm) ln = LayerNorm<T>(c, 1); else bn = BatchNorm2d<T>(c);
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        auto h = dw.forward(x);
        h = use_ln ? ln.forward(h) : bn.forward(h, training);
        return relu(h);
    }

    void params(const std::string& p, ParamList<T>& out) {
        dw.params(p + ".dw", out);
        if (use_ln) ln.params(p + ".ln", out); else bn.params(p + ".bn", out);
    }
};

template <class T>
struct DecoderLevel {
    std::int64_t channels = 0;
    DWConvBlock<T> dw_shallow, dw_fuse;
    SEBlock<T> se;
    Conv2d<T> align;  // 1x1 C_deep -> C_shal; absent at the deepest level
    bool has_deep = false;
    LayerNorm<T> ffn_norm;
    Conv2d<T> ffn1, ffn2;

    DecoderLevel() = default;
    DecoderLevel(Rng& rng, std::int64_t c_shal, std::int64_t c_deep, bool layer_norm)
        : channels(c_shal),
          dw_shallow(rng, c_shal, layer_norm),
          dw_fuse(rng, c_shal, layer_norm),
          se(rng, c_shal),
          has_deep(c_deep > 0),
          ffn_norm(c_shal, 1),
          ffn1(rng, c_shal, 4 * c_shal, 1, 1, 0),
          ffn2(rng, 4 * c_shal, c_shal, 1, 1, 0) {
        if (has_deep) align = Conv2d<T>(rng, c_deep, c_shal, 1, 1, 0);
    }

    Tensor<T> forward(const Tensor<T>& f_shal, const std::optional<Tensor<T>>& f_deep,
                      bool training) {
        if (has_deep != f_deep.has_value())
            throw std::runtime_error("decode_level: deep-feature presence mismatch");
        auto fs = se.forward(dw_shallow.forward(f_shal, training));
        Tensor<T> m = fs;
        if (f_deep) {
            if (f_deep->dim(2) * 2 != f_shal.dim(2) || f_deep->dim(3) * 2 != f_shal.dim(3))
                throw std::runtime_error(
                    "decode_level: deep feature must be at half the shallow extent");
            auto up = upsample_bilinear(align.forward(*f_deep), 2);
            m = add(up, fs);
        }
        auto f = add(dw_fuse.forward(m, training), f_shal);
        return add(ffn2.forward(relu(ffn1.forward(ffn_norm.forward(f)))), f);
    }

    void params(const std::string& p, ParamList<T>& out) {
        dw_shallow.params(p + ".dw_shallow", out);
        dw_fuse.params(p + ".dw_fuse", out);
        se.params(p + ".se", out);
        if (has_deep) align.params(p + ".align", out);
        ffn_norm.params(p + ".ffn_norm", out);
        ffn1.params(p + ".ffn1", out);
        ffn2.params(p + ".ffn2", out);
    }
};

template <class T>
struct CascadedDecoder {
    std::array<DecoderLevel<T>, 4> levels;  // index k-1
    std::array<Conv2d<T>, 4> heads;         // 1x1 -> 1 logit channel

    CascadedDecoder() = default;
    CascadedDecoder(Rng& rng, const std::array<std::int64_t, 4>& ch, bool layer_norm) {
        levels[3] = DecoderLevel<T>(rng, ch[3], 0, layer_norm);
        for (int k = 2; k >= 0; --k)
            levels[k] = DecoderLevel<T>(rng, ch[k], ch[k + 1], layer_norm);
        for (int k = 0; k < 4; ++k) heads[k] = Conv2d<T>(rng, ch[k], 1, 1, 1, 0);
    }

    // Deep-to-shallow cascade: out[3] depends only on in[3]; out[0] on all.
    std::array<Tensor<T>, 4> decode_pyramid(const std::array<Tensor<T>, 4>& f, bool training) {
        std::array<Tensor<T>, 4> out;
        out[3] = levels[3].forward(f[3], std::nullopt, training);
        for (int k = 2; k >= 0; --k) out[k] = levels[k].forward(f[k], out[k + 1], training);
        return out;
    }

    // Four full-resolution logit maps [T,1,out_h,out_w].
    std::array<Tensor<T>, 4> predict_masks(const std::array<Tensor<T>, 4>& fhat,
                                           std::int64_t out_h, std::int64_t out_w) const {
        std::array<Tensor<T>, 4> logits;
        for (int k = 0; k < 4; ++k) {
            const std::int64_t h = fhat[k].dim(2), w = fhat[k].dim(3);
            if (out_h < h || out_w < w || out_h % h != 0 || out_w % w != 0)
                throw std::runtime_error("predict_masks: output extent must be a multiple of the stage extent");
            const std::int64_t scale = out_h / h;
            if (out_w / w != scale)
                throw std::runtime_error("predict_masks: anisotropic scale not supported");
            logits[k] = upsample_bilinear(heads[k].forward(fhat[k]), scale);
        }
        return logits;
    }

    void params(const std::string& p, ParamList<T>& out) {
        for (int k = 0; k < 4; ++k) {
            levels[k].params(p + ".level" + std::to_string(k + 1), out);
            heads[k].params(p + ".head" + std::to_string(k + 1), out);
        }
    }
};

// Threshold at 0.5; the tie p == 0.5 goes to background.
template <class T>
std::vector<std::uint8_t> binarize(const std::vector<T>& probs) {
    std::vector<std::uint8_t> out(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > T(0.5) ? 1 : 0;
    return out;
}

}  // namespace mtnet
