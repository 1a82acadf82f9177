#pragma once
// Two-stream shared-weight encoder stub: four stages at strides 4/8/16/32,
// each a downsampling conv plus two depthwise-7x7 + pointwise blocks with
// channel LN, echoing a ConvNeXt stage at toy width.

#include <array>

#include "mtnet/config.hpp"
#include "mtnet/nn.hpp"

namespace mtnet {

template <class T>
using FeaturePyramid = std::array<Tensor<T>, 4>;

template <class T>
struct EncoderBlock {
    Conv2d<T> dw;       // 7x7 depthwise
    LayerNorm<T> norm;  // over channels
    Conv2d<T> pw1, pw2;

    EncoderBlock() = default;
    EncoderBlock(Rng& rng, std::int64_t c)
        : dw(rng, c, c, 7, 1, 3, c),
          norm(c, 1),
          pw1(rng, c, 2 * c, 1, 1, 0),
          pw2(rng, 2 * c, c, 1, 1, 0) {}

    Tensor<T> forward(const Tensor<T>& x) const {
        auto h = norm.forward(dw.forward(x));
        h = pw2.forward(relu(pw1.forward(h)));
        return add(h, x);
    }

    void params(const std::string& p, ParamList<T>& out) {
        dw.params(p + ".dw", out);
        norm.params(p + ".norm", out);
        pw1.params(p + ".pw1", out);
        pw2.params(p + ".pw2", out);
    }
};

template <class T>
struct EncoderStage {
    Conv2d<T> down;
    EncoderBlock<T> b1, b2;

    EncoderStage() = default;
    EncoderStage(Rng& rng, std::int64_t cin, std::int64_t cout, std::int64_t k, std::int64_t s)
        : down(rng, cin, cout, k, s, 0), b1(rng, cout), b2(rng, cout) {}

    Tensor<T> forward(const Tensor<T>& x) const { return b2.forward(b1.forward(down.forward(x))); }

    void params(const std::string& p, ParamList<T>& out) {
        down.params(p + ".down", out);
        b1.params(p + ".b1", out);
        b2.params(p + ".b2", out);
    }
};

template <class T>
struct Backbone {
    std::array<EncoderStage<T>, 4> stages;

    Backbone() = default;
    Backbone(Rng& rng, const std::array<std::int64_t, 4>& ch) {
        stages[0] = EncoderStage<T>(rng, 3, ch[0], 4, 4);  // patchify, stride 4
        for (int k = 1; k < 4; ++k) stages[k] = EncoderStage<T>(rng, ch[k - 1], ch[k], 2, 2);
    }

    // frames [T,3,H,W], H and W multiples of 32.
    FeaturePyramid<T> encode(const Tensor<T>& frames) const {
        if (frames.rank() != 4 || frames.dim(1) != 3)
            throw std::runtime_error("encode: expected [T,3,H,W] input");
        if (frames.dim(2) % 32 != 0 || frames.dim(3) % 32 != 0)
            throw std::runtime_error("encode: H and W must be multiples of 32");
        FeaturePyramid<T> pyr;
        Tensor<T> x = frames;
        for (int k = 0; k < 4; ++k) {
            x = stages[k].forward(x);
            pyr[k] = x;
        }
        return pyr;
    }

    void params(const std::string& p, ParamList<T>& out) {
        for (int k = 0; k < 4; ++k) stages[k].params(p + ".stage" + std::to_string(k + 1), out);
    }
};

// One weight set, two passes ("universal encoder"); a separate motion stream
// exists behind a flag for ablation.
template <class T>
struct TwoStreamEncoder {
    Backbone<T> shared;
    Backbone<T> motion;  // only constructed when not shared
    bool shared_weights = true;

    TwoStreamEncoder() = default;
    TwoStreamEncoder(Rng& rng, const std::array<std::int64_t, 4>& ch, bool share)
        : shared(rng, ch), shared_weights(share) {
        if (!share) motion = Backbone<T>(rng, ch);
    }

    std::pair<FeaturePyramid<T>, FeaturePyramid<T>> encode_pair(const Tensor<T>& frames,
                                                                const Tensor<T>& flows) const {
        if (frames.shape() != flows.shape())
            throw std::runtime_error("encode_pair: frame/flow shape mismatch");
        auto a = shared.encode(frames);
        auto m = shared_weights ? shared.encode(flows) : motion.encode(flows);
        return {a, m};
    }

    void params(const std::string& p, ParamList<T>& out) {
        shared.params(p + ".enc", out);
        if (!shared_weights) motion.params(p + ".enc_motion", out);
    }
};

}  // namespace mtnet
