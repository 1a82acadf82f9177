#pragma once
// Full network assembly: two-stream encoder, per-stage bi-modal fusion,
// mixed temporal transformers on the two deepest stages, cascaded decoder,
// four logit maps at input resolution.

#include "mtnet/backbone.hpp"
#include "mtnet/bfm.hpp"
#include "mtnet/ctd.hpp"
#include "mtnet/mtt.hpp"

namespace mtnet {

template <class T>
struct MTNet {
    ModelConfig cfg;
    TwoStreamEncoder<T> encoder;
    std::array<BFM<T>, 4> fuse;
    MixedTemporalTransformer<T> mtt3, mtt4;
    CascadedDecoder<T> decoder;

    MTNet() = default;
    explicit MTNet(Rng& rng, const ModelConfig& c) : cfg(c) {
        cfg.validate();
        encoder = TwoStreamEncoder<T>(rng, cfg.stage_channels, cfg.shared_encoder);
        for (int k = 0; k < 4; ++k) fuse[k] = BFM<T>(rng, cfg.stage_channels[k]);
        if (cfg.mtt_enabled) {
            mtt3 = MixedTemporalTransformer<T>(rng, cfg.stage_channels[2], cfg.heads,
                                               cfg.window_m, cfg.sr_ratio3, cfg.mtt_depth);
            mtt4 = MixedTemporalTransformer<T>(rng, cfg.stage_channels[3], cfg.heads,
                                               cfg.window_m, cfg.sr_ratio4, cfg.mtt_depth);
        }
        decoder = CascadedDecoder<T>(rng, cfg.stage_channels, cfg.decoder_norm == "ln");
    }

    // frames/flows [T,3,S,S] -> four logit maps [T,1,S,S], index 0 is the
    // primary output.
    std::array<Tensor<T>, 4> forward(const Tensor<T>& frames, const Tensor<T>& flows,
                                     bool training) {
        auto [app, mot] = encoder.encode_pair(frames, flows);
        std::array<Tensor<T>, 4> fused;
        for (int k = 0; k < 4; ++k) fused[k] = fuse[k].forward(app[k], mot[k]);
        if (cfg.mtt_enabled) {
            fused[2] = mtt3.forward(fused[2]);
            fused[3] = mtt4.forward(fused[3]);
        }
        auto refined = decoder.decode_pyramid(fused, training);
        return decoder.predict_masks(refined, frames.dim(2), frames.dim(3));
    }

    // Probabilities of the primary head only, detached.
    Tensor<T> predict(const Tensor<T>& frames, const Tensor<T>& flows) {
        auto logits = forward(frames, flows, false);
        return sigmoid(logits[0].detach());
    }

    ParamList<T> params() {
        ParamList<T> out;
        encoder.params("encoder", out);
        for (int k = 0; k < 4; ++k) fuse[k].params("bfm" + std::to_string(k + 1), out);
        if (cfg.mtt_enabled) {
            mtt3.params("mtt3", out);
            mtt4.params("mtt4", out);
        }
        decoder.params("decoder", out);
        return out;
    }
};

}  // namespace mtnet
