#include "mtnet/train.hpp"

#include <fstream>

namespace mtnet {

SyntheticClipSpec clip_spec_for(const ModelConfig& mc, const TrainConfig& tc,
                                std::uint64_t clip_index) {
    SyntheticClipSpec spec;
    // splitmix-style decorrelation of the per-clip seed from the run seed.
    std::uint64_t z = tc.seed + 0x9e3779b97f4a7c15ull * (clip_index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    spec.seed = z ^ (z >> 31);
    spec.canvas = mc.input_side;
    spec.shape = tc.object_shape;
    spec.trajectory = tc.trajectory;
    spec.velocity = tc.velocity;
    spec.distractors = tc.distractors;
    spec.noise_sigma = tc.noise_sigma;
    return spec;
}

namespace {

// Reverses the clip along time. Frame order flips and every displacement
// changes sign, which maps each flow hue to its complement; the per-frame
// flow images are recomputed from the mirrored trajectory by regenerating
// with negated velocity, so here we only flip tensor order.
Tensor<float> flip_time(const Tensor<float>& x) {
    const std::int64_t t = x.dim(0);
    const std::int64_t stride = x.numel() / t;
    std::vector<float> out(x.numel());
    const auto& v = x.values();
    for (std::int64_t k = 0; k < t; ++k)
        std::copy(v.begin() + k * stride, v.begin() + (k + 1) * stride,
                  out.begin() + (t - 1 - k) * stride);
    return Tensor<float>::from(x.shape(), std::move(out));
}

}  // namespace

TrainResult train_model(MTNet<float>& model, const ModelConfig& mc, const TrainConfig& tc,
                        const std::string& loss_csv) {
    std::ofstream csv;
    if (!loss_csv.empty()) {
        csv.open(loss_csv);
        if (!csv) throw std::runtime_error("train: cannot open '" + loss_csv + "' for writing");
        csv << "step,total,main,aux2,aux3,aux4\n";
    }

    AdamW<float> opt(model.params(), tc.lr, tc.beta1, tc.beta2, tc.weight_decay);
    Rng aug_rng(tc.seed ^ 0xa5a5a5a5a5a5a5a5ull);

    TrainResult result;
    for (std::int64_t step = 0; step < tc.steps; ++step) {
        auto spec = clip_spec_for(mc, tc, static_cast<std::uint64_t>(step));
        const bool reversed = tc.reverse_augment && aug_rng.bernoulli(0.5);
        if (reversed) spec.velocity = -spec.velocity;  // time-mirrored clip
        auto clip = make_clip(spec, mc.train_clip_len);
        Tensor<float> frames = clip.frames, flows = clip.flows, masks = clip.masks;
        if (reversed) {
            frames = flip_time(frames);
            flows = flip_time(flows);
            masks = flip_time(masks);
        }

        opt.zero_grad();
        auto logits = model.forward(frames, flows, true);
        auto [loss, rep] = bce_multilevel(logits, masks, static_cast<float>(mc.lambda));
        if (!std::isfinite(rep.total))
            throw std::runtime_error("train: diverged, non-finite loss at step " +
                                     std::to_string(step));
        backward(loss);
        opt.step();

        result.curve.push_back(rep);
        if (csv.is_open())
            csv << step << ',' << rep.total << ',' << rep.main << ',' << rep.aux[0] << ','
                << rep.aux[1] << ',' << rep.aux[2] << '\n';
    }
    return result;
}

}  // namespace mtnet
