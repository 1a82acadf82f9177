#pragma once
// Deterministic synthetic moving-object clips: one foreground object on a
// textured canvas with static distractors, exact masks, and flow fields equal
// to the ground-truth per-frame displacement.

#include <string>
#include <vector>

#include "mtnet/image.hpp"
#include "mtnet/tensor.hpp"

namespace mtnet {

struct SyntheticClipSpec {
    std::uint64_t seed = 7;
    std::int64_t canvas = 64;          // square side
    std::string shape = "square";      // square | disc
    std::string trajectory = "linear";
    double velocity = 4.0;             // px/frame
    std::int64_t distractors = 2;
    double noise_sigma = 0.02;
    std::int64_t object_size = 0;      // 0 -> canvas/4
};

struct Clip {
    Tensor<float> frames;  // [T,3,S,S] in [0,1]
    Tensor<float> flows;   // [T,3,S,S] color-wheel encoded
    Tensor<float> masks;   // [T,1,S,S] in {0,1}
};

Clip make_clip(const SyntheticClipSpec& spec, std::int64_t t);

// Raw per-frame binary masks, for property tests against the shift oracle.
std::vector<std::vector<std::uint8_t>> make_clip_masks(const SyntheticClipSpec& spec,
                                                       std::int64_t t);

}  // namespace mtnet
