#pragma once
// Bi-modal Fusion Module: gated per-channel re-weighting of the appearance
// and motion streams followed by a co-channel / co-spatial attention blend.
// Frames are independent; there is no temporal mixing here.

#include "mtnet/nn.hpp"

namespace mtnet {

template <class T>
struct BFM {
    std::int64_t channels = 0;
    Conv2d<T> conv_s_a, conv_s_m;  // 3x3, C -> C/2
    Conv2d<T> conv_fuse;           // 1x1, C -> 2C, so the split gates carry C channels each
    Conv2d<T> fc1, fc2;            // channel-attention bottleneck, shared by avg/max paths
    Conv2d<T> conv_spatial;        // 7x7 over [mean,max] maps

    BFM() = default;
    BFM(Rng& rng, std::int64_t c)
        : channels(c),
          conv_s_a(rng, c, c / 2, 3, 1, 1),
          conv_s_m(rng, c, c / 2, 3, 1, 1),
          conv_fuse(rng, c, 2 * c, 1, 1, 0),
          fc1(rng, 2 * c, std::max<std::int64_t>(1, 2 * c / 4), 1, 1, 0),
          fc2(rng, std::max<std::int64_t>(1, 2 * c / 4), 2 * c, 1, 1, 0),
          conv_spatial(rng, 2, 1, 7, 1, 3) {}

    // Split -> sigmoid -> GAP path producing the per-frame per-channel gates.
    std::pair<Tensor<T>, Tensor<T>> gates(const Tensor<T>& a, const Tensor<T>& m) const {
        auto f = conv_fuse.forward(concat<T>({conv_s_a.forward(a), conv_s_m.forward(m)}, 1));
        auto halves = split(f, 1, 2);
        auto g_a = global_avg_pool(sigmoid(halves[0]));
        auto g_m = global_avg_pool(sigmoid(halves[1]));
        return {g_a, g_m};
    }

    std::pair<Tensor<T>, Tensor<T>> gate_unit(const Tensor<T>& a, const Tensor<T>& m) const {
        if (a.shape() != m.shape())
            throw std::runtime_error("bfm: appearance/motion shape mismatch");
        auto [g_a, g_m] = gates(a, m);
        return {mul(g_a, a), mul(g_m, m)};
    }

    // Shared two-layer bottleneck on avg- and max-pooled descriptors, summed.
    Tensor<T> co_channel_attention(const Tensor<T>& r) const {
        auto avg = fc2.forward(relu(fc1.forward(global_avg_pool(r))));
        auto mx = fc2.forward(relu(fc1.forward(global_max_pool(r))));
        return add(avg, mx);  // [T,2C,1,1]
    }

    Tensor<T> co_spatial_attention(const Tensor<T>& r) const {
        auto desc = concat<T>({reduce_mean(r, 1), reduce_max(r, 1)}, 1);
        return conv_spatial.forward(desc);  // [T,1,H,W]
    }

    Tensor<T> forward(const Tensor<T>& a, const Tensor<T>& m) const {
        auto [a_hat, m_hat] = gate_unit(a, m);
        auto r = concat<T>({a_hat, m_hat}, 1);
        auto r_hat = sigmoid(add(co_channel_attention(r), co_spatial_attention(r)));
        // First C channels of the joint map gate the blend.
        auto g = slice(r_hat, 1, 0, channels);
        auto one_minus_g = add_const(scale(g, T(-1)), T(1));
        return add(mul(g, a_hat), mul(one_minus_g, m_hat));
    }

    void params(const std::string& p, ParamList<T>& out) {
        conv_s_a.params(p + ".conv_s_a", out);
        conv_s_m.params(p + ".conv_s_m", out);
        conv_fuse.params(p + ".conv_fuse", out);
        fc1.params(p + ".fc1", out);
        fc2.params(p + ".fc2", out);
        conv_spatial.params(p + ".conv_spatial", out);
    }
};

}  // namespace mtnet
