#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mtnet/mtt.hpp"

using namespace mtnet;
using testutil::rand_tensor;

namespace {

template <class T>
void zero_fill(Tensor<T>& t) {
    std::fill(t.values().begin(), t.values().end(), T(0));
}

}  // namespace

TEST_CASE("windowed attention with a full-size window equals dense attention") {
    Rng rng(71);
    MixedBlock<double> mb(rng, 8, 2, /*m=*/4, /*r=*/1);
    auto x = rand_tensor<double>(rng, {1, 8, 4, 4}, -1, 1, false);
    auto local = mb.lttl(x);
    auto tok = to_tokens(x);
    auto dense = from_tokens(mb.local_attn.forward(tok, tok), 1, 8, 4, 4);
    CHECK(testutil::max_abs_diff(local, dense) < 1e-5);
}

TEST_CASE("windowed attention equals dense attention under the window mask") {
    Rng rng(72);
    const std::int64_t t = 2, d = 8, h = 4, w = 4, m = 2;
    MixedBlock<double> mb(rng, d, 2, m, 1);
    auto x = rand_tensor<double>(rng, {t, d, h, w}, -1, 1, false);
    auto local = mb.lttl(x);

    // Dense attention over all T*H*W tokens with -1e9 between distinct windows.
    const std::int64_t n = t * h * w;
    std::vector<double> mask_data(n * n, 0.0);
    auto win_of = [&](std::int64_t idx) {
        const std::int64_t y = (idx / w) % h, xw = idx % w;
        return (y / m) * (w / m) + (xw / m);
    };
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            if (win_of(i) != win_of(j)) mask_data[i * n + j] = -1e9;
    auto mask = Tensor<double>::from({1, 1, n, n}, std::move(mask_data));
    auto tok = to_tokens(x);
    auto dense = from_tokens(mb.local_attn.forward(tok, tok, mask), t, d, h, w);
    CHECK(testutil::max_abs_diff(local, dense) < 1e-5);
}

TEST_CASE("global attention with unit reduction equals dense attention") {
    Rng rng(73);
    MixedBlock<double> mb(rng, 8, 2, 2, /*r=*/1);
    auto x = rand_tensor<double>(rng, {2, 8, 4, 4}, -1, 1, false);
    auto g = mb.gttl(x);
    auto tok = to_tokens(x);
    auto dense = from_tokens(mb.global_attn.forward(tok, tok), 2, 8, 4, 4);
    CHECK(testutil::max_abs_diff(g, dense) < 1e-5);
}

TEST_CASE("reduced keys count T*H*W/r^2 tokens") {
    Rng rng(74);
    const std::int64_t t = 2, d = 8, h = 8, w = 8, r = 2;
    MixedBlock<float> mb(rng, d, 2, 4, r);
    auto x = rand_tensor<float>(rng, {t, d, h, w}, -1, 1, false);
    AttnMultCounter::enabled = true;
    AttnMultCounter::reset();
    mb.gttl(x);
    AttnMultCounter::enabled = false;
    const std::uint64_t nq = t * h * w, nk = t * (h / r) * (w / r);
    CHECK(AttnMultCounter::mults == 2 * nq * nk * d);
    CHECK_THROWS(mb.gttl(rand_tensor<float>(rng, {t, d, 5, 5}, -1, 1, false)));
}

TEST_CASE("constant input with zero biases yields spatially constant global output") {
    Rng rng(75);
    MixedBlock<float> mb(rng, 8, 2, 2, 2);
    zero_fill(mb.sr_conv.b);
    auto x = Tensor<float>::full({2, 8, 4, 4}, 0.6f);
    auto g = mb.gttl(x);
    for (std::int64_t c = 0; c < 8; ++c) {
        const float ref = g.values()[c * 16];
        for (std::int64_t i = 0; i < 16; ++i)
            CHECK(g.values()[c * 16 + i] == doctest::Approx(ref).epsilon(1e-5));
    }
}

TEST_CASE("zeroed value path and FFN reduce the block to identity") {
    Rng rng(76);
    MixedBlock<float> mb(rng, 8, 2, 2, 2);
    for (auto* t : {&mb.local_attn.wv.w, &mb.local_attn.wv.b, &mb.local_attn.wo.b,
                    &mb.global_attn.wv.w, &mb.global_attn.wv.b, &mb.global_attn.wo.b,
                    &mb.ffn1.fc2.w, &mb.ffn1.fc2.b, &mb.ffn2.fc2.w, &mb.ffn2.fc2.b})
        zero_fill(*t);
    auto x = rand_tensor<float>(rng, {2, 8, 4, 4}, -1, 1, false);
    auto y = mb.forward(x);
    CHECK(testutil::max_abs_diff(y, x) < 1e-6);
}

TEST_CASE("window locality: perturbations outside a window do not leak in") {
    Rng rng(77);
    MixedBlock<float> mb(rng, 8, 2, 2, 1);
    auto x = rand_tensor<float>(rng, {1, 8, 4, 4}, -1, 1, false);
    auto base = mb.lttl(x);
    // Perturb pixel (3,3) (bottom-right window); the top-left window's
    // outputs must be bit-identical.
    auto x2 = x.detach();
    for (std::int64_t c = 0; c < 8; ++c) x2.values()[c * 16 + 15] += 1.0f;
    auto pert = mb.lttl(x2);
    for (std::int64_t c = 0; c < 8; ++c)
        for (std::int64_t y = 0; y < 2; ++y)
            for (std::int64_t xx = 0; xx < 2; ++xx)
                CHECK(base.values()[c * 16 + y * 4 + xx] == pert.values()[c * 16 + y * 4 + xx]);
}

TEST_CASE("global attention has a global receptive field") {
    Rng rng(78);
    MixedBlock<float> mb(rng, 8, 2, 2, 2);
    auto x = rand_tensor<float>(rng, {1, 8, 4, 4}, -1, 1, false);
    auto base = mb.gttl(x);
    auto x2 = x.detach();
    x2.values()[0] += 1.0f;  // single position, single channel
    auto pert = mb.gttl(x2);
    std::int64_t changed = 0;
    for (std::int64_t i = 0; i < base.numel(); ++i)
        changed += base.values()[i] != pert.values()[i];
    CHECK(changed > base.numel() / 2);
}

TEST_CASE("frame swap equivariance (no positional encoding)") {
    Rng rng(79);
    MixedBlock<double> mb(rng, 8, 2, 2, 2);
    auto x = rand_tensor<double>(rng, {2, 8, 4, 4}, -1, 1, false);
    auto y = mb.forward(x);
    auto flip = [](const Tensor<double>& t) {
        auto o = t.detach();
        const std::int64_t per = t.numel() / 2;
        std::copy(t.values().begin(), t.values().begin() + per, o.values().begin() + per);
        std::copy(t.values().begin() + per, t.values().end(), o.values().begin());
        return o;
    };
    auto y2 = mb.forward(flip(x));
    CHECK(testutil::max_abs_diff(y2, flip(y)) < 1e-9);
}

TEST_CASE("block preserves shape and stacks") {
    Rng rng(80);
    MixedTemporalTransformer<float> mtt(rng, 8, 2, 3, 2, 2);
    auto x = rand_tensor<float>(rng, {2, 8, 6, 6}, -1, 1, false);  // pads to 6 -> windows of 3
    auto y = mtt.forward(x);
    CHECK(y.shape() == x.shape());
}

TEST_CASE("mixed block gradient passes finite differences") {
    Rng rng(81);
    MixedBlock<double> mb(rng, 8, 2, 2, 2);
    auto x = rand_tensor<double>(rng, {2, 8, 4, 4});
    auto fn = [&]() {
        auto y = mb.forward(x);
        return mean_all(mul(y, y));
    };
    auto res = testutil::check_gradients(
        fn, {x, mb.local_attn.wq.w, mb.global_attn.wk.w, mb.sr_conv.w, mb.ffn1.fc1.w,
             mb.ln1.gamma},
        rng, 4);
    CHECK(res.max_rel_err < 1e-3);
}
