#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mtnet/ctd.hpp"

using namespace mtnet;
using testutil::rand_tensor;

namespace {

const std::array<std::int64_t, 4> kCh{4, 8, 12, 16};

std::array<Tensor<float>, 4> make_pyramid(Rng& rng, std::int64_t t = 2) {
    return {rand_tensor<float>(rng, {t, kCh[0], 16, 16}, -1, 1, false),
            rand_tensor<float>(rng, {t, kCh[1], 8, 8}, -1, 1, false),
            rand_tensor<float>(rng, {t, kCh[2], 4, 4}, -1, 1, false),
            rand_tensor<float>(rng, {t, kCh[3], 2, 2}, -1, 1, false)};
}

}  // namespace

TEST_CASE("decode preserves per-level shapes") {
    Rng rng(91);
    CascadedDecoder<float> dec(rng, kCh, false);
    auto f = make_pyramid(rng);
    auto out = dec.decode_pyramid(f, false);
    for (int k = 0; k < 4; ++k) CHECK(out[k].shape() == f[k].shape());
}

TEST_CASE("cascade runs strictly deep to shallow") {
    Rng rng(92);
    CascadedDecoder<float> dec(rng, kCh, false);
    auto f = make_pyramid(rng);
    auto base = dec.decode_pyramid(f, false);

    // Perturbing the shallowest stage must leave every deeper output
    // bit-identical.
    auto f2 = f;
    f2[0] = f[0].detach();
    f2[0].values()[7] += 1.0f;
    auto pert = dec.decode_pyramid(f2, false);
    for (int k = 1; k < 4; ++k)
        CHECK(testutil::max_abs_diff(pert[k], base[k]) == 0.0);
    CHECK(testutil::max_abs_diff(pert[0], base[0]) > 0.0);

    // Perturbing the deepest stage reaches every output.
    auto f3 = f;
    f3[3] = f[3].detach();
    f3[3].values()[0] += 1.0f;
    auto pert3 = dec.decode_pyramid(f3, false);
    for (int k = 0; k < 4; ++k)
        CHECK(testutil::max_abs_diff(pert3[k], base[k]) > 0.0);
}

TEST_CASE("deep-feature presence is validated") {
    Rng rng(93);
    DecoderLevel<float> with_deep(rng, 8, 16, false);
    DecoderLevel<float> without(rng, 8, 0, false);
    auto shal = rand_tensor<float>(rng, {1, 8, 8, 8}, -1, 1, false);
    auto deep = rand_tensor<float>(rng, {1, 16, 4, 4}, -1, 1, false);
    CHECK_THROWS(with_deep.forward(shal, std::nullopt, false));
    CHECK_THROWS(without.forward(shal, deep, false));
    // Deep feature must sit exactly one pyramid level down.
    auto deep_bad = rand_tensor<float>(rng, {1, 16, 8, 8}, -1, 1, false);
    CHECK_THROWS(with_deep.forward(shal, deep_bad, false));
}

TEST_CASE("squeeze-excite with saturated gates passes the input through") {
    Rng rng(94);
    SEBlock<float> se(rng, 8);
    std::fill(se.fc2.w.values().begin(), se.fc2.w.values().end(), 0.0f);
    std::fill(se.fc2.b.values().begin(), se.fc2.b.values().end(), 50.0f);  // sigmoid -> 1
    auto x = rand_tensor<float>(rng, {2, 8, 4, 4}, -1, 1, false);
    CHECK(testutil::max_abs_diff(se.forward(x), x) < 1e-6);
}

TEST_CASE("squeeze-excite scales each channel by its gate") {
    Rng rng(95);
    SEBlock<float> se(rng, 4);
    auto x = rand_tensor<float>(rng, {1, 4, 3, 3}, -1, 1, false);
    auto y = se.forward(x);
    auto gate = sigmoid(se.fc2.forward(relu(se.fc1.forward(global_avg_pool(x)))));
    for (std::int64_t c = 0; c < 4; ++c)
        for (std::int64_t i = 0; i < 9; ++i)
            CHECK(y.values()[c * 9 + i] ==
                  doctest::Approx(gate.values()[c] * x.values()[c * 9 + i]));
}

TEST_CASE("mask heads emit one upsampled logit map per level") {
    Rng rng(96);
    CascadedDecoder<float> dec(rng, kCh, false);
    auto f = make_pyramid(rng, 3);
    auto out = dec.decode_pyramid(f, false);
    auto logits = dec.predict_masks(out, 64, 64);
    for (int k = 0; k < 4; ++k) CHECK(logits[k].shape() == Shape{3, 1, 64, 64});
    CHECK_THROWS(dec.predict_masks(out, 60, 64));  // 60 not a multiple of 8
    CHECK_THROWS(dec.predict_masks(out, 64, 32));  // anisotropic
}

TEST_CASE("binarize thresholds at one half, ties to background") {
    std::vector<float> p{0.0f, 0.4999f, 0.5f, 0.5001f, 1.0f};
    auto b = binarize(p);
    CHECK(b == std::vector<std::uint8_t>{0, 0, 0, 1, 1});
}

TEST_CASE("layer-norm variant runs without batch statistics") {
    Rng rng(97);
    CascadedDecoder<float> dec(rng, kCh, true);
    auto f = make_pyramid(rng);
    auto a = dec.decode_pyramid(f, true);
    auto b = dec.decode_pyramid(f, false);
    // LN has no train/eval split, so the two passes agree exactly.
    for (int k = 0; k < 4; ++k) CHECK(testutil::max_abs_diff(a[k], b[k]) == 0.0);
}

TEST_CASE("decoder level gradient passes finite differences") {
    Rng rng(98);
    DecoderLevel<double> lvl(rng, 4, 8, true);
    auto shal = rand_tensor<double>(rng, {1, 4, 4, 4});
    auto deep = rand_tensor<double>(rng, {1, 8, 2, 2});
    auto fn = [&]() {
        auto y = lvl.forward(shal, deep, true);
        return mean_all(mul(y, y));
    };
    auto res = testutil::check_gradients(
        fn, {shal, deep, lvl.dw_fuse.dw.w, lvl.align.w, lvl.se.fc1.w, lvl.ffn1.w}, rng, 4);
    CHECK(res.max_rel_err < 1e-3);
}
