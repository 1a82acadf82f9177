#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mtnet/backbone.hpp"

using namespace mtnet;
using testutil::rand_tensor;

namespace {
const std::array<std::int64_t, 4> kCh{4, 8, 12, 16};
}

TEST_CASE("pyramid strides are 4, 8, 16, 32") {
    Rng rng(31);
    Backbone<float> bb(rng, kCh);
    auto x = rand_tensor<float>(rng, {2, 3, 64, 96}, -1, 1, false);
    auto pyr = bb.encode(x);
    CHECK(pyr[0].shape() == Shape{2, 4, 16, 24});
    CHECK(pyr[1].shape() == Shape{2, 8, 8, 12});
    CHECK(pyr[2].shape() == Shape{2, 12, 4, 6});
    CHECK(pyr[3].shape() == Shape{2, 16, 2, 3});
}

TEST_CASE("encode validates its input") {
    Rng rng(32);
    Backbone<float> bb(rng, kCh);
    CHECK_THROWS(bb.encode(rand_tensor<float>(rng, {2, 1, 64, 64}, -1, 1, false)));
    CHECK_THROWS(bb.encode(rand_tensor<float>(rng, {2, 3, 60, 64}, -1, 1, false)));
    CHECK_THROWS(bb.encode(rand_tensor<float>(rng, {2, 3, 64}, -1, 1, false)));
}

TEST_CASE("shared encoder gives identical features for identical inputs") {
    Rng rng(33);
    TwoStreamEncoder<float> enc(rng, kCh, true);
    auto x = rand_tensor<float>(rng, {1, 3, 32, 32}, -1, 1, false);
    auto [a, m] = enc.encode_pair(x, x);
    for (int k = 0; k < 4; ++k) CHECK(testutil::max_abs_diff(a[k], m[k]) == 0.0);

    // Separate streams diverge on the same input.
    TwoStreamEncoder<float> enc2(rng, kCh, false);
    auto [a2, m2] = enc2.encode_pair(x, x);
    CHECK(testutil::max_abs_diff(a2[0], m2[0]) > 0.0);
}

TEST_CASE("shared encoder registers one weight set, separate registers two") {
    Rng rng(34);
    TwoStreamEncoder<float> shared(rng, kCh, true);
    TwoStreamEncoder<float> sep(rng, kCh, false);
    ParamList<float> ps, pd;
    shared.params("e", ps);
    sep.params("e", pd);
    CHECK(pd.size() == 2 * ps.size());
}

TEST_CASE("frames within a clip are processed independently") {
    // The encoder has no temporal mixing: per-frame outputs must not depend
    // on the other frames in the batch.
    Rng rng(35);
    Backbone<float> bb(rng, kCh);
    auto clip = rand_tensor<float>(rng, {3, 3, 32, 32}, -1, 1, false);
    auto full = bb.encode(clip);
    auto frame1 = Tensor<float>::from({1, 3, 32, 32},
                                      {clip.values().begin() + 3 * 32 * 32,
                                       clip.values().begin() + 2 * 3 * 32 * 32});
    auto solo = bb.encode(frame1);
    for (int k = 0; k < 4; ++k) {
        const std::int64_t per = full[k].numel() / 3;
        for (std::int64_t i = 0; i < per; ++i)
            CHECK(full[k].values()[per + i] == solo[k].values()[i]);
    }
}

TEST_CASE("backbone gradient flows to the first conv") {
    Rng rng(36);
    Backbone<float> bb(rng, kCh);
    auto x = rand_tensor<float>(rng, {1, 3, 32, 32}, -1, 1, false);
    auto pyr = bb.encode(x);
    auto loss = mean_all(mul(pyr[3], pyr[3]));
    backward(loss);
    double gsum = 0;
    for (float g : bb.stages[0].down.w.grad()) gsum += std::abs(g);
    CHECK(gsum > 0.0);
}
