#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "mtnet/train.hpp"

using namespace mtnet;
using testutil::rand_tensor;

namespace {

ModelConfig tiny_model_config() {
    ModelConfig mc;
    mc.stage_channels = {4, 4, 4, 4};
    mc.heads = 2;
    mc.window_m = 2;
    mc.sr_ratio3 = 1;
    mc.sr_ratio4 = 1;
    mc.input_side = 32;
    mc.clip_len = 2;
    mc.train_clip_len = 2;
    return mc;
}

}  // namespace

TEST_CASE("multi-level loss weighs the auxiliary heads by lambda") {
    Rng rng(101);
    std::array<Tensor<double>, 4> logits;
    for (auto& l : logits) l = rand_tensor<double>(rng, {1, 1, 4, 4}, -2, 2, false);
    auto g = Tensor<double>::zeros({1, 1, 4, 4});
    for (std::int64_t i = 0; i < 8; ++i) g.values()[i] = 1.0;
    auto [loss, rep] = bce_multilevel(logits, g, 0.5);
    CHECK(rep.total ==
          doctest::Approx(rep.main + 0.5 * (rep.aux[0] + rep.aux[1] + rep.aux[2])).epsilon(1e-12));
    CHECK(loss.item() == doctest::Approx(rep.total));
}

TEST_CASE("zero logits cost ln 2 per level regardless of the target") {
    std::array<Tensor<double>, 4> logits;
    for (auto& l : logits) l = Tensor<double>::zeros({2, 1, 3, 3});
    auto g = Tensor<double>::zeros({2, 1, 3, 3});
    g.values()[0] = 1.0;
    auto [loss, rep] = bce_multilevel(logits, g, 0.5);
    const double ln2 = std::log(2.0);
    CHECK(rep.main == doctest::Approx(ln2).epsilon(1e-12));
    CHECK(rep.total == doctest::Approx(2.5 * ln2).epsilon(1e-12));
}

TEST_CASE("non-binary ground truth and shape mismatch are rejected") {
    std::array<Tensor<double>, 4> logits;
    for (auto& l : logits) l = Tensor<double>::zeros({1, 1, 2, 2});
    auto g = Tensor<double>::full({1, 1, 2, 2}, 0.5);
    CHECK_THROWS_WITH_AS(bce_multilevel(logits, g, 0.5), doctest::Contains("binary"),
                         std::runtime_error);
    CHECK_THROWS(bce_multilevel(logits, Tensor<double>::zeros({1, 1, 2, 3}), 0.5));
}

TEST_CASE("loss gradient is (p - g)/N on the main head and scaled on auxiliaries") {
    Rng rng(102);
    std::array<Tensor<double>, 4> logits;
    for (auto& l : logits) l = rand_tensor<double>(rng, {1, 1, 3, 3}, -2, 2, true);
    auto g = Tensor<double>::zeros({1, 1, 3, 3});
    for (std::int64_t i = 0; i < 4; ++i) g.values()[i] = 1.0;
    auto [loss, rep] = bce_multilevel(logits, g, 0.5);
    backward(loss);
    const double n = 9.0;
    for (int k = 0; k < 4; ++k) {
        const double w = k == 0 ? 1.0 : 0.5;
        for (std::int64_t i = 0; i < 9; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-logits[k].values()[i]));
            CHECK(logits[k].grad()[i] ==
                  doctest::Approx(w * (p - g.values()[i]) / n).epsilon(1e-10));
        }
    }
}

TEST_CASE("adamw with zero decay leaves zero-gradient weights unchanged") {
    Rng rng(103);
    auto w = rand_tensor<float>(rng, {4}, -1, 1, true);
    auto before = w.values();
    ParamList<float> pl;
    pl.emplace_back("w", w);
    AdamW<float> opt(pl, 0.1, 0.9, 0.999, /*wd=*/0.0);
    opt.zero_grad();
    w.zero_grad();  // grads exist and are zero
    opt.step();
    CHECK(w.values() == before);
}

TEST_CASE("adamw requires a backward pass before stepping") {
    Rng rng(104);
    auto w = rand_tensor<float>(rng, {4}, -1, 1, true);
    ParamList<float> pl;
    pl.emplace_back("w", w);
    AdamW<float> opt(pl, 0.1);
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("before backward"), std::runtime_error);
}

TEST_CASE("adamw steps a quadratic toward its minimum") {
    auto w = Tensor<float>::full({1}, 3.0f);
    w.set_requires_grad(true);
    ParamList<float> pl;
    pl.emplace_back("w", w);
    AdamW<float> opt(pl, 0.05, 0.9, 0.999, 0.0);
    for (int it = 0; it < 50; ++it) {
        opt.zero_grad();
        auto loss = mean_all(mul(w, w));
        backward(loss);
        opt.step();
    }
    CHECK(std::abs(w.values()[0]) < 1.5f);
}

TEST_CASE("adamw matches a scalar reimplementation over ten steps") {
    auto w = Tensor<float>::from({2}, {1.5f, -0.75f});
    w.set_requires_grad(true);
    ParamList<float> pl;
    pl.emplace_back("w", w);
    const double lr = 0.03, b1 = 0.9, b2 = 0.999, wd = 0.01, eps = 1e-8;
    AdamW<float> opt(pl, lr, b1, b2, wd, eps);

    double rw[2] = {1.5, -0.75}, m[2] = {0, 0}, v[2] = {0, 0};
    for (int t = 1; t <= 10; ++t) {
        opt.zero_grad();
        auto loss = mean_all(mul(w, w));
        backward(loss);
        opt.step();
        for (int j = 0; j < 2; ++j) {
            const double g = 2.0 * rw[j] / 2.0;  // d mean(w^2)/dw
            m[j] = b1 * m[j] + (1 - b1) * g;
            v[j] = b2 * v[j] + (1 - b2) * g * g;
            const double mh = m[j] / (1 - std::pow(b1, t));
            const double vh = v[j] / (1 - std::pow(b2, t));
            rw[j] -= lr * (mh / (std::sqrt(vh) + eps) + wd * rw[j]);
        }
    }
    CHECK(w.values()[0] == doctest::Approx(rw[0]).epsilon(1e-5));
    CHECK(w.values()[1] == doctest::Approx(rw[1]).epsilon(1e-5));
}

TEST_CASE("a static clip encodes an all-white flow stream") {
    SyntheticClipSpec spec;
    spec.canvas = 32;
    spec.velocity = 0.0;
    auto clip = make_clip(spec, 3);
    for (auto v : clip.flows.values()) CHECK(v == 1.0f);
}

TEST_CASE("square object keeps a constant mask area") {
    SyntheticClipSpec spec;
    spec.canvas = 32;
    spec.velocity = 3.0;
    auto clip = make_clip(spec, 4);
    const std::int64_t per = 32 * 32;
    for (int k = 0; k < 4; ++k) {
        double area = 0;
        for (std::int64_t i = 0; i < per; ++i) area += clip.masks.values()[k * per + i];
        CHECK(area == doctest::Approx(8.0 * 8.0));
    }
}

TEST_CASE("linear masks obey the integer shift oracle") {
    SyntheticClipSpec spec;
    spec.canvas = 32;
    spec.velocity = 4.0;
    auto masks = make_clip_masks(spec, 3);
    const std::int64_t s = 32;
    for (int k = 1; k < 3; ++k)
        for (std::int64_t y = 0; y < s; ++y)
            for (std::int64_t x = 4; x < s; ++x)
                CHECK(masks[k][y * s + x] == masks[k - 1][y * s + x - 4]);
}

TEST_CASE("impossible trajectories are rejected") {
    SyntheticClipSpec spec;
    spec.canvas = 32;
    spec.velocity = 30.0;
    CHECK_THROWS_WITH_AS(make_clip(spec, 4), doctest::Contains("exits canvas"),
                         std::runtime_error);
    spec.velocity = 1.0;
    spec.object_size = 40;
    CHECK_THROWS(make_clip(spec, 2));
}

TEST_CASE("training runs, logs the curve, and stays finite") {
    Rng rng(105);
    auto mc = tiny_model_config();
    TrainConfig tc;
    tc.steps = 3;
    tc.seed = 11;
    MTNet<float> model(rng, mc);
    const std::string csv = "train_curve_test.csv";
    auto res = train_model(model, mc, tc, csv);
    REQUIRE(res.curve.size() == 3);
    for (const auto& rep : res.curve) {
        CHECK(std::isfinite(rep.total));
        CHECK(rep.total >= 0.0);
    }

    std::ifstream is(csv);
    REQUIRE(bool(is));
    std::string line;
    std::getline(is, line);
    CHECK(line == "step,total,main,aux2,aux3,aux4");
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
    is.close();
    std::remove(csv.c_str());
}

TEST_CASE("same seed trains to bit-identical weights") {
    auto mc = tiny_model_config();
    TrainConfig tc;
    tc.steps = 2;
    tc.seed = 19;
    Rng r1(55), r2(55);
    MTNet<float> a(r1, mc), b(r2, mc);
    train_model(a, mc, tc);
    train_model(b, mc, tc);
    auto pa = a.params(), pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i].first == pb[i].first);
        CHECK(pa[i].second.values() == pb[i].second.values());
    }
}

TEST_CASE("per-clip seeds decorrelate consecutive steps") {
    auto mc = tiny_model_config();
    TrainConfig tc;
    auto s0 = clip_spec_for(mc, tc, 0), s1 = clip_spec_for(mc, tc, 1);
    CHECK(s0.seed != s1.seed);
    CHECK(s0.canvas == mc.input_side);
}
