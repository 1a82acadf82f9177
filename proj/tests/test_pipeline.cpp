#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "mtnet/flow.hpp"
#include "mtnet/pipeline.hpp"
#include "mtnet/synthetic.hpp"

using namespace mtnet;
namespace fs = std::filesystem;

namespace {

// Writes a synthetic clip as PNG frame/flow/mask directories and returns the
// root, for tests that need on-disk sequences.
fs::path write_clip_dirs(const std::string& name, std::int64_t t, std::int64_t canvas) {
    SyntheticClipSpec spec;
    spec.seed = 33;
    spec.canvas = canvas;
    spec.velocity = 2.0;
    auto clip = make_clip(spec, t);
    const fs::path root = fs::path("pipeline_test_data") / name;
    for (const char* sub : {"frames", "flows", "masks"}) fs::create_directories(root / sub);
    const std::int64_t hw = canvas * canvas;
    for (std::int64_t k = 0; k < t; ++k) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%05d.png", int(k));
        std::vector<float> fr(clip.frames.values().begin() + k * 3 * hw,
                              clip.frames.values().begin() + (k + 1) * 3 * hw);
        write_image((root / "frames" / buf).string(), float_to_image(fr, canvas, canvas, 3));
        std::vector<float> fl(clip.flows.values().begin() + k * 3 * hw,
                              clip.flows.values().begin() + (k + 1) * 3 * hw);
        write_image((root / "flows" / buf).string(), float_to_image(fl, canvas, canvas, 3));
        std::vector<float> mk(clip.masks.values().begin() + k * hw,
                              clip.masks.values().begin() + (k + 1) * hw);
        write_image((root / "masks" / buf).string(), float_to_image(mk, canvas, canvas, 1));
    }
    return root;
}

ModelConfig tiny_config(bool mtt) {
    ModelConfig mc;
    mc.stage_channels = {4, 4, 4, 4};
    mc.heads = 2;
    mc.window_m = 2;
    mc.sr_ratio3 = 1;
    mc.sr_ratio4 = 1;
    mc.input_side = 32;
    mc.mtt_enabled = mtt;
    return mc;
}

}  // namespace

TEST_CASE("clip planning covers the sequence with one trailing remainder") {
    auto p = plan_clips(100, 12);
    REQUIRE(p.clips.size() == 9);
    CHECK(p.count == 8);
    for (int c = 0; c < 8; ++c) CHECK(p.clips[c] == std::make_pair<std::int64_t, std::int64_t>(c * 12, 12));
    CHECK(p.clips[8] == std::make_pair<std::int64_t, std::int64_t>(96, 4));

    auto exact = plan_clips(12, 12);
    REQUIRE(exact.clips.size() == 1);
    CHECK(exact.clips[0] == std::make_pair<std::int64_t, std::int64_t>(0, 12));

    auto shorter = plan_clips(5, 12);
    REQUIRE(shorter.clips.size() == 1);
    CHECK(shorter.clips[0] == std::make_pair<std::int64_t, std::int64_t>(0, 5));

    CHECK_THROWS(plan_clips(0, 4));
    CHECK_THROWS(plan_clips(4, 0));
}

TEST_CASE("clip plans partition every frame exactly once") {
    Rng rng(121);
    for (int it = 0; it < 50; ++it) {
        const std::int64_t n = 1 + rng.randint(0, 199);
        const std::int64_t t = 1 + rng.randint(0, 24);
        auto p = plan_clips(n, t);
        std::int64_t next = 0;
        for (size_t c = 0; c < p.clips.size(); ++c) {
            const auto [start, len] = p.clips[c];
            CHECK(start == next);
            CHECK(len >= 1);
            CHECK(len <= t);
            if (c + 1 < p.clips.size()) CHECK(len == t);
            next = start + len;
        }
        CHECK(next == n);
    }
}

TEST_CASE("zero flow encodes as pure white") {
    auto img = encode_flow(std::vector<float>(16, 0.0f), std::vector<float>(16, 0.0f), 4, 4);
    for (auto v : img.data) CHECK(v == 255);
}

TEST_CASE("opposite displacements take complementary hues") {
    // (1,0) is hue 0 (red); (-1,0) lands half a turn away (cyan).
    auto img = encode_flow({1.0f, -1.0f}, {0.0f, 0.0f}, 2, 1);
    CHECK(img.data[0] == 255);
    CHECK(img.data[1] == 0);
    CHECK(img.data[2] == 0);
    CHECK(img.data[3] == 0);
    CHECK(img.data[4] == 255);
    CHECK(img.data[5] == 255);
}

TEST_CASE("the strongest displacement saturates fully") {
    auto img = encode_flow({1.0f, 2.0f}, {0.0f, 0.0f}, 2, 1);
    std::uint8_t full[3], half[3];
    flow_color(0.0, 1.0, full);
    flow_color(0.0, 0.5, half);
    CHECK(img.data[3] == full[0]);
    CHECK(img.data[4] == full[1]);
    CHECK(img.data[5] == full[2]);
    CHECK(img.data[0] == half[0]);
    CHECK(img.data[1] == half[1]);
    CHECK(img.data[2] == half[2]);

    CHECK_THROWS(encode_flow({1.0f}, {0.0f, 0.0f}, 2, 1));
}

TEST_CASE("sequences load with matching frame and flow counts") {
    auto root = write_clip_dirs("load", 5, 32);
    auto seq = load_sequence((root / "frames").string(), (root / "flows").string(),
                             (root / "masks").string());
    CHECK(seq.frame_paths.size() == 5);
    CHECK(seq.gt_paths.size() == 5);
    CHECK(seq.width == 32);
    CHECK(seq.height == 32);
    // Sorted by filename.
    CHECK(seq.frame_paths.front() < seq.frame_paths.back());

    fs::remove(root / "flows" / "00004.png");
    CHECK_THROWS(load_sequence((root / "frames").string(), (root / "flows").string()));
    fs::remove_all("pipeline_test_data");
}

TEST_CASE("without temporal mixing the clip length cannot change predictions") {
    auto root = write_clip_dirs("invariance", 5, 32);
    auto seq = load_sequence((root / "frames").string(), (root / "flows").string());
    Rng rng(122);
    MTNet<float> model(rng, tiny_config(false));
    auto r2 = infer_sequence(model, seq, 2);
    auto r5 = infer_sequence(model, seq, 5);
    REQUIRE(r2.soft.size() == 5);
    REQUIRE(r5.soft.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(r2.soft[k].data == r5.soft[k].data);
    fs::remove_all("pipeline_test_data");
}

TEST_CASE("with temporal mixing the clip length matters") {
    auto root = write_clip_dirs("mixing", 4, 32);
    auto seq = load_sequence((root / "frames").string(), (root / "flows").string());
    Rng rng(123);
    MTNet<float> model(rng, tiny_config(true));
    auto r2 = infer_sequence(model, seq, 2);
    auto r4 = infer_sequence(model, seq, 4);
    double diff = 0;
    for (int k = 0; k < 4; ++k)
        for (size_t i = 0; i < r2.soft[k].data.size(); ++i)
            diff = std::max(diff, std::abs(double(r2.soft[k].data[i]) - r4.soft[k].data[i]));
    CHECK(diff > 0.0);
    fs::remove_all("pipeline_test_data");
}

TEST_CASE("directory evaluation enforces its contracts") {
    auto root = write_clip_dirs("eval", 4, 32);
    CHECK_THROWS(evaluate_dirs((root / "masks").string(), (root / "masks").string(), "nope"));
    // Perfect self-evaluation.
    auto rep = evaluate_dirs((root / "masks").string(), (root / "masks").string(), "uvos");
    CHECK(rep.j_mean == doctest::Approx(1.0));
    CHECK(rep.f_mean == doctest::Approx(1.0));
    CHECK(rep.jf_mean == doctest::Approx(1.0));
    CHECK(rep.mae == doctest::Approx(0.0));

    // Stem mismatch.
    fs::rename(root / "masks" / "00003.png", root / "masks" / "zz.png");
    CHECK_THROWS(evaluate_dirs((root / "frames").string(), (root / "masks").string(), "uvos"));
    fs::remove_all("pipeline_test_data");
}

TEST_CASE("score_frames rejects mismatched counts") {
    std::vector<SaliencyMap> soft(2, SaliencyMap{2, 2, std::vector<float>(4, 0.5f)});
    std::vector<BinaryMask> masks(2, BinaryMask{2, 2, std::vector<std::uint8_t>(4, 1)});
    std::vector<BinaryMask> gt(3, BinaryMask{2, 2, std::vector<std::uint8_t>(4, 1)});
    CHECK_THROWS(score_frames(soft, masks, gt));
}

TEST_CASE("clip-length sweep needs labels and dedupes its inputs") {
    auto root = write_clip_dirs("sweep", 4, 32);
    auto unlabeled = load_sequence((root / "frames").string(), (root / "flows").string());
    Rng rng(124);
    MTNet<float> model(rng, tiny_config(false));
    CHECK_THROWS(sweep_clip_length(model, unlabeled, {2}));

    auto seq = load_sequence((root / "frames").string(), (root / "flows").string(),
                             (root / "masks").string());
    auto rows = sweep_clip_length(model, seq, {4, 2, 2});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].t == 2);
    CHECK(rows[1].t == 4);
    // No temporal mixing: identical scores at both lengths.
    CHECK(rows[0].jf_mean == rows[1].jf_mean);
    CHECK_THROWS(sweep_clip_length(model, seq, {0}));
    fs::remove_all("pipeline_test_data");
}
