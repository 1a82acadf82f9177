// Command-line front end: train, infer, eval, make-data, sweep.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mtnet/checkpoint.hpp"
#include "mtnet/pipeline.hpp"
#include "mtnet/train.hpp"

namespace fs = std::filesystem;
using namespace mtnet;

namespace {

struct Configs {
    ModelConfig mc;
    TrainConfig tc;
};

Configs load_configs(const std::string& path) {
    Configs c;
    if (!path.empty()) {
        auto kv = parse_kv_file(path);
        apply_model_config(c.mc, kv);
        apply_train_config(c.tc, kv);
    } else {
        c.mc.validate();
    }
    return c;
}

MTNet<float> build_model(const ModelConfig& mc, std::uint64_t seed) {
    Rng rng(seed);
    return MTNet<float>(rng, mc);
}

void save_mask_dir(const std::string& dir, const InferenceResult& res,
                   const std::vector<std::string>& frame_paths, bool soft) {
    fs::create_directories(dir);
    for (size_t i = 0; i < res.masks.size(); ++i) {
        const std::string stem = fs::path(frame_paths[i]).stem().string();
        if (soft) {
            const auto& s = res.soft[i];
            Image img = make_image(s.width, s.height, 1);
            for (size_t j = 0; j < s.data.size(); ++j)
                img.data[j] = static_cast<std::uint8_t>(s.data[j] * 255.0f + 0.5f);
            write_png(dir + "/" + stem + "_soft.png", img);
        } else {
            const auto& m = res.masks[i];
            Image img = make_image(m.width, m.height, 1);
            for (size_t j = 0; j < m.data.size(); ++j) img.data[j] = m.data[j] ? 255 : 0;
            write_png(dir + "/" + stem + ".png", img);
        }
    }
}

int cmd_train(const std::string& config, std::int64_t steps, const std::string& out) {
    auto cfg = load_configs(config);
    if (steps >= 0) cfg.tc.steps = steps;
    auto model = build_model(cfg.mc, cfg.tc.seed);
    const std::string curve = out + ".loss.csv";
    train_model(model, cfg.mc, cfg.tc, curve);
    auto params = model.params();
    save_checkpoint(out, params);
    std::cout << "checkpoint written to " << out << ", loss curve to " << curve << "\n";
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& frames, const std::string& flows,
              const std::string& out, std::int64_t clip_len, const std::string& config) {
    auto cfg = load_configs(config);
    auto model = build_model(cfg.mc, cfg.tc.seed);
    auto params = model.params();
    load_checkpoint(ckpt, params);
    auto seq = load_sequence(frames, flows);
    const std::int64_t t = clip_len > 0 ? clip_len : cfg.mc.clip_len;
    auto res = infer_sequence(model, seq, t);
    save_mask_dir(out, res, seq.frame_paths, false);
    save_mask_dir(out + "/soft", res, seq.frame_paths, true);
    std::cout << res.masks.size() << " masks written to " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& mode,
             const std::string& report) {
    auto rep = evaluate_dirs(pred, gt, mode);
    write_report_csv(report + ".csv", rep, mode);
    write_report_json(report + ".json", rep, mode);
    std::cout << "J_mean=" << rep.j_mean << " F_mean=" << rep.f_mean << " JF_mean=" << rep.jf_mean
              << " S=" << rep.s_measure << " E_max=" << rep.e_measure_max
              << " Fb_max=" << rep.f_beta_max << " MAE=" << rep.mae << "\n";
    return 0;
}

int cmd_make_data(const std::string& spec_path, const std::string& out, std::int64_t frames_n) {
    auto cfg = load_configs(spec_path);
    SyntheticClipSpec spec = clip_spec_for(cfg.mc, cfg.tc, 0);
    spec.seed = cfg.tc.seed;
    auto clip = make_clip(spec, frames_n);
    fs::create_directories(out + "/frames");
    fs::create_directories(out + "/flows");
    fs::create_directories(out + "/masks");
    const std::int64_t s = spec.canvas;
    const auto& fr = clip.frames.values();
    const auto& fl = clip.flows.values();
    const auto& mk = clip.masks.values();
    for (std::int64_t k = 0; k < frames_n; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "%05lld.png", static_cast<long long>(k));
        write_png(out + "/frames/" + name,
                  float_to_image({fr.begin() + k * 3 * s * s, fr.begin() + (k + 1) * 3 * s * s},
                                 s, s, 3));
        write_png(out + "/flows/" + name,
                  float_to_image({fl.begin() + k * 3 * s * s, fl.begin() + (k + 1) * 3 * s * s},
                                 s, s, 3));
        write_png(out + "/masks/" + name,
                  float_to_image({mk.begin() + k * s * s, mk.begin() + (k + 1) * s * s}, s, s, 1));
    }
    std::cout << frames_n << " frames written to " << out << "\n";
    return 0;
}

int cmd_sweep(const std::string& ckpt, const std::string& frames, const std::string& flows,
              const std::string& gt, const std::string& t_csv, const std::string& out_csv,
              const std::string& config) {
    auto cfg = load_configs(config);
    auto model = build_model(cfg.mc, cfg.tc.seed);
    auto params = model.params();
    load_checkpoint(ckpt, params);
    auto seq = load_sequence(frames, flows, gt);
    std::vector<std::int64_t> ts;
    std::stringstream ss(t_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) ts.push_back(std::stoll(tok));
    auto rows = sweep_clip_length(model, seq, ts);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_csv.empty()) {
        file.open(out_csv);
        if (!file) throw std::runtime_error("sweep: cannot open '" + out_csv + "' for writing");
        os = &file;
    }
    *os << "T,JF_mean\n";
    for (const auto& r : rows) *os << r.t << ',' << r.jf_mean << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"video object segmentation pipeline"};
    app.require_subcommand(1);

    std::string config, out, ckpt, frames, flows, gt, pred, mode = "uvos", report, spec_path,
                t_csv = "1,2,4,8,12,16", out_csv;
    std::int64_t steps = -1, clip_len = -1, frames_n = 24;

    auto* train = app.add_subcommand("train", "train on the synthetic task");
    train->add_option("--config", config, "key=value config file");
    train->add_option("--steps", steps, "override step count");
    train->add_option("--out", out, "checkpoint output path")->required();

    auto* infer = app.add_subcommand("infer", "segment a frame directory");
    infer->add_option("--ckpt", ckpt)->required();
    infer->add_option("--frames", frames)->required();
    infer->add_option("--flows", flows)->required();
    infer->add_option("--out", out)->required();
    infer->add_option("--clip-len", clip_len);
    infer->add_option("--config", config);

    auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
    ev->add_option("--pred", pred)->required();
    ev->add_option("--gt", gt)->required();
    ev->add_option("--mode", mode)->check(CLI::IsMember({"uvos", "vsod"}));
    ev->add_option("--report", report)->required();

    auto* mk = app.add_subcommand("make-data", "render a synthetic sequence to disk");
    mk->add_option("--spec", spec_path, "key=value spec file");
    mk->add_option("--out", out)->required();
    mk->add_option("--frames-count", frames_n);

    auto* sw = app.add_subcommand("sweep", "JF_mean versus clip length");
    sw->add_option("--ckpt", ckpt)->required();
    sw->add_option("--frames", frames)->required();
    sw->add_option("--flows", flows)->required();
    sw->add_option("--gt", gt, "ground-truth mask directory")->required();
    sw->add_option("--t", t_csv, "comma-separated clip lengths");
    sw->add_option("--out", out_csv, "CSV output path (stdout when omitted)");
    sw->add_option("--config", config);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config, steps, out);
        if (infer->parsed()) return cmd_infer(ckpt, frames, flows, out, clip_len, config);
        if (ev->parsed()) return cmd_eval(pred, gt, mode, report);
        if (mk->parsed()) return cmd_make_data(spec_path, out, frames_n);
        if (sw->parsed()) return cmd_sweep(ckpt, frames, flows, gt, t_csv, out_csv, config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
