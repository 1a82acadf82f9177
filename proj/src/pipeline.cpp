#include "mtnet/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>

namespace fs = std::filesystem;

namespace mtnet {

ClipPlan plan_clips(std::int64_t n, std::int64_t t) {
    if (n < 1 || t < 1) throw std::runtime_error("plan_clips: N and T must be >= 1");
    ClipPlan plan;
    plan.t = t;
    plan.count = n / t;
    for (std::int64_t c = 0; c < plan.count; ++c) plan.clips.emplace_back(c * t, t);
    // Trailing frames form one shorter clip instead of being dropped.
    const std::int64_t rem = n % t;
    if (rem > 0) plan.clips.emplace_back(plan.count * t, rem);
    return plan;
}

std::vector<std::string> list_images(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("pipeline: '" + dir + "' is not a directory");
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
        if (ext == ".png" || ext == ".ppm" || ext == ".pgm") out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

VideoSequence load_sequence(const std::string& frames_dir, const std::string& flows_dir,
                            const std::string& gt_dir) {
    VideoSequence seq;
    seq.frame_paths = list_images(frames_dir);
    seq.flow_paths = list_images(flows_dir);
    if (seq.frame_paths.empty()) throw std::runtime_error("pipeline: no frames in '" + frames_dir + "'");
    if (seq.flow_paths.size() != seq.frame_paths.size())
        throw std::runtime_error("pipeline: frame/flow count mismatch (" +
                                 std::to_string(seq.frame_paths.size()) + " vs " +
                                 std::to_string(seq.flow_paths.size()) + ")");
    if (!gt_dir.empty()) {
        seq.gt_paths = list_images(gt_dir);
        if (seq.gt_paths.size() != seq.frame_paths.size())
            throw std::runtime_error("pipeline: frame/ground-truth count mismatch");
    }
    const Image first = read_image(seq.frame_paths[0]);
    seq.width = first.width;
    seq.height = first.height;
    return seq;
}

namespace {

// Decoded image -> [3,S,S] planar floats at the model's input side.
std::vector<float> prepare_frame(const Image& img, std::int64_t side) {
    const std::int64_t hw = img.width * img.height;
    std::vector<float> planar = image_to_float(img);
    std::vector<float> rgb(3 * hw);
    for (std::int64_t c = 0; c < 3; ++c) {
        const std::int64_t src_c = img.channels == 1 ? 0 : c;
        std::copy(planar.begin() + src_c * hw, planar.begin() + (src_c + 1) * hw,
                  rgb.begin() + c * hw);
    }
    std::vector<float> out(3 * side * side);
    for (std::int64_t c = 0; c < 3; ++c) {
        auto ch = resize_bilinear({rgb.begin() + c * hw, rgb.begin() + (c + 1) * hw}, img.width,
                                  img.height, side, side);
        std::copy(ch.begin(), ch.end(), out.begin() + c * side * side);
    }
    return out;
}

Tensor<float> stack_clip(const std::vector<std::string>& paths, std::int64_t start,
                         std::int64_t len, std::int64_t side) {
    std::vector<float> data(len * 3 * side * side);
    for (std::int64_t k = 0; k < len; ++k) {
        const Image img = read_image(paths[start + k]);
        auto f = prepare_frame(img, side);
        std::copy(f.begin(), f.end(), data.begin() + k * 3 * side * side);
    }
    return Tensor<float>::from({len, 3, side, side}, std::move(data));
}

}  // namespace

InferenceResult infer_sequence(MTNet<float>& model, const VideoSequence& seq,
                               std::int64_t clip_len) {
    const std::int64_t n = static_cast<std::int64_t>(seq.frame_paths.size());
    const std::int64_t side = model.cfg.input_side;
    const auto plan = plan_clips(n, clip_len);

    InferenceResult res;
    for (const auto& [start, len] : plan.clips) {
        auto frames = stack_clip(seq.frame_paths, start, len, side);
        auto flows = stack_clip(seq.flow_paths, start, len, side);
        auto probs = model.predict(frames, flows);  // [len,1,side,side]
        const auto& p = probs.values();
        for (std::int64_t k = 0; k < len; ++k) {
            std::vector<float> small(p.begin() + k * side * side,
                                     p.begin() + (k + 1) * side * side);
            SaliencyMap sm;
            sm.width = seq.width;
            sm.height = seq.height;
            sm.data = resize_bilinear(small, side, side, seq.width, seq.height);
            for (auto& v : sm.data) v = v < 0 ? 0 : v > 1 ? 1 : v;
            BinaryMask bm;
            bm.width = seq.width;
            bm.height = seq.height;
            bm.data.resize(sm.data.size());
            for (size_t i = 0; i < sm.data.size(); ++i) bm.data[i] = sm.data[i] > 0.5f ? 1 : 0;
            res.soft.push_back(std::move(sm));
            res.masks.push_back(std::move(bm));
        }
    }
    return res;
}

BinaryMask mask_from_image(const Image& img) {
    BinaryMask m;
    m.width = img.width;
    m.height = img.height;
    m.data.resize(img.width * img.height);
    for (std::int64_t i = 0; i < img.width * img.height; ++i)
        m.data[i] = img.data[i * img.channels] >= 128 ? 1 : 0;
    return m;
}

SaliencyMap saliency_from_image(const Image& img) {
    SaliencyMap s;
    s.width = img.width;
    s.height = img.height;
    s.data.resize(img.width * img.height);
    for (std::int64_t i = 0; i < img.width * img.height; ++i)
        s.data[i] = float(img.data[i * img.channels]) / 255.0f;
    return s;
}

MetricReport score_frames(const std::vector<SaliencyMap>& soft,
                          const std::vector<BinaryMask>& masks,
                          const std::vector<BinaryMask>& gt) {
    if (masks.size() != gt.size() || soft.size() != gt.size() || gt.empty())
        throw std::runtime_error("metrics: prediction/ground-truth count mismatch");
    MetricReport rep;
    std::vector<double> js, fs;
    double s_sum = 0, e_sum = 0, fb_sum = 0, mae_sum = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        js.push_back(jaccard(masks[i], gt[i]));
        fs.push_back(boundary_f(masks[i], gt[i]));
        s_sum += s_measure(soft[i], gt[i]);
        e_sum += e_measure_max(soft[i], gt[i]);
        fb_sum += f_beta_max(soft[i], gt[i]);
        mae_sum += mae(soft[i], gt[i]);
    }
    const double n = double(gt.size());
    if (gt.size() >= 4) {
        const auto jrd = recall_decay(js);
        const auto frd = recall_decay(fs);
        rep.j_mean = jrd.mean;
        rep.j_recall = jrd.recall;
        rep.j_decay = jrd.decay;
        rep.f_mean = frd.mean;
        rep.f_recall = frd.recall;
        rep.f_decay = frd.decay;
    } else {
        double jm = 0, fm = 0, jr = 0, fr = 0;
        for (size_t i = 0; i < gt.size(); ++i) {
            jm += js[i];
            fm += fs[i];
            jr += js[i] > 0.5;
            fr += fs[i] > 0.5;
        }
        rep.j_mean = jm / n;
        rep.f_mean = fm / n;
        rep.j_recall = jr / n;
        rep.f_recall = fr / n;
    }
    rep.jf_mean = 0.5 * (rep.j_mean + rep.f_mean);
    rep.s_measure = s_sum / n;
    rep.e_measure_max = e_sum / n;
    rep.f_beta_max = fb_sum / n;
    rep.mae = mae_sum / n;
    return rep;
}

MetricReport evaluate_dirs(const std::string& pred_dir, const std::string& gt_dir,
                           const std::string& mode) {
    if (mode != "uvos" && mode != "vsod")
        throw std::runtime_error("evaluate: mode must be 'uvos' or 'vsod'");
    auto preds = list_images(pred_dir);
    auto gts = list_images(gt_dir);
    if (gts.empty()) throw std::runtime_error("evaluate: no ground-truth images in '" + gt_dir + "'");
    if (preds.empty()) throw std::runtime_error("evaluate: no predictions in '" + pred_dir + "'");

    std::map<std::string, std::string> gt_by_stem;
    for (const auto& p : gts) gt_by_stem[fs::path(p).stem().string()] = p;

    std::vector<SaliencyMap> soft;
    std::vector<BinaryMask> masks, gt_masks;
    for (const auto& p : preds) {
        const auto stem = fs::path(p).stem().string();
        const auto it = gt_by_stem.find(stem);
        if (it == gt_by_stem.end())
            throw std::runtime_error("evaluate: no ground truth for frame '" + stem + "'");
        const Image pi = read_image(p);
        const Image gi = read_image(it->second);
        if (pi.width != gi.width || pi.height != gi.height)
            throw std::runtime_error("evaluate: size mismatch for frame '" + stem + "'");
        soft.push_back(saliency_from_image(pi));
        masks.push_back(mask_from_image(pi));
        gt_masks.push_back(mask_from_image(gi));
    }
    if (masks.size() != gts.size())
        throw std::runtime_error("evaluate: ground-truth frames without predictions");
    return score_frames(soft, masks, gt_masks);
}

void write_report_csv(const std::string& path, const MetricReport& rep, const std::string& mode) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("report: cannot open '" + path + "' for writing");
    os << "mode,J_mean,J_recall,J_decay,F_mean,F_recall,F_decay,JF_mean,"
          "S_measure,E_measure_max,F_beta_max,MAE\n";
    os << mode << ',' << rep.j_mean << ',' << rep.j_recall << ',' << rep.j_decay << ','
       << rep.f_mean << ',' << rep.f_recall << ',' << rep.f_decay << ',' << rep.jf_mean << ','
       << rep.s_measure << ',' << rep.e_measure_max << ',' << rep.f_beta_max << ',' << rep.mae
       << '\n';
}

void write_report_json(const std::string& path, const MetricReport& rep, const std::string& mode) {
    nlohmann::json j{{"mode", mode},
                     {"J_mean", rep.j_mean},
                     {"J_recall", rep.j_recall},
                     {"J_decay", rep.j_decay},
                     {"F_mean", rep.f_mean},
                     {"F_recall", rep.f_recall},
                     {"F_decay", rep.f_decay},
                     {"JF_mean", rep.jf_mean},
                     {"S_measure", rep.s_measure},
                     {"E_measure_max", rep.e_measure_max},
                     {"F_beta_max", rep.f_beta_max},
                     {"MAE", rep.mae}};
    std::ofstream os(path);
    if (!os) throw std::runtime_error("report: cannot open '" + path + "' for writing");
    os << j.dump(2) << '\n';
}

std::vector<SweepRow> sweep_clip_length(MTNet<float>& model, const VideoSequence& seq,
                                        std::vector<std::int64_t> t_list) {
    if (seq.gt_paths.empty())
        throw std::runtime_error("sweep: sequence has no ground-truth masks");
    for (auto t : t_list)
        if (t < 1) throw std::runtime_error("sweep: clip lengths must be >= 1");
    std::sort(t_list.begin(), t_list.end());
    t_list.erase(std::unique(t_list.begin(), t_list.end()), t_list.end());

    std::vector<BinaryMask> gt;
    for (const auto& p : seq.gt_paths) gt.push_back(mask_from_image(read_image(p)));

    std::vector<SweepRow> rows;
    for (auto t : t_list) {
        auto res = infer_sequence(model, seq, t);
        auto rep = score_frames(res.soft, res.masks, gt);
        rows.push_back({t, rep.jf_mean});
    }
    return rows;
}

}  // namespace mtnet
