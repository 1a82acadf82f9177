#pragma once
// Sequence ingestion, clip planning, inference over planned clips, directory
// evaluation, and the clip-length sweep.

#include <optional>

#include "mtnet/image.hpp"
#include "mtnet/metrics.hpp"
#include "mtnet/model.hpp"

namespace mtnet {

struct VideoSequence {
    std::vector<std::string> frame_paths;
    std::vector<std::string> flow_paths;  // same length; last flow duplicated upstream
    std::vector<std::string> gt_paths;    // empty when unlabeled
    std::int64_t width = 0, height = 0;   // decoded size, uniform across frames
};

struct ClipPlan {
    std::vector<std::pair<std::int64_t, std::int64_t>> clips;  // (start, length)
    std::int64_t t = 0;
    std::int64_t count = 0;  // full clips, floor(N/T)
};

ClipPlan plan_clips(std::int64_t n, std::int64_t t);

// Lists a directory's images sorted by filename; flows must pair 1:1 with
// frames by position.
VideoSequence load_sequence(const std::string& frames_dir, const std::string& flows_dir,
                            const std::string& gt_dir = "");

struct InferenceResult {
    std::vector<SaliencyMap> soft;   // original resolution
    std::vector<BinaryMask> masks;   // soft > 0.5
};

InferenceResult infer_sequence(MTNet<float>& model, const VideoSequence& seq,
                               std::int64_t clip_len);

// Frame stems are matched between the two directories; missing pairs error.
MetricReport evaluate_dirs(const std::string& pred_dir, const std::string& gt_dir,
                           const std::string& mode);

void write_report_csv(const std::string& path, const MetricReport& rep, const std::string& mode);
void write_report_json(const std::string& path, const MetricReport& rep, const std::string& mode);

struct SweepRow {
    std::int64_t t;
    double jf_mean;
};

// T values are deduplicated and sorted before running.
std::vector<SweepRow> sweep_clip_length(MTNet<float>& model, const VideoSequence& seq,
                                        std::vector<std::int64_t> t_list);

// Shared helpers.
std::vector<std::string> list_images(const std::string& dir);
BinaryMask mask_from_image(const Image& img);
SaliencyMap saliency_from_image(const Image& img);
MetricReport score_frames(const std::vector<SaliencyMap>& soft,
                          const std::vector<BinaryMask>& masks,
                          const std::vector<BinaryMask>& gt);

}  // namespace mtnet
