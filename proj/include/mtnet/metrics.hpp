#pragma once
// Segmentation and saliency evaluation measures: region overlap, boundary
// accuracy, temporal recall/decay, and the structural/alignment/F-measure
// family with MAE.

#include <cstdint>
#include <string>
#include <vector>

namespace mtnet {

struct BinaryMask {
    std::int64_t width = 0, height = 0;
    std::vector<std::uint8_t> data;  // {0,1}
};

struct SaliencyMap {
    std::int64_t width = 0, height = 0;
    std::vector<float> data;  // [0,1]
};

struct MetricReport {
    double j_mean = 0, j_recall = 0, j_decay = 0;
    double f_mean = 0, f_recall = 0, f_decay = 0;
    double jf_mean = 0;
    double s_measure = 0, e_measure_max = 0, f_beta_max = 0, mae = 0;
};

struct RecallDecay {
    double mean = 0, recall = 0, decay = 0;
};

double jaccard(const BinaryMask& pred, const BinaryMask& gt);
// Boundary F-measure with match tolerance in pixels; tol <= 0 selects the
// default 0.008 * image diagonal.
double boundary_f(const BinaryMask& pred, const BinaryMask& gt, double tol = -1.0);
RecallDecay recall_decay(const std::vector<double>& per_frame);

double s_measure(const SaliencyMap& sal, const BinaryMask& gt);
double e_measure_max(const SaliencyMap& sal, const BinaryMask& gt);
double f_beta_max(const SaliencyMap& sal, const BinaryMask& gt, double beta2 = 0.3);
double mae(const SaliencyMap& sal, const BinaryMask& gt);

}  // namespace mtnet
