#include "mtnet/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace mtnet {

namespace {

constexpr double kEps = 1e-12;

void check_pair(std::int64_t pw, std::int64_t ph, std::int64_t gw, std::int64_t gh) {
    if (pw != gw || ph != gh) throw std::runtime_error("metrics: mask shape mismatch");
    if (pw < 1 || ph < 1) throw std::runtime_error("metrics: empty mask");
}

void check_saliency(const SaliencyMap& s) {
    for (float v : s.data)
        if (!(v >= 0.0f && v <= 1.0f))
            throw std::runtime_error("metrics: saliency values must lie in [0,1]");
}

// Foreground pixel with any 4-neighbour outside the foreground (the image
// border counts as background).
std::vector<std::uint8_t> boundary_of(const BinaryMask& m) {
    const std::int64_t w = m.width, h = m.height;
    std::vector<std::uint8_t> b(w * h, 0);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            if (!m.data[y * w + x]) continue;
            const bool edge = y == 0 || y == h - 1 || x == 0 || x == w - 1 ||
                              !m.data[(y - 1) * w + x] || !m.data[(y + 1) * w + x] ||
                              !m.data[y * w + x - 1] || !m.data[y * w + x + 1];
            if (edge) b[y * w + x] = 1;
        }
    return b;
}

// Fraction of set pixels in `a` that have a set pixel of `b` within Euclidean
// distance `tol`.
double matched_fraction(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
                        std::int64_t w, std::int64_t h, double tol) {
    const std::int64_t r = static_cast<std::int64_t>(std::floor(tol));
    const double tol2 = tol * tol;
    std::int64_t total = 0, matched = 0;
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            if (!a[y * w + x]) continue;
            ++total;
            bool hit = false;
            for (std::int64_t dy = -r; dy <= r && !hit; ++dy) {
                const std::int64_t yy = y + dy;
                if (yy < 0 || yy >= h) continue;
                for (std::int64_t dx = -r; dx <= r; ++dx) {
                    const std::int64_t xx = x + dx;
                    if (xx < 0 || xx >= w) continue;
                    if (double(dx * dx + dy * dy) <= tol2 && b[yy * w + xx]) {
                        hit = true;
                        break;
                    }
                }
            }
            if (hit) ++matched;
        }
    return total == 0 ? -1.0 : double(matched) / double(total);
}

// 2*mean / (mean^2 + 1 + std + eps) over the selected region, with the
// background path scored on the complement map.
double object_score(const std::vector<float>& sal, const std::vector<std::uint8_t>& gt,
                    bool foreground) {
    double sum = 0, sum2 = 0;
    std::int64_t n = 0;
    for (size_t i = 0; i < sal.size(); ++i)
        if (bool(gt[i]) == foreground) {
            const double v = foreground ? sal[i] : 1.0 - sal[i];
            sum += v;
            sum2 += v * v;
            ++n;
        }
    if (n == 0) return 0.0;
    const double mean = sum / double(n);
    const double var = n > 1 ? std::max(0.0, (sum2 - sum * sum / double(n)) / double(n - 1)) : 0.0;
    return 2.0 * mean / (mean * mean + 1.0 + std::sqrt(var) + kEps);
}

struct Block {
    std::int64_t x0, x1, y0, y1;  // half-open
    std::int64_t area() const { return (x1 - x0) * (y1 - y0); }
};

double block_ssim(const SaliencyMap& sal, const BinaryMask& gt, const Block& bl) {
    const std::int64_t n = bl.area();
    if (n == 0) return 1.0;
    double sx = 0, sy = 0;
    for (std::int64_t y = bl.y0; y < bl.y1; ++y)
        for (std::int64_t x = bl.x0; x < bl.x1; ++x) {
            sx += sal.data[y * sal.width + x];
            sy += gt.data[y * gt.width + x];
        }
    const double mx = sx / double(n), my = sy / double(n);
    double vx = 0, vy = 0, vxy = 0;
    for (std::int64_t y = bl.y0; y < bl.y1; ++y)
        for (std::int64_t x = bl.x0; x < bl.x1; ++x) {
            const double dx = sal.data[y * sal.width + x] - mx;
            const double dy = double(gt.data[y * gt.width + x]) - my;
            vx += dx * dx;
            vy += dy * dy;
            vxy += dx * dy;
        }
    const double denom_n = n > 1 ? double(n - 1) : 1.0;
    vx /= denom_n;
    vy /= denom_n;
    vxy /= denom_n;
    const double alpha = 4.0 * mx * my * vxy;
    const double beta = (mx * mx + my * my) * (vx + vy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

}  // namespace

double jaccard(const BinaryMask& pred, const BinaryMask& gt) {
    check_pair(pred.width, pred.height, gt.width, gt.height);
    std::int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i], g = gt.data[i];
        inter += p && g;
        uni += p || g;
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

double boundary_f(const BinaryMask& pred, const BinaryMask& gt, double tol) {
    check_pair(pred.width, pred.height, gt.width, gt.height);
    const std::int64_t w = pred.width, h = pred.height;
    if (tol <= 0)
        tol = std::ceil(0.008 * std::sqrt(double(w) * double(w) + double(h) * double(h)));
    auto pb = boundary_of(pred), gb = boundary_of(gt);
    const double precision = matched_fraction(pb, gb, w, h, tol);
    const double recall = matched_fraction(gb, pb, w, h, tol);
    if (precision < 0 && recall < 0) return 1.0;  // both boundaries empty
    const double p = precision < 0 ? 0.0 : precision;
    const double r = recall < 0 ? 0.0 : recall;
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

RecallDecay recall_decay(const std::vector<double>& per_frame) {
    const std::int64_t n = static_cast<std::int64_t>(per_frame.size());
    if (n < 4) throw std::runtime_error("metrics: decay needs at least 4 frames");
    RecallDecay out;
    double sum = 0;
    std::int64_t above = 0;
    for (double v : per_frame) {
        sum += v;
        above += v > 0.5;
    }
    out.mean = sum / double(n);
    out.recall = double(above) / double(n);
    // Four contiguous temporal bins; the first bins absorb the remainder.
    const std::int64_t base = n / 4, extra = n % 4;
    std::int64_t idx = 0;
    double bin_mean[4];
    for (int b = 0; b < 4; ++b) {
        const std::int64_t len = base + (b < extra ? 1 : 0);
        double s = 0;
        for (std::int64_t i = 0; i < len; ++i) s += per_frame[idx++];
        bin_mean[b] = s / double(len);
    }
    out.decay = bin_mean[0] - bin_mean[3];
    return out;
}

double s_measure(const SaliencyMap& sal, const BinaryMask& gt) {
    check_pair(sal.width, sal.height, gt.width, gt.height);
    check_saliency(sal);
    const std::int64_t w = gt.width, h = gt.height, n = w * h;
    std::int64_t fg = 0;
    for (auto v : gt.data) fg += v;
    double pred_mean = 0;
    for (auto v : sal.data) pred_mean += v;
    pred_mean /= double(n);
    if (fg == 0) return 1.0 - pred_mean;
    if (fg == n) return pred_mean;

    const double mu = double(fg) / double(n);
    const double s_obj =
        mu * object_score(sal.data, gt.data, true) + (1.0 - mu) * object_score(sal.data, gt.data, false);

    // Region term: four blocks split at the foreground centroid, weighted by
    // the foreground mass each block carries.
    std::int64_t cx_sum = 0, cy_sum = 0;
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            if (gt.data[y * w + x]) {
                cx_sum += x;
                cy_sum += y;
            }
    const std::int64_t cx = cx_sum / fg + 1, cy = cy_sum / fg + 1;  // split after the centroid
    const Block blocks[4] = {{0, cx, 0, cy}, {cx, w, 0, cy}, {0, cx, cy, h}, {cx, w, cy, h}};
    double s_reg = 0;
    for (const auto& bl : blocks) {
        std::int64_t bfg = 0;
        for (std::int64_t y = bl.y0; y < bl.y1; ++y)
            for (std::int64_t x = bl.x0; x < bl.x1; ++x) bfg += gt.data[y * w + x];
        const double weight = double(bfg) / double(fg);
        s_reg += weight * block_ssim(sal, gt, bl);
    }
    return std::max(0.0, 0.5 * s_obj + 0.5 * s_reg);
}

double e_measure_max(const SaliencyMap& sal, const BinaryMask& gt) {
    check_pair(sal.width, sal.height, gt.width, gt.height);
    check_saliency(sal);
    const std::int64_t n = gt.width * gt.height;
    std::int64_t fg = 0;
    for (auto v : gt.data) fg += v;
    const double gt_mean = double(fg) / double(n);

    const double denom = n > 1 ? double(n - 1) : 1.0;
    double best = 0;
    for (int t = 0; t < 256; ++t) {
        const float thr = float(t) / 255.0f;
        double score;
        if (fg == 0) {
            double s = 0;
            for (auto v : sal.data) s += v > thr ? 0.0 : 1.0;
            score = s / denom;
        } else if (fg == n) {
            double s = 0;
            for (auto v : sal.data) s += v > thr ? 1.0 : 0.0;
            score = s / denom;
        } else {
            double bin_mean = 0;
            for (auto v : sal.data) bin_mean += v > thr ? 1.0 : 0.0;
            bin_mean /= double(n);
            double s = 0;
            for (std::int64_t i = 0; i < n; ++i) {
                const double dfm = (sal.data[i] > thr ? 1.0 : 0.0) - bin_mean;
                const double dgt = double(gt.data[i]) - gt_mean;
                const double align = 2.0 * dfm * dgt / (dfm * dfm + dgt * dgt + kEps);
                const double enhanced = (align + 1.0) * (align + 1.0) / 4.0;
                s += enhanced;
            }
            score = s / denom;
        }
        best = std::max(best, score);
    }
    return std::min(1.0, best);
}

double f_beta_max(const SaliencyMap& sal, const BinaryMask& gt, double beta2) {
    check_pair(sal.width, sal.height, gt.width, gt.height);
    check_saliency(sal);
    std::int64_t fg = 0;
    for (auto v : gt.data) fg += v;
    double best = 0;
    for (int t = 0; t < 256; ++t) {
        const float thr = float(t) / 255.0f;
        std::int64_t tp = 0, pp = 0;
        for (size_t i = 0; i < sal.data.size(); ++i) {
            const bool p = sal.data[i] > thr;
            pp += p;
            tp += p && gt.data[i];
        }
        if (tp == 0) continue;
        const double precision = double(tp) / double(pp);
        const double recall = double(tp) / double(fg);
        const double f = (1.0 + beta2) * precision * recall / (beta2 * precision + recall);
        best = std::max(best, f);
    }
    return best;
}

double mae(const SaliencyMap& sal, const BinaryMask& gt) {
    check_pair(sal.width, sal.height, gt.width, gt.height);
    check_saliency(sal);
    double sum = 0;
    for (size_t i = 0; i < sal.data.size(); ++i)
        sum += std::abs(double(sal.data[i]) - double(gt.data[i]));
    return sum / double(sal.data.size());
}

}  // namespace mtnet
