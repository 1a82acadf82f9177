#include "mtnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtnet/flow.hpp"
#include "mtnet/rng.hpp"

namespace mtnet {

namespace {

struct Traj {
    std::vector<std::int64_t> x, y;  // top-left corner per frame, integer px
};

// Integer-rounded positions; exactness of the masks and of the shift oracle
// for the linear path depends on rounding before rasterization.
Traj make_traj(const SyntheticClipSpec& spec, std::int64_t t, std::int64_t size, Rng& rng) {
    const std::int64_t s = spec.canvas;
    const double v = spec.velocity;
    const std::int64_t span = s - size;
    if (span < 0) throw std::runtime_error("synthetic: object larger than canvas");

    // Start far enough from the exit edge that the whole path fits.
    const double travel = v * double(t - 1);
    const double max_x0 = double(span) - std::max(0.0, travel);
    const double min_x0 = -std::min(0.0, travel);
    if (max_x0 < min_x0) throw std::runtime_error("synthetic: trajectory exits canvas");
    const double x0 = min_x0 + rng.uniform() * (max_x0 - min_x0);
    const double amp = spec.trajectory == "sinusoidal" ? double(span) / 8.0 : 0.0;
    const double y_lo = amp, y_hi = double(span) - amp;
    if (y_hi < y_lo) throw std::runtime_error("synthetic: trajectory exits canvas");
    const double y0 = y_lo + rng.uniform() * (y_hi - y_lo);

    Traj tr;
    for (std::int64_t k = 0; k < t; ++k) {
        const double x = x0 + v * double(k);
        const double y = y0 + amp * std::sin(2.0 * M_PI * double(k) / 8.0);
        const std::int64_t xi = std::llround(x), yi = std::llround(y);
        if (xi < 0 || yi < 0 || xi > span || yi > span)
            throw std::runtime_error("synthetic: trajectory exits canvas");
        tr.x.push_back(xi);
        tr.y.push_back(yi);
    }
    return tr;
}

std::vector<std::uint8_t> rasterize(const SyntheticClipSpec& spec, std::int64_t size,
                                    std::int64_t ox, std::int64_t oy) {
    const std::int64_t s = spec.canvas;
    std::vector<std::uint8_t> m(s * s, 0);
    if (spec.shape == "disc") {
        const double r = double(size) / 2.0;
        const double cx = double(ox) + r - 0.5, cy = double(oy) + r - 0.5;
        for (std::int64_t y = 0; y < s; ++y)
            for (std::int64_t x = 0; x < s; ++x) {
                const double dx = double(x) - cx, dy = double(y) - cy;
                if (dx * dx + dy * dy <= r * r) m[y * s + x] = 1;
            }
    } else {
        for (std::int64_t y = oy; y < oy + size; ++y)
            for (std::int64_t x = ox; x < ox + size; ++x) m[y * s + x] = 1;
    }
    return m;
}

float gauss(Rng& rng) {
    // Box-Muller; consumes two uniforms per sample for a fixed draw order.
    const double u1 = std::max(rng.uniform(), 1e-12);
    const double u2 = rng.uniform();
    return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
}

}  // namespace

Clip make_clip(const SyntheticClipSpec& spec, std::int64_t t) {
    if (t < 1) throw std::runtime_error("synthetic: clip length must be >= 1");
    if (spec.shape != "square" && spec.shape != "disc")
        throw std::runtime_error("synthetic: unknown object shape '" + spec.shape + "'");
    if (spec.trajectory != "linear" && spec.trajectory != "sinusoidal")
        throw std::runtime_error("synthetic: unknown trajectory '" + spec.trajectory + "'");
    const std::int64_t s = spec.canvas;
    const std::int64_t size = spec.object_size > 0 ? spec.object_size : s / 4;

    Rng rng(spec.seed);
    const auto tr = make_traj(spec, t, size, rng);

    // Static scene: mid-gray background with dark distractor patches. They
    // share the object's intensity range but never move, so the flow stream
    // disambiguates them.
    std::vector<float> scene(3 * s * s, 0.5f);
    for (std::int64_t d = 0; d < spec.distractors; ++d) {
        const std::int64_t ds = size / 2 + rng.randint(0, size / 2);
        const std::int64_t dx = rng.randint(0, s - ds);
        const std::int64_t dy = rng.randint(0, s - ds);
        const float shade = 0.15f + 0.2f * static_cast<float>(rng.uniform());
        for (std::int64_t y = dy; y < dy + ds; ++y)
            for (std::int64_t x = dx; x < dx + ds; ++x)
                for (std::int64_t c = 0; c < 3; ++c) scene[(c * s + y) * s + x] = shade;
    }
    const float obj_color[3] = {0.9f, 0.25f + 0.1f * static_cast<float>(rng.uniform()), 0.2f};

    std::vector<float> frames(t * 3 * s * s), flows(t * 3 * s * s), masks(t * s * s);
    for (std::int64_t k = 0; k < t; ++k) {
        auto m = rasterize(spec, size, tr.x[k], tr.y[k]);
        float* fr = &frames[k * 3 * s * s];
        std::copy(scene.begin(), scene.end(), fr);
        for (std::int64_t i = 0; i < s * s; ++i) {
            masks[k * s * s + i] = m[i] ? 1.0f : 0.0f;
            if (m[i])
                for (std::int64_t c = 0; c < 3; ++c) fr[c * s * s + i] = obj_color[c];
        }
        if (spec.noise_sigma > 0)
            for (std::int64_t i = 0; i < 3 * s * s; ++i) {
                float v = fr[i] + static_cast<float>(spec.noise_sigma) * gauss(rng);
                fr[i] = v < 0 ? 0 : v > 1 ? 1 : v;
            }

        // Flow to the next frame; the last frame duplicates its predecessor's.
        const std::int64_t kn = k + 1 < t ? k : k - 1;
        std::vector<float> u(s * s, 0.0f), v(s * s, 0.0f);
        if (t > 1) {
            const float du = float(tr.x[kn + 1] - tr.x[kn]);
            const float dv = float(tr.y[kn + 1] - tr.y[kn]);
            auto mflow = k + 1 < t ? m : rasterize(spec, size, tr.x[kn], tr.y[kn]);
            for (std::int64_t i = 0; i < s * s; ++i)
                if (mflow[i]) {
                    u[i] = du;
                    v[i] = dv;
                }
        }
        Image fi = encode_flow(u, v, s, s);
        auto fplanar = image_to_float(fi);
        std::copy(fplanar.begin(), fplanar.end(), &flows[k * 3 * s * s]);
    }

    Clip clip;
    clip.frames = Tensor<float>::from({t, 3, s, s}, std::move(frames));
    clip.flows = Tensor<float>::from({t, 3, s, s}, std::move(flows));
    clip.masks = Tensor<float>::from({t, 1, s, s}, std::move(masks));
    return clip;
}

std::vector<std::vector<std::uint8_t>> make_clip_masks(const SyntheticClipSpec& spec,
                                                       std::int64_t t) {
    auto clip = make_clip(spec, t);
    const std::int64_t s = spec.canvas;
    std::vector<std::vector<std::uint8_t>> out(t);
    const auto& m = clip.masks.values();
    for (std::int64_t k = 0; k < t; ++k) {
        out[k].resize(s * s);
        for (std::int64_t i = 0; i < s * s; ++i) out[k][i] = m[k * s * s + i] > 0.5f ? 1 : 0;
    }
    return out;
}

}  // namespace mtnet
