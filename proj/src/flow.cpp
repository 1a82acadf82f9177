#include "mtnet/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace mtnet {

// HSV -> RGB at V=1. Hue wraps; saturation clamps to [0,1].
void flow_color(double angle_rad, double saturation, std::uint8_t rgb[3]) {
    if (saturation < 0) saturation = 0;
    if (saturation > 1) saturation = 1;
    double hue = angle_rad / (2.0 * M_PI);
    hue -= std::floor(hue);
    const double h6 = hue * 6.0;
    const int sector = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double p = 1.0 - saturation;
    const double q = 1.0 - saturation * f;
    const double t = 1.0 - saturation * (1.0 - f);
    double r, g, b;
    switch (sector) {
        case 0: r = 1; g = t; b = p; break;
        case 1: r = q; g = 1; b = p; break;
        case 2: r = p; g = 1; b = t; break;
        case 3: r = p; g = q; b = 1; break;
        case 4: r = t; g = p; b = 1; break;
        default: r = 1; g = p; b = q; break;
    }
    rgb[0] = static_cast<std::uint8_t>(r * 255.0 + 0.5);
    rgb[1] = static_cast<std::uint8_t>(g * 255.0 + 0.5);
    rgb[2] = static_cast<std::uint8_t>(b * 255.0 + 0.5);
}

Image encode_flow(const std::vector<float>& u, const std::vector<float>& v, std::int64_t w,
                  std::int64_t h) {
    if (static_cast<std::int64_t>(u.size()) != w * h || u.size() != v.size())
        throw std::runtime_error("flow: field size mismatch");
    double max_mag = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        const double du = u[i], dv = v[i];
        if (!std::isfinite(du) || !std::isfinite(dv))
            throw std::runtime_error("flow: non-finite displacement");
        max_mag = std::max(max_mag, std::sqrt(du * du + dv * dv));
    }
    Image img = make_image(w, h, 3);
    for (std::int64_t i = 0; i < w * h; ++i) {
        const double du = u[i], dv = v[i];
        const double mag = std::sqrt(du * du + dv * dv);
        const double sat = max_mag > 0 ? mag / max_mag : 0.0;
        const double ang = std::atan2(dv, du);
        std::uint8_t rgb[3];
        flow_color(ang, sat, rgb);
        img.data[i * 3 + 0] = rgb[0];
        img.data[i * 3 + 1] = rgb[1];
        img.data[i * 3 + 2] = rgb[2];
    }
    return img;
}

}  // namespace mtnet
