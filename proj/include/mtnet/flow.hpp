#pragma once
// Flow-field to three-channel color image: hue encodes direction, saturation
// encodes magnitude normalized by the per-field maximum, value is fixed at 1.
// Zero flow therefore renders as pure white.

#include "mtnet/image.hpp"

namespace mtnet {

// u, v row-major [h*w]. All-zero fields normalize by max magnitude 0 -> white.
Image encode_flow(const std::vector<float>& u, const std::vector<float>& v, std::int64_t w,
                  std::int64_t h);

// One (r,g,b) sample of the wheel for a unit-interval saturation and an angle.
void flow_color(double angle_rad, double saturation, std::uint8_t rgb[3]);

}  // namespace mtnet
