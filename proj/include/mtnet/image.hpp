#pragma once
// 8-bit image container with PNG (via zlib) and PPM/PGM readers/writers,
// plus the bilinear resize used for pre/post-processing.

#include <cstdint>
#include <string>
#include <vector>

namespace mtnet {

struct Image {
    std::int64_t width = 0, height = 0, channels = 0;  // interleaved row-major
    std::vector<std::uint8_t> data;

    std::uint8_t& at(std::int64_t y, std::int64_t x, std::int64_t c) {
        return data[(y * width + x) * channels + c];
    }
    std::uint8_t at(std::int64_t y, std::int64_t x, std::int64_t c) const {
        return data[(y * width + x) * channels + c];
    }
};

Image make_image(std::int64_t w, std::int64_t h, std::int64_t c, std::uint8_t fill = 0);

// Dispatches on extension: .png, .ppm, .pgm.
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img);

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);
Image read_pnm(const std::string& path);
void write_pnm(const std::string& path, const Image& img);

// Bilinear resample of a single-channel float map (half-pixel centers).
std::vector<float> resize_bilinear(const std::vector<float>& src, std::int64_t sw,
                                   std::int64_t sh, std::int64_t dw, std::int64_t dh);

// Channel-interleaved u8 <-> planar float [0,1] helpers.
std::vector<float> image_to_float(const Image& img);           // [C][H][W] planar
Image float_to_image(const std::vector<float>& planar, std::int64_t w, std::int64_t h,
                     std::int64_t c);

}  // namespace mtnet
