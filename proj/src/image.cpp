#include "mtnet/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mtnet {

Image make_image(std::int64_t w, std::int64_t h, std::int64_t c, std::uint8_t fill) {
    if (w < 1 || h < 1 || (c != 1 && c != 3 && c != 4))
        throw std::runtime_error("image: unsupported geometry");
    Image img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.data.assign(static_cast<size_t>(w) * h * c, fill);
    return img;
}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("image: cannot open '" + path + "'");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is),
                                     std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 |
           std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

const std::uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    return pb <= pc ? b : c;
}

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* src, size_t n, size_t expect) {
    std::vector<std::uint8_t> out(expect);
    uLongf dst_len = static_cast<uLongf>(expect);
    const int rc = uncompress(out.data(), &dst_len, src, static_cast<uLong>(n));
    if (rc != Z_OK || dst_len != expect)
        throw std::runtime_error("image: png decompression failed");
    return out;
}

std::vector<std::uint8_t> zlib_deflate(const std::uint8_t* src, size_t n) {
    uLongf cap = compressBound(static_cast<uLong>(n));
    std::vector<std::uint8_t> out(cap);
    const int rc = compress2(out.data(), &cap, src, static_cast<uLong>(n), 6);
    if (rc != Z_OK) throw std::runtime_error("image: png compression failed");
    out.resize(cap);
    return out;
}

}  // namespace

Image read_png(const std::string& path) {
    auto buf = read_file(path);
    if (buf.size() < 8 || std::memcmp(buf.data(), kPngSig, 8) != 0)
        throw std::runtime_error("image: '" + path + "' is not a png");

    std::int64_t w = 0, h = 0;
    int bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    size_t off = 8;
    while (off + 8 <= buf.size()) {
        const std::uint32_t len = be32(&buf[off]);
        if (off + 12 + len > buf.size()) throw std::runtime_error("image: truncated png chunk");
        const char* type = reinterpret_cast<const char*>(&buf[off + 4]);
        const std::uint8_t* payload = &buf[off + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw std::runtime_error("image: bad IHDR");
            w = be32(payload);
            h = be32(payload + 4);
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw std::runtime_error("image: interlaced png unsupported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        off += 12 + len;
    }
    if (w < 1 || h < 1) throw std::runtime_error("image: png missing IHDR");
    if (bit_depth != 8) throw std::runtime_error("image: only 8-bit png supported");
    std::int64_t c;
    switch (color_type) {
        case 0: c = 1; break;
        case 2: c = 3; break;
        case 6: c = 4; break;
        default: throw std::runtime_error("image: unsupported png color type");
    }

    const size_t stride = static_cast<size_t>(w) * c;
    auto raw = zlib_inflate(idat.data(), idat.size(), (stride + 1) * h);

    Image img = make_image(w, h, c);
    std::vector<std::uint8_t> prev(stride, 0);
    for (std::int64_t y = 0; y < h; ++y) {
        const std::uint8_t filter = raw[(stride + 1) * y];
        const std::uint8_t* src = &raw[(stride + 1) * y + 1];
        std::uint8_t* dst = &img.data[stride * y];
        for (size_t i = 0; i < stride; ++i) {
            const int a = i >= size_t(c) ? dst[i - c] : 0;
            const int b = prev[i];
            const int cc = i >= size_t(c) ? prev[i - c] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, cc); break;
                default: throw std::runtime_error("image: bad png filter byte");
            }
            dst[i] = std::uint8_t(v);
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return img;
}

void write_png(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3 && img.channels != 4)
        throw std::runtime_error("image: unsupported channel count for png");
    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (std::int64_t y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), &img.data[stride * y], &img.data[stride * y] + stride);
    }
    auto compressed = zlib_deflate(raw.data(), raw.size());

    std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
    auto chunk = [&out](const char* type, const std::vector<std::uint8_t>& payload) {
        put_be32(out, static_cast<std::uint32_t>(payload.size()));
        const size_t crc_start = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), payload.begin(), payload.end());
        const uLong crc = crc32(0, &out[crc_start], static_cast<uInt>(out.size() - crc_start));
        put_be32(out, static_cast<std::uint32_t>(crc));
    };

    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(img.width));
    put_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : img.channels == 3 ? 2 : 6);
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    chunk("IHDR", ihdr);
    chunk("IDAT", compressed);
    chunk("IEND", {});

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("image: cannot open '" + path + "' for writing");
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw std::runtime_error("image: write failed for '" + path + "'");
}

Image read_pnm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("image: cannot open '" + path + "'");
    std::string magic;
    is >> magic;
    if (magic != "P5" && magic != "P6")
        throw std::runtime_error("image: '" + path + "' is not binary pgm/ppm");
    auto next_token = [&is]() {
        std::string tok;
        while (is >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error("image: truncated pnm header");
    };
    const std::int64_t w = std::stoll(next_token());
    const std::int64_t h = std::stoll(next_token());
    const std::int64_t maxval = std::stoll(next_token());
    if (maxval != 255) throw std::runtime_error("image: only 8-bit pnm supported");
    is.get();  // single whitespace after maxval
    Image img = make_image(w, h, magic == "P5" ? 1 : 3);
    is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!is) throw std::runtime_error("image: truncated pnm payload");
    return img;
}

void write_pnm(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::runtime_error("image: pnm supports 1 or 3 channels");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("image: cannot open '" + path + "' for writing");
    os << (img.channels == 1 ? "P5" : "P6") << "\n"
       << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.data.data()),
             static_cast<std::streamsize>(img.data.size()));
    if (!os) throw std::runtime_error("image: write failed for '" + path + "'");
}

namespace {
std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
    return ext;
}
}  // namespace

Image read_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "png") return read_png(path);
    if (ext == "ppm" || ext == "pgm") return read_pnm(path);
    throw std::runtime_error("image: unsupported extension '" + ext + "' in '" + path + "'");
}

void write_image(const std::string& path, const Image& img) {
    const std::string ext = lower_ext(path);
    if (ext == "png") return write_png(path, img);
    if (ext == "ppm" || ext == "pgm") return write_pnm(path, img);
    throw std::runtime_error("image: unsupported extension '" + ext + "' in '" + path + "'");
}

std::vector<float> resize_bilinear(const std::vector<float>& src, std::int64_t sw,
                                   std::int64_t sh, std::int64_t dw, std::int64_t dh) {
    if (static_cast<std::int64_t>(src.size()) != sw * sh)
        throw std::runtime_error("resize: source size mismatch");
    if (dw < 1 || dh < 1) throw std::runtime_error("resize: target extents must be positive");
    std::vector<float> dst(static_cast<size_t>(dw) * dh);
    const double sx = double(sw) / double(dw), sy = double(sh) / double(dh);
    for (std::int64_t y = 0; y < dh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        if (fy < 0) fy = 0;
        std::int64_t y0 = static_cast<std::int64_t>(fy);
        if (y0 > sh - 1) y0 = sh - 1;
        const std::int64_t y1 = std::min(y0 + 1, sh - 1);
        const double wy = fy - double(y0);
        for (std::int64_t x = 0; x < dw; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            if (fx < 0) fx = 0;
            std::int64_t x0 = static_cast<std::int64_t>(fx);
            if (x0 > sw - 1) x0 = sw - 1;
            const std::int64_t x1 = std::min(x0 + 1, sw - 1);
            const double wx = fx - double(x0);
            const double top = src[y0 * sw + x0] * (1 - wx) + src[y0 * sw + x1] * wx;
            const double bot = src[y1 * sw + x0] * (1 - wx) + src[y1 * sw + x1] * wx;
            dst[y * dw + x] = static_cast<float>(top * (1 - wy) + bot * wy);
        }
    }
    return dst;
}

std::vector<float> image_to_float(const Image& img) {
    std::vector<float> out(img.data.size());
    const std::int64_t hw = img.width * img.height;
    for (std::int64_t c = 0; c < img.channels; ++c)
        for (std::int64_t i = 0; i < hw; ++i)
            out[c * hw + i] = float(img.data[i * img.channels + c]) / 255.0f;
    return out;
}

Image float_to_image(const std::vector<float>& planar, std::int64_t w, std::int64_t h,
                     std::int64_t c) {
    if (static_cast<std::int64_t>(planar.size()) != w * h * c)
        throw std::runtime_error("image: planar buffer size mismatch");
    Image img = make_image(w, h, c);
    const std::int64_t hw = w * h;
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t i = 0; i < hw; ++i) {
            float v = planar[ch * hw + i];
            if (v < 0) v = 0;
            if (v > 1) v = 1;
            img.data[i * c + ch] = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
        }
    return img;
}

}  // namespace mtnet
