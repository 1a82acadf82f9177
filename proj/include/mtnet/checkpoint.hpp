#pragma once
// Flat binary checkpoint: magic "MTNK", version, entry count, then per
// parameter the name, the shape, and the raw little-endian f32 payload.
// Loading requires an exact name/shape match against the live model.

#include <cstdio>
#include <cstring>
#include <fstream>

#include "mtnet/nn.hpp"

namespace mtnet {

inline constexpr char kCheckpointMagic[4] = {'M', 'T', 'N', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

inline void write_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32(os, u);
}

inline float read_f32(std::istream& is) {
    std::uint32_t u = read_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const ParamList<T>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    os.write(kCheckpointMagic, 4);
    detail::write_u32(os, kCheckpointVersion);
    detail::write_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, tens] : params) {
        detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u32(os, static_cast<std::uint32_t>(tens.rank()));
        for (int i = 0; i < tens.rank(); ++i)
            detail::write_u32(os, static_cast<std::uint32_t>(tens.dim(i)));
        for (T v : tens.values()) detail::write_f32(os, static_cast<float>(v));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

template <class T>
void load_checkpoint(const std::string& path, ParamList<T>& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    const std::uint32_t version = detail::read_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t count = detail::read_u32(is);
    if (count != params.size())
        throw std::runtime_error("checkpoint: entry count " + std::to_string(count) +
                                 " does not match model parameter count " +
                                 std::to_string(params.size()));
    for (auto& [name, tens] : params) {
        const std::uint32_t nlen = detail::read_u32(is);
        std::string fname(nlen, '\0');
        is.read(fname.data(), nlen);
        if (!is || fname != name)
            throw std::runtime_error("checkpoint: parameter name mismatch, expected '" + name +
                                     "' found '" + fname + "'");
        const std::uint32_t rank = detail::read_u32(is);
        Shape shape(rank);
        for (auto& e : shape) e = detail::read_u32(is);
        if (shape != tens.shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "', expected " +
                                     shape_str(tens.shape()) + " found " + shape_str(shape));
        for (T& v : tens.values()) v = static_cast<T>(detail::read_f32(is));
    }
    if (!is) throw std::runtime_error("checkpoint: truncated file '" + path + "'");
}

}  // namespace mtnet
