#pragma once
// Deterministic RNG. Mapping from raw 64-bit draws to floats is done here
// rather than through std distributions so streams are identical across
// standard library implementations.

#include <cstdint>
#include <random>

namespace mtnet {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [lo, hi] inclusive
    std::int64_t randint(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(hi - lo + 1));
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

}  // namespace mtnet
