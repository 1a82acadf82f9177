#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "mtnet/kernels.hpp"
#include "mtnet/rng.hpp"

using namespace mtnet;

namespace {

std::vector<float> rand_vec(Rng& rng, std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-2.0, 2.0));
    return v;
}

struct IsaGuard {
    kernels::Isa saved;
    explicit IsaGuard(kernels::Isa want) : saved(kernels::active_isa()) { kernels::force_isa(want); }
    ~IsaGuard() { kernels::force_isa(saved); }
};

}  // namespace

TEST_CASE("scalar reference kernels against closed forms") {
    const float a[4] = {1, 2, 3, 4};
    const float b[4] = {5, 6, 7, 8};
    CHECK(kernels::scalar::dot(a, b, 4) == doctest::Approx(70.0f));  // 5+12+21+32
    CHECK(kernels::scalar::sum(a, 4) == doctest::Approx(10.0f));

    float y[4] = {1, 1, 1, 1};
    kernels::scalar::axpy(2.0f, a, y, 4);
    CHECK(y[0] == 3.0f);
    CHECK(y[3] == 9.0f);

    float out[4];
    kernels::scalar::relu(std::array<float, 4>{-1, 0, 2, -3}.data(), out, 4);
    CHECK(out[0] == 0.0f);
    CHECK(out[2] == 2.0f);
    CHECK(out[3] == 0.0f);
}

TEST_CASE("dispatched elementwise kernels are bit-exact across isas") {
    if (kernels::active_isa() == kernels::Isa::Scalar) return;  // nothing to compare on this machine
    Rng rng(11);
    // Lengths straddle the vector width, including ragged tails.
    for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 64u, 1000u}) {
        auto a = rand_vec(rng, n), b = rand_vec(rng, n);
        std::vector<float> simd_out(n), scal_out(n);

        kernels::add_f32(a.data(), b.data(), simd_out.data(), n);
        {
            IsaGuard g(kernels::Isa::Scalar);
            kernels::add_f32(a.data(), b.data(), scal_out.data(), n);
        }
        CHECK(simd_out == scal_out);

        kernels::mul_f32(a.data(), b.data(), simd_out.data(), n);
        {
            IsaGuard g(kernels::Isa::Scalar);
            kernels::mul_f32(a.data(), b.data(), scal_out.data(), n);
        }
        CHECK(simd_out == scal_out);

        kernels::sub_f32(a.data(), b.data(), simd_out.data(), n);
        {
            IsaGuard g(kernels::Isa::Scalar);
            kernels::sub_f32(a.data(), b.data(), scal_out.data(), n);
        }
        CHECK(simd_out == scal_out);

        kernels::relu_f32(a.data(), simd_out.data(), n);
        {
            IsaGuard g(kernels::Isa::Scalar);
            kernels::relu_f32(a.data(), scal_out.data(), n);
        }
        CHECK(simd_out == scal_out);

        kernels::scale_f32(1.5f, a.data(), simd_out.data(), n);
        {
            IsaGuard g(kernels::Isa::Scalar);
            kernels::scale_f32(1.5f, a.data(), scal_out.data(), n);
        }
        CHECK(simd_out == scal_out);
    }
}

TEST_CASE("dispatched reductions match scalar within accumulation tolerance") {
    if (kernels::active_isa() == kernels::Isa::Scalar) return;
    Rng rng(12);
    for (std::size_t n : {3u, 16u, 100u, 4097u}) {
        auto a = rand_vec(rng, n), b = rand_vec(rng, n);
        const float simd_dot = kernels::dot_f32(a.data(), b.data(), n);
        float scal_dot;
        {
            IsaGuard g(kernels::Isa::Scalar);
            scal_dot = kernels::dot_f32(a.data(), b.data(), n);
        }
        // Lane-wise accumulation reorders the sum, so equality is approximate.
        CHECK(simd_dot == doctest::Approx(scal_dot).epsilon(1e-4));

        std::vector<float> y1(n, 0.5f), y2(n, 0.5f);
        kernels::axpy_f32(0.7f, a.data(), y1.data(), n);
        {
            IsaGuard g(kernels::Isa::Scalar);
            kernels::axpy_f32(0.7f, a.data(), y2.data(), n);
        }
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-6));
    }
}

TEST_CASE("forced isa round-trips") {
    const kernels::Isa orig = kernels::active_isa();
    kernels::force_isa(kernels::Isa::Scalar);
    CHECK(kernels::active_isa() == kernels::Isa::Scalar);
    kernels::force_isa(orig);
    CHECK(kernels::active_isa() == orig);
}
