#include "mtnet/kernels.hpp"

namespace mtnet::kernels {

namespace avx2 {
#if defined(__x86_64__) || defined(_M_X64)
bool available();
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void add(const float* a, const float* b, float* out, std::size_t n);
void sub(const float* a, const float* b, float* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
void scale(float alpha, const float* x, float* out, std::size_t n);
void relu(const float* x, float* out, std::size_t n);
float sum(const float* x, std::size_t n);
#endif
}  // namespace avx2

namespace neon {
#if defined(__aarch64__)
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);
void add(const float* a, const float* b, float* out, std::size_t n);
void sub(const float* a, const float* b, float* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
void scale(float alpha, const float* x, float* out, std::size_t n);
void relu(const float* x, float* out, std::size_t n);
float sum(const float* x, std::size_t n);
#endif
}  // namespace neon

namespace {

Isa detect() {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2::available()) return Isa::Avx2;
#elif defined(__aarch64__)
    return Isa::Neon;
#endif
    return Isa::Scalar;
}

Isa g_isa = detect();

}  // namespace

Isa active_isa() { return g_isa; }
void force_isa(Isa isa) { g_isa = isa; }

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
        default: return "scalar";
    }
}

#if defined(__x86_64__) || defined(_M_X64)
#define MTNET_DISPATCH(call_scalar, call_simd) \
    return (g_isa == Isa::Avx2) ? call_simd : call_scalar
#define MTNET_SIMD_NS avx2
#elif defined(__aarch64__)
#define MTNET_DISPATCH(call_scalar, call_simd) \
    return (g_isa == Isa::Neon) ? call_simd : call_scalar
#define MTNET_SIMD_NS neon
#else
#define MTNET_DISPATCH(call_scalar, call_simd) return call_scalar
#endif

float dot_f32(const float* a, const float* b, std::size_t n) {
#ifdef MTNET_SIMD_NS
    MTNET_DISPATCH(scalar::dot(a, b, n), MTNET_SIMD_NS::dot(a, b, n));
#else
    return scalar::dot(a, b, n);
#endif
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
#ifdef MTNET_SIMD_NS
    MTNET_DISPATCH(scalar::axpy(alpha, x, y, n), MTNET_SIMD_NS::axpy(alpha, x, y, n));
#else
    scalar::axpy(alpha, x, y, n);
#endif
}

void add_f32(const float* a, const float* b, float* out, std::size_t n) {
#ifdef MTNET_SIMD_NS
    MTNET_DISPATCH(scalar::add(a, b, out, n), MTNET_SIMD_NS::add(a, b, out, n));
#else
    scalar::add(a, b, out, n);
#endif
}

void sub_f32(const float* a, const float* b, float* out, std::size_t n) {
#ifdef MTNET_SIMD_NS
    MTNET_DISPATCH(scalar::sub(a, b, out, n), MTNET_SIMD_NS::sub(a, b, out, n));
#else
    scalar::sub(a, b, out, n);
#endif
}

void mul_f32(const float* a, const float* b, float* out, std::size_t n) {
#ifdef MTNET_SIMD_NS
    MTNET_DISPATCH(scalar::mul(a, b, out, n), MTNET_SIMD_NS::mul(a, b, out, n));
#else
    scalar::mul(a, b, out, n);
#endif
}

void scale_f32(float alpha, const float* x, float* out, std::size_t n) {
#ifdef MTNET_SIMD_NS
    MTNET_DISPATCH(scalar::scale(alpha, x, out, n), MTNET_SIMD_NS::scale(alpha, x, out, n));
#else
    scalar::scale(alpha, x, out, n);
#endif
}

void relu_f32(const float* x, float* out, std::size_t n) {
#ifdef MTNET_SIMD_NS
    MTNET_DISPATCH(scalar::relu(x, out, n), MTNET_SIMD_NS::relu(x, out, n));
#else
    scalar::relu(x, out, n);
#endif
}

float sum_f32(const float* x, std::size_t n) {
#ifdef MTNET_SIMD_NS
    MTNET_DISPATCH(scalar::sum(x, n), MTNET_SIMD_NS::sum(x, n));
#else
    return scalar::sum(x, n);
#endif
}

}  // namespace mtnet::kernels
