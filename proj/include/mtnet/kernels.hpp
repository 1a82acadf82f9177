#pragma once
// Scalar reference kernels and runtime-dispatched SIMD variants for the
// float inner loops of the tensor engine. Doubles always take the scalar
// path; it doubles as the reference the SIMD variants are tested against.

#include <cstddef>
#include <cstdint>

namespace mtnet::kernels {

enum class Isa { Scalar, Avx2, Neon };

// ISA picked at startup from cpu features. Can be overridden (tests force
// the scalar path to compare against SIMD results).
Isa active_isa();
void force_isa(Isa isa);
const char* isa_name(Isa isa);

// ---- scalar reference implementations -------------------------------------

namespace scalar {

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void add(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class T>
void sub(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <class T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class T>
void scale(T alpha, const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <class T>
void relu(const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
T sum(const T* x, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace scalar

// ---- dispatched float entry points ----------------------------------------

float dot_f32(const float* a, const float* b, std::size_t n);
void axpy_f32(float alpha, const float* x, float* y, std::size_t n);
void add_f32(const float* a, const float* b, float* out, std::size_t n);
void sub_f32(const float* a, const float* b, float* out, std::size_t n);
void mul_f32(const float* a, const float* b, float* out, std::size_t n);
void scale_f32(float alpha, const float* x, float* out, std::size_t n);
void relu_f32(const float* x, float* out, std::size_t n);
float sum_f32(const float* x, std::size_t n);

// Type-generic front; only float is dispatched to SIMD.
template <class T>
inline T dot(const T* a, const T* b, std::size_t n) { return scalar::dot(a, b, n); }
template <>
inline float dot<float>(const float* a, const float* b, std::size_t n) { return dot_f32(a, b, n); }

template <class T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) { scalar::axpy(alpha, x, y, n); }
template <>
inline void axpy<float>(float alpha, const float* x, float* y, std::size_t n) { axpy_f32(alpha, x, y, n); }

template <class T>
inline void add(const T* a, const T* b, T* out, std::size_t n) { scalar::add(a, b, out, n); }
template <>
inline void add<float>(const float* a, const float* b, float* out, std::size_t n) { add_f32(a, b, out, n); }

template <class T>
inline void sub(const T* a, const T* b, T* out, std::size_t n) { scalar::sub(a, b, out, n); }
template <>
inline void sub<float>(const float* a, const float* b, float* out, std::size_t n) { sub_f32(a, b, out, n); }

template <class T>
inline void mul(const T* a, const T* b, T* out, std::size_t n) { scalar::mul(a, b, out, n); }
template <>
inline void mul<float>(const float* a, const float* b, float* out, std::size_t n) { mul_f32(a, b, out, n); }

template <class T>
inline void scale(T alpha, const T* x, T* out, std::size_t n) { scalar::scale(alpha, x, out, n); }
template <>
inline void scale<float>(float alpha, const float* x, float* out, std::size_t n) { scale_f32(alpha, x, out, n); }

template <class T>
inline void relu(const T* x, T* out, std::size_t n) { scalar::relu(x, out, n); }
template <>
inline void relu<float>(const float* x, float* out, std::size_t n) { relu_f32(x, out, n); }

template <class T>
inline T sum(const T* x, std::size_t n) { return scalar::sum(x, n); }
template <>
inline float sum<float>(const float* x, std::size_t n) { return sum_f32(x, n); }

}  // namespace mtnet::kernels
