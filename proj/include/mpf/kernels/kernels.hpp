#pragma once

#include <cstddef>
#include <string_view>

#include "mpf/kernels/scalar.hpp"

namespace mpf::kernels {

// Single-precision kernel table, filled at startup with the widest ISA the
// CPU reports (AVX2+FMA on x86-64, scalar otherwise).
struct Ops {
  float (*dot)(const float*, const float*, size_t);
  void (*axpy)(float, const float*, float*, size_t);
  void (*scale)(float*, float, size_t);
  void (*vadd)(const float*, float*, size_t);
  void (*vmul)(const float*, float*, size_t);
  float (*vsum)(const float*, size_t);
  void (*relu)(const float*, float*, size_t);
  void (*relu_mask)(const float*, const float*, float*, size_t);
};

const Ops& ops();
const char* backend_name();

// Test hook; returns false when the requested backend is not available on
// this machine. "scalar" always succeeds.
bool set_backend(std::string_view name);

inline float dot(const float* a, const float* b, size_t n) { return ops().dot(a, b, n); }
inline void axpy(float alpha, const float* x, float* y, size_t n) { ops().axpy(alpha, x, y, n); }
inline void scale(float* x, float alpha, size_t n) { ops().scale(x, alpha, n); }
inline void vadd(const float* x, float* y, size_t n) { ops().vadd(x, y, n); }
inline void vmul(const float* x, float* y, size_t n) { ops().vmul(x, y, n); }
inline float vsum(const float* x, size_t n) { return ops().vsum(x, n); }
inline void relu(const float* x, float* y, size_t n) { ops().relu(x, y, n); }
inline void relu_mask(const float* r, const float* gy, float* gx, size_t n) {
  ops().relu_mask(r, gy, gx, n);
}

inline double dot(const double* a, const double* b, size_t n) { return scalar::dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, size_t n) { scalar::axpy(alpha, x, y, n); }
inline void scale(double* x, double alpha, size_t n) { scalar::scale(x, alpha, n); }
inline void vadd(const double* x, double* y, size_t n) { scalar::vadd(x, y, n); }
inline void vmul(const double* x, double* y, size_t n) { scalar::vmul(x, y, n); }
inline double vsum(const double* x, size_t n) { return scalar::vsum(x, n); }
inline void relu(const double* x, double* y, size_t n) { scalar::relu(x, y, n); }
inline void relu_mask(const double* r, const double* gy, double* gx, size_t n) {
  scalar::relu_mask(r, gy, gx, n);
}

}  // namespace mpf::kernels
