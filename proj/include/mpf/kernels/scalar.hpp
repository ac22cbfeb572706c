#pragma once

#include <cstddef>

// Reference kernels. These are the semantic ground truth the SIMD variants
// are equivalence-tested against, and the only path used for double
// precision (gradient checks).
namespace mpf::kernels::scalar {

template <typename T>
T dot(const T* a, const T* b, size_t n) {
  T acc = T(0);
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(T* x, T alpha, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T>
void vadd(const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += x[i];
}

template <typename T>
void vmul(const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] *= x[i];
}

template <typename T>
T vsum(const T* x, size_t n) {
  T acc = T(0);
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
void relu(const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// gx = gy where ref > 0 else 0
template <typename T>
void relu_mask(const T* ref, const T* gy, T* gx, size_t n) {
  for (size_t i = 0; i < n; ++i) gx[i] = ref[i] > T(0) ? gy[i] : T(0);
}

}  // namespace mpf::kernels::scalar
