#pragma once

#include <cstring>

#include "mpf/kernels/kernels.hpp"

namespace mpf::kernels {

// Small row-major GEMMs built on the dispatched axpy/dot row kernels; the
// conv and linear layers funnel all their arithmetic through these.

// C(M,N) += A(M,K) * B(K,N)
template <typename T>
void gemm_nn(size_t M, size_t N, size_t K, const T* A, const T* B, T* C) {
  for (size_t m = 0; m < M; ++m) {
    const T* a = A + m * K;
    T* c = C + m * N;
    for (size_t k = 0; k < K; ++k) {
      if (a[k] != T(0)) axpy(a[k], B + k * N, c, N);
    }
  }
}

// C(M,N) += A(K,M)^T * B(K,N)
template <typename T>
void gemm_tn(size_t M, size_t N, size_t K, const T* A, const T* B, T* C) {
  for (size_t k = 0; k < K; ++k) {
    const T* a = A + k * M;
    const T* b = B + k * N;
    for (size_t m = 0; m < M; ++m) {
      if (a[m] != T(0)) axpy(a[m], b, C + m * N, N);
    }
  }
}

// C(M,N) += A(M,K) * B(N,K)^T
template <typename T>
void gemm_nt(size_t M, size_t N, size_t K, const T* A, const T* B, T* C) {
  for (size_t m = 0; m < M; ++m) {
    const T* a = A + m * K;
    T* c = C + m * N;
    for (size_t n = 0; n < N; ++n) c[n] += dot(a, B + n * K, K);
  }
}

// Unfolds a (C,T,H,W) volume for a kt x kh x kw kernel into a
// (C*kt*kh*kw) x (To*Ho*Wo) patch matrix. Out-of-range taps read zero.
template <typename T>
void vol2col(const T* x, int C, int Ti, int H, int W, int kt, int kh, int kw, int st, int sh,
             int sw, int pt, int ph, int pw, int To, int Ho, int Wo, T* col) {
  const size_t plane = static_cast<size_t>(To) * Ho * Wo;
  size_t row = 0;
  for (int c = 0; c < C; ++c) {
    const T* xc = x + static_cast<size_t>(c) * Ti * H * W;
    for (int dt = 0; dt < kt; ++dt) {
      for (int dh = 0; dh < kh; ++dh) {
        for (int dw = 0; dw < kw; ++dw, ++row) {
          T* dst = col + row * plane;
          for (int to = 0; to < To; ++to) {
            int ti = to * st - pt + dt;
            if (ti < 0 || ti >= Ti) {
              std::memset(dst, 0, sizeof(T) * Ho * Wo);
              dst += static_cast<size_t>(Ho) * Wo;
              continue;
            }
            const T* xt = xc + static_cast<size_t>(ti) * H * W;
            for (int ho = 0; ho < Ho; ++ho, dst += Wo) {
              int hi = ho * sh - ph + dh;
              if (hi < 0 || hi >= H) {
                std::memset(dst, 0, sizeof(T) * Wo);
                continue;
              }
              const T* xr = xt + static_cast<size_t>(hi) * W;
              for (int wo = 0; wo < Wo; ++wo) {
                int wi = wo * sw - pw + dw;
                dst[wo] = (wi >= 0 && wi < W) ? xr[wi] : T(0);
              }
            }
          }
        }
      }
    }
  }
}

// Transpose of vol2col: accumulates patch-matrix gradients back into the
// (C,T,H,W) volume.
template <typename T>
void col2vol(const T* col, int C, int Ti, int H, int W, int kt, int kh, int kw, int st, int sh,
             int sw, int pt, int ph, int pw, int To, int Ho, int Wo, T* x) {
  size_t row = 0;
  for (int c = 0; c < C; ++c) {
    T* xc = x + static_cast<size_t>(c) * Ti * H * W;
    for (int dt = 0; dt < kt; ++dt) {
      for (int dh = 0; dh < kh; ++dh) {
        for (int dw = 0; dw < kw; ++dw, ++row) {
          const T* src = col + row * (static_cast<size_t>(To) * Ho * Wo);
          for (int to = 0; to < To; ++to) {
            int ti = to * st - pt + dt;
            if (ti < 0 || ti >= Ti) {
              src += static_cast<size_t>(Ho) * Wo;
              continue;
            }
            T* xt = xc + static_cast<size_t>(ti) * H * W;
            for (int ho = 0; ho < Ho; ++ho, src += Wo) {
              int hi = ho * sh - ph + dh;
              if (hi < 0 || hi >= H) continue;
              T* xr = xt + static_cast<size_t>(hi) * W;
              for (int wo = 0; wo < Wo; ++wo) {
                int wi = wo * sw - pw + dw;
                if (wi >= 0 && wi < W) xr[wi] += src[wo];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace mpf::kernels
