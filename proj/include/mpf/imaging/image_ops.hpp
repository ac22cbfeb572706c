#pragma once

#include <cmath>

#include "mpf/core/tensor.hpp"

namespace mpf::imaging {

// Forward-warps an RGB frame (3,H,W) along a displacement field (2,H,W)
// scaled by `factor`, bilinear splatting. Pixels the splat never reaches
// fall back to `fallback`. A zero field reproduces `src` bit-exactly.
TensorF forward_warp(const TensorF& src, const TensorF& field, float factor,
                     const TensorF& fallback);

// Luminance (Rec. 601) of an RGB frame (3,H,W) -> (H,W).
TensorF luminance(const TensorF& rgb);

// Per-time-slice bilinear upsample of (C,T,h,w) to (C,T,H,W), half-pixel
// centers, and its transpose for the backward pass.
template <typename T>
void upsample_bilinear_hw(const T* src, size_t planes, int h, int w, T* dst, int H, int W) {
  const double sy = static_cast<double>(h) / H;
  const double sx = static_cast<double>(w) / W;
  for (size_t p = 0; p < planes; ++p) {
    const T* s = src + p * static_cast<size_t>(h) * w;
    T* d = dst + p * static_cast<size_t>(H) * W;
    for (int y = 0; y < H; ++y) {
      double fy = (y + 0.5) * sy - 0.5;
      int y0 = static_cast<int>(std::floor(fy));
      double wy = fy - y0;
      int y0c = y0 < 0 ? 0 : (y0 >= h ? h - 1 : y0);
      int y1c = y0 + 1 < 0 ? 0 : (y0 + 1 >= h ? h - 1 : y0 + 1);
      for (int x = 0; x < W; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        int x0 = static_cast<int>(std::floor(fx));
        double wx = fx - x0;
        int x0c = x0 < 0 ? 0 : (x0 >= w ? w - 1 : x0);
        int x1c = x0 + 1 < 0 ? 0 : (x0 + 1 >= w ? w - 1 : x0 + 1);
        double v = (1 - wy) * ((1 - wx) * s[y0c * w + x0c] + wx * s[y0c * w + x1c]) +
                   wy * ((1 - wx) * s[y1c * w + x0c] + wx * s[y1c * w + x1c]);
        d[y * W + x] = static_cast<T>(v);
      }
    }
  }
}

template <typename T>
void upsample_bilinear_hw_backward(const T* gdst, size_t planes, int h, int w, T* gsrc, int H,
                                   int W) {
  const double sy = static_cast<double>(h) / H;
  const double sx = static_cast<double>(w) / W;
  for (size_t p = 0; p < planes; ++p) {
    const T* gd = gdst + p * static_cast<size_t>(H) * W;
    T* gs = gsrc + p * static_cast<size_t>(h) * w;
    for (int y = 0; y < H; ++y) {
      double fy = (y + 0.5) * sy - 0.5;
      int y0 = static_cast<int>(std::floor(fy));
      double wy = fy - y0;
      int y0c = y0 < 0 ? 0 : (y0 >= h ? h - 1 : y0);
      int y1c = y0 + 1 < 0 ? 0 : (y0 + 1 >= h ? h - 1 : y0 + 1);
      for (int x = 0; x < W; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        int x0 = static_cast<int>(std::floor(fx));
        double wx = fx - x0;
        int x0c = x0 < 0 ? 0 : (x0 >= w ? w - 1 : x0);
        int x1c = x0 + 1 < 0 ? 0 : (x0 + 1 >= w ? w - 1 : x0 + 1);
        T g = gd[y * W + x];
        gs[y0c * w + x0c] += static_cast<T>((1 - wy) * (1 - wx)) * g;
        gs[y0c * w + x1c] += static_cast<T>((1 - wy) * wx) * g;
        gs[y1c * w + x0c] += static_cast<T>(wy * (1 - wx)) * g;
        gs[y1c * w + x1c] += static_cast<T>(wy * wx) * g;
      }
    }
  }
}

}  // namespace mpf::imaging
