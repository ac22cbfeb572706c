#include "mpf/imaging/image_ops.hpp"

namespace mpf::imaging {

TensorF forward_warp(const TensorF& src, const TensorF& field, float factor,
                     const TensorF& fallback) {
  check(src.rank() == 3 && src.dim(0) == 3, "forward_warp: src must be (3,H,W)");
  check(field.rank() == 3 && field.dim(0) == 2, "forward_warp: field must be (2,H,W)");
  check(src.dim(1) == field.dim(1) && src.dim(2) == field.dim(2),
        "forward_warp: src/field size mismatch");
  check(fallback.same_shape(src), "forward_warp: fallback shape mismatch");
  const int H = static_cast<int>(src.dim(1));
  const int W = static_cast<int>(src.dim(2));
  const float* u = field.data();
  const float* v = field.data() + static_cast<size_t>(H) * W;

  std::vector<double> acc(static_cast<size_t>(3) * H * W, 0.0);
  std::vector<double> wgt(static_cast<size_t>(H) * W, 0.0);

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const size_t p = static_cast<size_t>(y) * W + x;
      const double tx = x + static_cast<double>(factor) * u[p];
      const double ty = y + static_cast<double>(factor) * v[p];
      const int x0 = static_cast<int>(std::floor(tx));
      const int y0 = static_cast<int>(std::floor(ty));
      const double fx = tx - x0;
      const double fy = ty - y0;
      const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
      const double w10 = fy * (1 - fx), w11 = fy * fx;
      const int xs[2] = {x0, x0 + 1};
      const int ys[2] = {y0, y0 + 1};
      const double ws[2][2] = {{w00, w01}, {w10, w11}};
      for (int dy = 0; dy < 2; ++dy) {
        if (ys[dy] < 0 || ys[dy] >= H) continue;
        for (int dx = 0; dx < 2; ++dx) {
          if (xs[dx] < 0 || xs[dx] >= W) continue;
          const double wq = ws[dy][dx];
          if (wq == 0.0) continue;
          const size_t q = static_cast<size_t>(ys[dy]) * W + xs[dx];
          wgt[q] += wq;
          for (int c = 0; c < 3; ++c)
            acc[static_cast<size_t>(c) * H * W + q] +=
                wq * src[static_cast<size_t>(c) * H * W + p];
        }
      }
    }
  }

  TensorF out(src.dims(), src.axes());
  constexpr double kMinWeight = 1e-6;
  for (size_t q = 0; q < wgt.size(); ++q) {
    if (wgt[q] > kMinWeight) {
      for (int c = 0; c < 3; ++c) {
        const size_t i = static_cast<size_t>(c) * wgt.size() + q;
        out[i] = static_cast<float>(acc[i] / wgt[q]);
      }
    } else {
      for (int c = 0; c < 3; ++c) {
        const size_t i = static_cast<size_t>(c) * wgt.size() + q;
        out[i] = fallback[i];
      }
    }
  }
  return out;
}

TensorF luminance(const TensorF& rgb) {
  check(rgb.rank() == 3 && rgb.dim(0) == 3, "luminance: expected (3,H,W)");
  const size_t plane = static_cast<size_t>(rgb.dim(1)) * rgb.dim(2);
  TensorF out({rgb.dim(1), rgb.dim(2)});
  const float* r = rgb.data();
  const float* g = r + plane;
  const float* b = g + plane;
  for (size_t i = 0; i < plane; ++i)
    out[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
  return out;
}

}  // namespace mpf::imaging
