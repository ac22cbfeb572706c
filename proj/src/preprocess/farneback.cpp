#include <array>
#include <cmath>
#include <vector>

#include "mpf/preprocess/ports.hpp"

// Two-frame displacement estimation via quadratic polynomial expansion,
// iterated over a coarse-to-fine pyramid. Each pixel's neighborhood is fit
// as x^T A x + b^T x + c under a Gaussian applicability; the displacement
// solves A d = 0.5 (b1 - b2), aggregated over a box window.
namespace mpf::preprocess {

namespace {

struct Image {
  int h = 0, w = 0;
  std::vector<float> px;
  float at(int y, int x) const {
    y = y < 0 ? 0 : (y >= h ? h - 1 : y);
    x = x < 0 ? 0 : (x >= w ? w - 1 : x);
    return px[static_cast<size_t>(y) * w + x];
  }
};

// Expansion coefficients per pixel: A = [[a11,a12],[a12,a22]], b = (b1,b2).
struct PolyField {
  int h = 0, w = 0;
  std::vector<float> a11, a12, a22, b1, b2;
  void resize(int hh, int ww) {
    h = hh;
    w = ww;
    const size_t n = static_cast<size_t>(hh) * ww;
    a11.assign(n, 0);
    a12.assign(n, 0);
    a22.assign(n, 0);
    b1.assign(n, 0);
    b2.assign(n, 0);
  }
};

// 6x6 Gauss-Jordan inverse; the Gram matrix of the quadratic basis is tiny
// and well-conditioned for the sigmas used here.
std::array<double, 36> invert6(std::array<double, 36> m) {
  std::array<double, 36> inv{};
  for (int i = 0; i < 6; ++i) inv[i * 6 + i] = 1.0;
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::fabs(m[r * 6 + col]) > std::fabs(m[piv * 6 + col])) piv = r;
    if (piv != col)
      for (int c = 0; c < 6; ++c) {
        std::swap(m[piv * 6 + c], m[col * 6 + c]);
        std::swap(inv[piv * 6 + c], inv[col * 6 + c]);
      }
    const double d = m[col * 6 + col];
    for (int c = 0; c < 6; ++c) {
      m[col * 6 + c] /= d;
      inv[col * 6 + c] /= d;
    }
    for (int r = 0; r < 6; ++r) {
      if (r == col) continue;
      const double f = m[r * 6 + col];
      if (f == 0.0) continue;
      for (int c = 0; c < 6; ++c) {
        m[r * 6 + c] -= f * m[col * 6 + c];
        inv[r * 6 + c] -= f * inv[col * 6 + c];
      }
    }
  }
  return inv;
}

// Basis order {1, x, y, x^2, y^2, xy}.
std::array<double, 36> gram_inverse(int n, double sigma) {
  std::vector<double> g(2 * n + 1);
  for (int i = -n; i <= n; ++i) g[i + n] = std::exp(-0.5 * i * i / (sigma * sigma));
  auto basis = [](int k, double x, double y) {
    switch (k) {
      case 0: return 1.0;
      case 1: return x;
      case 2: return y;
      case 3: return x * x;
      case 4: return y * y;
      default: return x * y;
    }
  };
  std::array<double, 36> G{};
  for (int dy = -n; dy <= n; ++dy)
    for (int dx = -n; dx <= n; ++dx) {
      const double w = g[dy + n] * g[dx + n];
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
          G[i * 6 + j] += w * basis(i, dx, dy) * basis(j, dx, dy);
    }
  return invert6(G);
}

void poly_expand(const Image& img, int n, double sigma, PolyField& out) {
  out.resize(img.h, img.w);
  std::vector<double> g(2 * n + 1), gx(2 * n + 1), gxx(2 * n + 1);
  for (int i = -n; i <= n; ++i) {
    g[i + n] = std::exp(-0.5 * i * i / (sigma * sigma));
    gx[i + n] = g[i + n] * i;
    gxx[i + n] = g[i + n] * i * i;
  }
  const auto Ginv = gram_inverse(n, sigma);

  const int h = img.h, w = img.w;
  // horizontal moments per row: sum g*I, g*x*I, g*x^2*I
  std::vector<double> h0(static_cast<size_t>(h) * w), h1(h0.size()), h2(h0.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s0 = 0, s1 = 0, s2 = 0;
      for (int d = -n; d <= n; ++d) {
        const double v = img.at(y, x + d);
        s0 += g[d + n] * v;
        s1 += gx[d + n] * v;
        s2 += gxx[d + n] * v;
      }
      const size_t p = static_cast<size_t>(y) * w + x;
      h0[p] = s0;
      h1[p] = s1;
      h2[p] = s2;
    }

  auto v_at = [&](const std::vector<double>& f, int y, int x) {
    y = y < 0 ? 0 : (y >= h ? h - 1 : y);
    return f[static_cast<size_t>(y) * w + x];
  };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m00 = 0, m01 = 0, m10 = 0, m02 = 0, m20 = 0, m11 = 0;
      for (int d = -n; d <= n; ++d) {
        m00 += g[d + n] * v_at(h0, y + d, x);
        m01 += g[d + n] * v_at(h1, y + d, x);
        m10 += gx[d + n] * v_at(h0, y + d, x);
        m02 += g[d + n] * v_at(h2, y + d, x);
        m20 += gxx[d + n] * v_at(h0, y + d, x);
        m11 += gx[d + n] * v_at(h1, y + d, x);
      }
      const double mom[6] = {m00, m01, m10, m02, m20, m11};
      double f[6];
      for (int i = 0; i < 6; ++i) {
        double acc = 0;
        for (int j = 0; j < 6; ++j) acc += Ginv[i * 6 + j] * mom[j];
        f[i] = acc;
      }
      const size_t p = static_cast<size_t>(y) * w + x;
      out.b1[p] = static_cast<float>(f[1]);       // x coefficient
      out.b2[p] = static_cast<float>(f[2]);       // y coefficient
      out.a11[p] = static_cast<float>(f[3]);      // x^2
      out.a22[p] = static_cast<float>(f[4]);      // y^2
      out.a12[p] = static_cast<float>(f[5] / 2);  // xy
    }
}

Image downsample(const Image& img) {
  // 5-tap Gaussian then 2x decimation
  static const double k[5] = {1. / 16, 4. / 16, 6. / 16, 4. / 16, 1. / 16};
  Image tmp;
  tmp.h = img.h;
  tmp.w = img.w;
  tmp.px.resize(img.px.size());
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      double s = 0;
      for (int d = -2; d <= 2; ++d) s += k[d + 2] * img.at(y, x + d);
      tmp.px[static_cast<size_t>(y) * img.w + x] = static_cast<float>(s);
    }
  Image out;
  out.h = (img.h + 1) / 2;
  out.w = (img.w + 1) / 2;
  out.px.resize(static_cast<size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double s = 0;
      for (int d = -2; d <= 2; ++d) s += k[d + 2] * tmp.at(2 * y + d, 2 * x);
      out.px[static_cast<size_t>(y) * out.w + x] = static_cast<float>(s);
    }
  return out;
}

struct Flow {
  int h = 0, w = 0;
  std::vector<float> u, v;
  void resize(int hh, int ww) {
    h = hh;
    w = ww;
    u.assign(static_cast<size_t>(hh) * ww, 0);
    v.assign(static_cast<size_t>(hh) * ww, 0);
  }
};

Flow upsample_flow(const Flow& f, int H, int W) {
  Flow out;
  out.resize(H, W);
  const double sy = static_cast<double>(f.h) / H;
  const double sx = static_cast<double>(f.w) / W;
  auto sample = [&](const std::vector<float>& a, double fy, double fx) {
    int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
    double wy = fy - y0, wx = fx - x0;
    auto at = [&](int y, int x) {
      y = y < 0 ? 0 : (y >= f.h ? f.h - 1 : y);
      x = x < 0 ? 0 : (x >= f.w ? f.w - 1 : x);
      return static_cast<double>(a[static_cast<size_t>(y) * f.w + x]);
    };
    return (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
           wy * ((1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
  };
  const double gain = static_cast<double>(W) / f.w;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double fy = (y + 0.5) * sy - 0.5, fx = (x + 0.5) * sx - 0.5;
      out.u[static_cast<size_t>(y) * W + x] = static_cast<float>(gain * sample(f.u, fy, fx));
      out.v[static_cast<size_t>(y) * W + x] = static_cast<float>(gain * sample(f.v, fy, fx));
    }
  return out;
}

void box_blur(std::vector<double>& a, int h, int w, int radius, std::vector<double>& scratch) {
  scratch.resize(a.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      int cnt = 0;
      for (int d = -radius; d <= radius; ++d) {
        int xx = x + d;
        if (xx < 0 || xx >= w) continue;
        s += a[static_cast<size_t>(y) * w + xx];
        ++cnt;
      }
      scratch[static_cast<size_t>(y) * w + x] = s / cnt;
    }
  }
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      double s = 0;
      int cnt = 0;
      for (int d = -radius; d <= radius; ++d) {
        int yy = y + d;
        if (yy < 0 || yy >= h) continue;
        s += scratch[static_cast<size_t>(yy) * w + x];
        ++cnt;
      }
      a[static_cast<size_t>(y) * w + x] = s / cnt;
    }
  }
}

void solve_level(const PolyField& r1, const PolyField& r2, Flow& flow, int winsize,
                 int iterations) {
  const int h = r1.h, w = r1.w;
  const int radius = std::max(1, winsize / 2);
  const size_t n = static_cast<size_t>(h) * w;
  std::vector<double> t11(n), t12(n), t22(n), h1(n), h2(n), scratch;

  auto sample = [&](const std::vector<float>& a, double fy, double fx) {
    int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
    double wy = fy - y0, wx = fx - x0;
    auto at = [&](int y, int x) {
      y = y < 0 ? 0 : (y >= h ? h - 1 : y);
      x = x < 0 ? 0 : (x >= w ? w - 1 : x);
      return static_cast<double>(a[static_cast<size_t>(y) * w + x]);
    };
    return (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
           wy * ((1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
  };

  for (int it = 0; it < iterations; ++it) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const size_t p = static_cast<size_t>(y) * w + x;
        const double du = flow.u[p], dv = flow.v[p];
        const double sx = x + du, sy = y + dv;
        const double a11 = 0.5 * (r1.a11[p] + sample(r2.a11, sy, sx));
        const double a12 = 0.5 * (r1.a12[p] + sample(r2.a12, sy, sx));
        const double a22 = 0.5 * (r1.a22[p] + sample(r2.a22, sy, sx));
        const double db1 = 0.5 * (r1.b1[p] - sample(r2.b1, sy, sx)) + a11 * du + a12 * dv;
        const double db2 = 0.5 * (r1.b2[p] - sample(r2.b2, sy, sx)) + a12 * du + a22 * dv;
        t11[p] = a11 * a11 + a12 * a12;
        t12[p] = a12 * (a11 + a22);
        t22[p] = a12 * a12 + a22 * a22;
        h1[p] = a11 * db1 + a12 * db2;
        h2[p] = a12 * db1 + a22 * db2;
      }
    box_blur(t11, h, w, radius, scratch);
    box_blur(t12, h, w, radius, scratch);
    box_blur(t22, h, w, radius, scratch);
    box_blur(h1, h, w, radius, scratch);
    box_blur(h2, h, w, radius, scratch);
    for (size_t p = 0; p < n; ++p) {
      const double det = t11[p] * t22[p] - t12[p] * t12[p];
      if (std::fabs(det) > 1e-12) {
        flow.u[p] = static_cast<float>((t22[p] * h1[p] - t12[p] * h2[p]) / det);
        flow.v[p] = static_cast<float>((t11[p] * h2[p] - t12[p] * h1[p]) / det);
      } else {
        flow.u[p] = 0;
        flow.v[p] = 0;
      }
    }
  }
}

}  // namespace

TensorF farneback_flow(const TensorF& lum_a, const TensorF& lum_b, const FarnebackParams& p) {
  check(lum_a.rank() == 2 && lum_a.same_shape(lum_b), "farneback: expected matching (H,W)");
  check(p.pyr_scale == 0.5, "farneback: only pyr_scale 0.5 is supported");
  const int H = static_cast<int>(lum_a.dim(0));
  const int W = static_cast<int>(lum_a.dim(1));

  Image i1{H, W, std::vector<float>(lum_a.data(), lum_a.data() + lum_a.size())};
  Image i2{H, W, std::vector<float>(lum_b.data(), lum_b.data() + lum_b.size())};

  int levels = 1;
  while (levels < p.levels && (std::min(H, W) >> levels) >= 16) ++levels;

  std::vector<Image> p1{i1}, p2{i2};
  for (int l = 1; l < levels; ++l) {
    p1.push_back(downsample(p1.back()));
    p2.push_back(downsample(p2.back()));
  }

  Flow flow;
  flow.resize(p1.back().h, p1.back().w);
  PolyField r1, r2;
  for (int l = levels - 1; l >= 0; --l) {
    if (l != levels - 1) flow = upsample_flow(flow, p1[l].h, p1[l].w);
    poly_expand(p1[l], p.poly_n, p.poly_sigma, r1);
    poly_expand(p2[l], p.poly_n, p.poly_sigma, r2);
    solve_level(r1, r2, flow, p.winsize, p.iterations);
  }

  TensorF out({2, static_cast<uint32_t>(H), static_cast<uint32_t>(W)}, {"uv", "h", "w"});
  std::copy(flow.u.begin(), flow.u.end(), out.data());
  std::copy(flow.v.begin(), flow.v.end(), out.data() + flow.u.size());
  return out;
}

}  // namespace mpf::preprocess
