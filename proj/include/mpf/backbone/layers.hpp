#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "mpf/backbone/config.hpp"
#include "mpf/backbone/params.hpp"
#include "mpf/kernels/gemm.hpp"

// Forward/backward building blocks of the CA-I3D encoder. Each layer is a
// stateless descriptor over a ParamSet; the per-call trace objects hold
// whatever the backward pass needs.
namespace mpf::backbone {

template <typename T>
struct ConvTrace {
  Tensor<T> patches;              // col matrix (or the raw input on the 1x1x1 path)
  bool patches_are_input = false;
  std::vector<uint32_t> x_dims;
  Tensor<T> y;                    // post-activation output (relu mask source)
};

template <typename T>
struct Conv3d {
  std::string w_name, b_name;
  int ci = 0, co = 0;
  int kt = 1, kh = 1, kw = 1;
  int st = 1, sh = 1, sw = 1;
  int pt = 0, ph = 0, pw = 0;
  bool relu = true;

  static Conv3d unit(const std::string& prefix, int ci, int co, bool relu = true) {
    Conv3d c;
    c.w_name = prefix + ".weight";
    c.b_name = prefix + ".bias";
    c.ci = ci;
    c.co = co;
    c.relu = relu;
    return c;
  }

  static Conv3d same3(const std::string& prefix, int ci, int co, int st, int sh, int sw,
                      bool relu = true) {
    Conv3d c = unit(prefix, ci, co, relu);
    c.kt = c.kh = c.kw = 3;
    c.pt = c.ph = c.pw = 1;
    c.st = st;
    c.sh = sh;
    c.sw = sw;
    return c;
  }

  void register_params(ParamSet<T>& ps) const {
    ps.add(w_name, {static_cast<uint32_t>(co), static_cast<uint32_t>(ci),
                    static_cast<uint32_t>(kt), static_cast<uint32_t>(kh),
                    static_cast<uint32_t>(kw)});
    ps.add(b_name, {static_cast<uint32_t>(co)});
  }

  std::array<int, 3> out_dims(int Ti, int H, int W) const {
    return {(Ti + 2 * pt - kt) / st + 1, (H + 2 * ph - kh) / sh + 1,
            (W + 2 * pw - kw) / sw + 1};
  }

  bool is_pointwise() const {
    return kt == 1 && kh == 1 && kw == 1 && st == 1 && sh == 1 && sw == 1 && pt == 0 &&
           ph == 0 && pw == 0;
  }

  Tensor<T> forward(const ParamSet<T>& ps, const Tensor<T>& x, ConvTrace<T>* tr) const {
    check(x.rank() == 4 && static_cast<int>(x.dim(0)) == ci,
          "conv " + w_name + ": input channel mismatch");
    const int Ti = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto [To, Ho, Wo] = out_dims(Ti, H, W);
    const size_t V = static_cast<size_t>(To) * Ho * Wo;
    const size_t K = static_cast<size_t>(ci) * kt * kh * kw;
    const Tensor<T>& w = ps.at(w_name);
    const Tensor<T>& b = ps.at(b_name);

    Tensor<T> y({static_cast<uint32_t>(co), static_cast<uint32_t>(To),
                 static_cast<uint32_t>(Ho), static_cast<uint32_t>(Wo)});
    const T* patches = nullptr;
    Tensor<T> col;
    if (is_pointwise()) {
      patches = x.data();
    } else {
      col = Tensor<T>({static_cast<uint32_t>(K), static_cast<uint32_t>(V)});
      kernels::vol2col(x.data(), ci, Ti, H, W, kt, kh, kw, st, sh, sw, pt, ph, pw, To, Ho, Wo,
                       col.data());
      patches = col.data();
    }
    kernels::gemm_nn(co, V, K, w.data(), patches, y.data());
    for (int o = 0; o < co; ++o) {
      T* row = y.data() + static_cast<size_t>(o) * V;
      const T bias = b[o];
      if (bias != T(0))
        for (size_t i = 0; i < V; ++i) row[i] += bias;
    }
    if (relu) kernels::relu(y.data(), y.data(), y.size());
    if (tr) {
      tr->patches_are_input = is_pointwise();
      if (tr->patches_are_input)
        tr->patches = x;
      else
        tr->patches = std::move(col);
      tr->x_dims = x.dims();
      tr->y = y;
    }
    return y;
  }

  // Accumulates weight/bias grads into gr and returns grad wrt the input.
  Tensor<T> backward(const ParamSet<T>& ps, const Tensor<T>& gy, const ConvTrace<T>& tr,
                     ParamSet<T>& gr) const {
    const int Ti = tr.x_dims[1], H = tr.x_dims[2], W = tr.x_dims[3];
    const auto [To, Ho, Wo] = out_dims(Ti, H, W);
    const size_t V = static_cast<size_t>(To) * Ho * Wo;
    const size_t K = static_cast<size_t>(ci) * kt * kh * kw;

    Tensor<T> g({static_cast<uint32_t>(co), static_cast<uint32_t>(To),
                 static_cast<uint32_t>(Ho), static_cast<uint32_t>(Wo)});
    if (relu)
      kernels::relu_mask(tr.y.data(), gy.data(), g.data(), g.size());
    else
      std::memcpy(g.data(), gy.data(), g.size() * sizeof(T));

    Tensor<T>& gb = gr.at(b_name);
    for (int o = 0; o < co; ++o)
      gb[o] += kernels::vsum(g.data() + static_cast<size_t>(o) * V, V);

    kernels::gemm_nt(co, K, V, g.data(), tr.patches.data(), gr.at(w_name).data());

    const Tensor<T>& w = ps.at(w_name);
    if (tr.patches_are_input) {
      Tensor<T> gx(tr.x_dims);
      kernels::gemm_tn(K, V, co, w.data(), g.data(), gx.data());
      return gx;
    }
    Tensor<T> gcol({static_cast<uint32_t>(K), static_cast<uint32_t>(V)});
    kernels::gemm_tn(K, V, co, w.data(), g.data(), gcol.data());
    Tensor<T> gx(tr.x_dims);
    kernels::col2vol(gcol.data(), ci, Ti, H, W, kt, kh, kw, st, sh, sw, pt, ph, pw, To, Ho, Wo,
                     gx.data());
    return gx;
  }
};

template <typename T>
struct PoolTrace {
  std::vector<int64_t> argmax;
  std::vector<uint32_t> x_dims;
};

template <typename T>
struct MaxPool3d {
  int kt = 1, kh = 3, kw = 3;
  int st = 1, sh = 2, sw = 2;
  int pt = 0, ph = 1, pw = 1;

  static MaxPool3d spatial_halving() { return {}; }
  static MaxPool3d same3x3x3() { return {3, 3, 3, 1, 1, 1, 1, 1, 1}; }

  std::array<int, 3> out_dims(int Ti, int H, int W) const {
    return {(Ti + 2 * pt - kt) / st + 1, (H + 2 * ph - kh) / sh + 1,
            (W + 2 * pw - kw) / sw + 1};
  }

  Tensor<T> forward(const Tensor<T>& x, PoolTrace<T>* tr) const {
    const int C = x.dim(0), Ti = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto [To, Ho, Wo] = out_dims(Ti, H, W);
    Tensor<T> y({static_cast<uint32_t>(C), static_cast<uint32_t>(To),
                 static_cast<uint32_t>(Ho), static_cast<uint32_t>(Wo)});
    if (tr) {
      tr->argmax.assign(y.size(), -1);
      tr->x_dims = x.dims();
    }
    size_t oi = 0;
    for (int c = 0; c < C; ++c) {
      const T* xc = x.data() + static_cast<size_t>(c) * Ti * H * W;
      for (int to = 0; to < To; ++to)
        for (int ho = 0; ho < Ho; ++ho)
          for (int wo = 0; wo < Wo; ++wo, ++oi) {
            T best = -std::numeric_limits<T>::infinity();
            int64_t arg = -1;
            for (int dt = 0; dt < kt; ++dt) {
              const int ti = to * st - pt + dt;
              if (ti < 0 || ti >= Ti) continue;
              for (int dh = 0; dh < kh; ++dh) {
                const int hi = ho * sh - ph + dh;
                if (hi < 0 || hi >= H) continue;
                for (int dw = 0; dw < kw; ++dw) {
                  const int wi = wo * sw - pw + dw;
                  if (wi < 0 || wi >= W) continue;
                  const size_t ii = (static_cast<size_t>(ti) * H + hi) * W + wi;
                  if (xc[ii] > best) {
                    best = xc[ii];
                    arg = static_cast<int64_t>(c) * Ti * H * W + ii;
                  }
                }
              }
            }
            y[oi] = best;
            if (tr) tr->argmax[oi] = arg;
          }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const PoolTrace<T>& tr) const {
    Tensor<T> gx(tr.x_dims);
    for (size_t i = 0; i < gy.size(); ++i)
      if (tr.argmax[i] >= 0) gx[tr.argmax[i]] += gy[i];
    return gx;
  }
};

template <typename T>
struct CaTrace {
  Tensor<T> x;
  Tensor<T> pooled;  // (C, T+H+W)
  Tensor<T> z1r;     // (mid, T+H+W), post-relu
  Tensor<T> gates;   // (C, T+H+W), post-sigmoid
};

// 3D coordinate attention: factorized mean pooling along T, H and W, a
// shared bottleneck over the concatenated descriptors, and a sigmoid gate
// per axis multiplied back onto the input.
template <typename T>
struct CoordAttention3d {
  std::string prefix;
  int channels = 0;
  int mid = 0;

  void register_params(ParamSet<T>& ps) const {
    ps.add(prefix + ".w1", {static_cast<uint32_t>(mid), static_cast<uint32_t>(channels)});
    ps.add(prefix + ".b1", {static_cast<uint32_t>(mid)});
    ps.add(prefix + ".w2", {static_cast<uint32_t>(channels), static_cast<uint32_t>(mid)});
    ps.add(prefix + ".b2", {static_cast<uint32_t>(channels)});
  }

  Tensor<T> forward(const ParamSet<T>& ps, const Tensor<T>& x, CaTrace<T>* tr) const {
    const int C = x.dim(0), Ti = x.dim(1), H = x.dim(2), W = x.dim(3);
    check(C == channels, "ca " + prefix + ": channel mismatch");
    const int P = Ti + H + W;
    Tensor<T> pooled({static_cast<uint32_t>(C), static_cast<uint32_t>(P)});
    for (int c = 0; c < C; ++c) {
      const T* xc = x.data() + static_cast<size_t>(c) * Ti * H * W;
      T* row = pooled.data() + static_cast<size_t>(c) * P;
      for (int t = 0; t < Ti; ++t)
        row[t] = kernels::vsum(xc + static_cast<size_t>(t) * H * W,
                               static_cast<size_t>(H) * W) /
                 static_cast<T>(H * W);
      for (int t = 0; t < Ti; ++t)
        for (int h = 0; h < H; ++h) {
          const T s = kernels::vsum(xc + (static_cast<size_t>(t) * H + h) * W, W);
          row[Ti + h] += s / static_cast<T>(Ti * W);
        }
      for (int t = 0; t < Ti; ++t)
        for (int h = 0; h < H; ++h) {
          const T* xr = xc + (static_cast<size_t>(t) * H + h) * W;
          for (int w = 0; w < W; ++w) row[Ti + H + w] += xr[w] / static_cast<T>(Ti * H);
        }
    }

    const Tensor<T>& w1 = ps.at(prefix + ".w1");
    const Tensor<T>& b1 = ps.at(prefix + ".b1");
    const Tensor<T>& w2 = ps.at(prefix + ".w2");
    const Tensor<T>& b2 = ps.at(prefix + ".b2");

    Tensor<T> z1({static_cast<uint32_t>(mid), static_cast<uint32_t>(P)});
    kernels::gemm_nn(mid, P, C, w1.data(), pooled.data(), z1.data());
    for (int m = 0; m < mid; ++m) {
      T* row = z1.data() + static_cast<size_t>(m) * P;
      for (int p = 0; p < P; ++p) row[p] += b1[m];
    }
    kernels::relu(z1.data(), z1.data(), z1.size());

    Tensor<T> gates({static_cast<uint32_t>(C), static_cast<uint32_t>(P)});
    kernels::gemm_nn(C, P, mid, w2.data(), z1.data(), gates.data());
    for (int c = 0; c < C; ++c) {
      T* row = gates.data() + static_cast<size_t>(c) * P;
      for (int p = 0; p < P; ++p) row[p] = T(1) / (T(1) + std::exp(-(row[p] + b2[c])));
    }

    Tensor<T> y(x.dims());
    for (int c = 0; c < C; ++c) {
      const T* gt = gates.data() + static_cast<size_t>(c) * P;
      const T* gh = gt + Ti;
      const T* gw = gh + H;
      const T* xc = x.data() + static_cast<size_t>(c) * Ti * H * W;
      T* yc = y.data() + static_cast<size_t>(c) * Ti * H * W;
      size_t i = 0;
      for (int t = 0; t < Ti; ++t)
        for (int h = 0; h < H; ++h) {
          const T gth = gt[t] * gh[h];
          for (int w = 0; w < W; ++w, ++i) yc[i] = xc[i] * gth * gw[w];
        }
    }
    if (tr) {
      tr->x = x;
      tr->pooled = std::move(pooled);
      tr->z1r = std::move(z1);
      tr->gates = std::move(gates);
    }
    return y;
  }

  Tensor<T> backward(const ParamSet<T>& ps, const Tensor<T>& gy, const CaTrace<T>& tr,
                     ParamSet<T>& gr) const {
    const int C = tr.x.dim(0), Ti = tr.x.dim(1), H = tr.x.dim(2), W = tr.x.dim(3);
    const int P = Ti + H + W;

    Tensor<T> gx(tr.x.dims());
    Tensor<T> ggates({static_cast<uint32_t>(C), static_cast<uint32_t>(P)});
    for (int c = 0; c < C; ++c) {
      const T* gt = tr.gates.data() + static_cast<size_t>(c) * P;
      const T* gh = gt + Ti;
      const T* gw = gh + H;
      const T* xc = tr.x.data() + static_cast<size_t>(c) * Ti * H * W;
      const T* gyc = gy.data() + static_cast<size_t>(c) * Ti * H * W;
      T* gxc = gx.data() + static_cast<size_t>(c) * Ti * H * W;
      T* grow = ggates.data() + static_cast<size_t>(c) * P;
      size_t i = 0;
      for (int t = 0; t < Ti; ++t)
        for (int h = 0; h < H; ++h) {
          const T gth = gt[t] * gh[h];
          for (int w = 0; w < W; ++w, ++i) {
            gxc[i] = gyc[i] * gth * gw[w];
            const T common = gyc[i] * xc[i];
            grow[t] += common * gh[h] * gw[w];
            grow[Ti + h] += common * gt[t] * gw[w];
            grow[Ti + H + w] += common * gth;
          }
        }
    }

    // through the sigmoid
    Tensor<T> gz2 = ggates;
    for (size_t i = 0; i < gz2.size(); ++i) {
      const T s = tr.gates[i];
      gz2[i] *= s * (T(1) - s);
    }

    Tensor<T>& gb2 = gr.at(prefix + ".b2");
    for (int c = 0; c < C; ++c)
      gb2[c] += kernels::vsum(gz2.data() + static_cast<size_t>(c) * P, P);
    kernels::gemm_nt(C, mid, P, gz2.data(), tr.z1r.data(), gr.at(prefix + ".w2").data());

    Tensor<T> gz1r({static_cast<uint32_t>(mid), static_cast<uint32_t>(P)});
    kernels::gemm_tn(mid, P, C, ps.at(prefix + ".w2").data(), gz2.data(), gz1r.data());
    Tensor<T> gz1({static_cast<uint32_t>(mid), static_cast<uint32_t>(P)});
    kernels::relu_mask(tr.z1r.data(), gz1r.data(), gz1.data(), gz1.size());

    Tensor<T>& gb1 = gr.at(prefix + ".b1");
    for (int m = 0; m < mid; ++m)
      gb1[m] += kernels::vsum(gz1.data() + static_cast<size_t>(m) * P, P);
    kernels::gemm_nt(mid, C, P, gz1.data(), tr.pooled.data(), gr.at(prefix + ".w1").data());

    Tensor<T> gpooled({static_cast<uint32_t>(C), static_cast<uint32_t>(P)});
    kernels::gemm_tn(C, P, mid, ps.at(prefix + ".w1").data(), gz1.data(), gpooled.data());

    for (int c = 0; c < C; ++c) {
      const T* grow = gpooled.data() + static_cast<size_t>(c) * P;
      T* gxc = gx.data() + static_cast<size_t>(c) * Ti * H * W;
      const T inv_hw = T(1) / static_cast<T>(H * W);
      const T inv_tw = T(1) / static_cast<T>(Ti * W);
      const T inv_th = T(1) / static_cast<T>(Ti * H);
      size_t i = 0;
      for (int t = 0; t < Ti; ++t)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w, ++i)
            gxc[i] += grow[t] * inv_hw + grow[Ti + h] * inv_tw + grow[Ti + H + w] * inv_th;
    }
    return gx;
  }
};

template <typename T>
struct LinearTrace {
  Tensor<T> x;  // flattened input
};

template <typename T>
struct Linear {
  std::string w_name, b_name;
  int in = 0, out = 0;

  static Linear make(const std::string& prefix, int in, int out) {
    return {prefix + ".weight", prefix + ".bias", in, out};
  }

  void register_params(ParamSet<T>& ps) const {
    ps.add(w_name, {static_cast<uint32_t>(out), static_cast<uint32_t>(in)});
    ps.add(b_name, {static_cast<uint32_t>(out)});
  }

  Tensor<T> forward(const ParamSet<T>& ps, const Tensor<T>& x_flat, LinearTrace<T>* tr) const {
    check(static_cast<int>(x_flat.size()) == in, "linear " + w_name + ": input size mismatch");
    const Tensor<T>& w = ps.at(w_name);
    const Tensor<T>& b = ps.at(b_name);
    Tensor<T> y({static_cast<uint32_t>(out)});
    for (int o = 0; o < out; ++o)
      y[o] = kernels::dot(w.data() + static_cast<size_t>(o) * in, x_flat.data(), in) + b[o];
    if (tr) tr->x = x_flat;
    return y;
  }

  Tensor<T> backward(const ParamSet<T>& ps, const Tensor<T>& gy, const LinearTrace<T>& tr,
                     ParamSet<T>& gr) const {
    Tensor<T>& gw = gr.at(w_name);
    Tensor<T>& gb = gr.at(b_name);
    const Tensor<T>& w = ps.at(w_name);
    Tensor<T> gx({static_cast<uint32_t>(in)});
    for (int o = 0; o < out; ++o) {
      gb[o] += gy[o];
      if (gy[o] != T(0)) {
        kernels::axpy(gy[o], tr.x.data(), gw.data() + static_cast<size_t>(o) * in, in);
        kernels::axpy(gy[o], w.data() + static_cast<size_t>(o) * in, gx.data(), in);
      }
    }
    return gx;
  }
};

template <typename T>
struct InceptionTrace {
  ConvTrace<T> b1, b2r, b2, b3r, b3, b4c;
  PoolTrace<T> b4p;
  CaTrace<T> ca;
};

template <typename T>
struct Inception3d {
  std::string prefix;
  InceptionSpec spec;
  int in_channels = 0;
  Conv3d<T> c_b1, c_b2r, c_b2, c_b3r, c_b3, c_b4;
  MaxPool3d<T> pool_b4;
  CoordAttention3d<T> ca;

  static Inception3d make(const std::string& prefix, int in_channels, const InceptionSpec& spec,
                          int ca_mid) {
    Inception3d m;
    m.prefix = prefix;
    m.spec = spec;
    m.in_channels = in_channels;
    m.c_b1 = Conv3d<T>::unit(prefix + ".b1", in_channels, spec.b1);
    m.c_b2r = Conv3d<T>::unit(prefix + ".b2r", in_channels, spec.b2_reduce);
    m.c_b2 = Conv3d<T>::same3(prefix + ".b2", spec.b2_reduce, spec.b2, 1, 1, 1);
    m.c_b3r = Conv3d<T>::unit(prefix + ".b3r", in_channels, spec.b3_reduce);
    m.c_b3 = Conv3d<T>::same3(prefix + ".b3", spec.b3_reduce, spec.b3, 1, 1, 1);
    m.c_b4 = Conv3d<T>::unit(prefix + ".b4", in_channels, spec.b4);
    m.pool_b4 = MaxPool3d<T>::same3x3x3();
    m.ca = {prefix + ".ca", spec.out_channels(), ca_mid};
    return m;
  }

  void register_params(ParamSet<T>& ps) const {
    c_b1.register_params(ps);
    c_b2r.register_params(ps);
    c_b2.register_params(ps);
    c_b3r.register_params(ps);
    c_b3.register_params(ps);
    c_b4.register_params(ps);
    ca.register_params(ps);
  }

  Tensor<T> forward(const ParamSet<T>& ps, const Tensor<T>& x, InceptionTrace<T>* tr) const {
    auto* t = tr;
    Tensor<T> y1 = c_b1.forward(ps, x, t ? &t->b1 : nullptr);
    Tensor<T> y2 = c_b2.forward(ps, c_b2r.forward(ps, x, t ? &t->b2r : nullptr),
                                t ? &t->b2 : nullptr);
    Tensor<T> y3 = c_b3.forward(ps, c_b3r.forward(ps, x, t ? &t->b3r : nullptr),
                                t ? &t->b3 : nullptr);
    Tensor<T> y4 = c_b4.forward(ps, pool_b4.forward(x, t ? &t->b4p : nullptr),
                                t ? &t->b4c : nullptr);

    const uint32_t Ti = y1.dim(1), H = y1.dim(2), W = y1.dim(3);
    Tensor<T> cat({static_cast<uint32_t>(spec.out_channels()), Ti, H, W});
    const size_t plane = static_cast<size_t>(Ti) * H * W;
    T* dst = cat.data();
    for (const Tensor<T>* b : {&y1, &y2, &y3, &y4}) {
      std::memcpy(dst, b->data(), b->size() * sizeof(T));
      dst += b->size();
    }
    (void)plane;
    return ca.forward(ps, cat, t ? &t->ca : nullptr);
  }

  Tensor<T> backward(const ParamSet<T>& ps, const Tensor<T>& gy, const InceptionTrace<T>& tr,
                     ParamSet<T>& gr) const {
    Tensor<T> gcat = ca.backward(ps, gy, tr.ca, gr);
    const uint32_t Ti = gcat.dim(1), H = gcat.dim(2), W = gcat.dim(3);
    const size_t plane = static_cast<size_t>(Ti) * H * W;

    auto slice = [&](int c0, int nc) {
      Tensor<T> g({static_cast<uint32_t>(nc), Ti, H, W});
      std::memcpy(g.data(), gcat.data() + static_cast<size_t>(c0) * plane,
                  g.size() * sizeof(T));
      return g;
    };

    int c0 = 0;
    Tensor<T> g1 = slice(c0, spec.b1);
    c0 += spec.b1;
    Tensor<T> g2 = slice(c0, spec.b2);
    c0 += spec.b2;
    Tensor<T> g3 = slice(c0, spec.b3);
    c0 += spec.b3;
    Tensor<T> g4 = slice(c0, spec.b4);

    Tensor<T> gx = c_b1.backward(ps, g1, tr.b1, gr);
    kernels::vadd(c_b2r.backward(ps, c_b2.backward(ps, g2, tr.b2, gr), tr.b2r, gr).data(),
                  gx.data(), gx.size());
    kernels::vadd(c_b3r.backward(ps, c_b3.backward(ps, g3, tr.b3, gr), tr.b3r, gr).data(),
                  gx.data(), gx.size());
    kernels::vadd(pool_b4.backward(c_b4.backward(ps, g4, tr.b4c, gr), tr.b4p).data(), gx.data(),
                  gx.size());
    return gx;
  }
};

}  // namespace mpf::backbone
