#pragma once

#include "mpf/backbone/layers.hpp"
#include "mpf/core/rng.hpp"

namespace mpf::backbone {

template <typename T>
struct BackboneTrace {
  Tensor<T> x_std;
  ConvTrace<T> stem;
  PoolTrace<T> pool1;
  InceptionTrace<T> inc_a;
  PoolTrace<T> pool2;
  InceptionTrace<T> inc_b;
  LinearTrace<T> head;
};

// The CA-I3D encoder: standardize -> 3x3x3 stem (stride 1,2,2) -> pool ->
// CA-Inception-A -> pool -> CA-Inception-B -> flatten+linear (embedding
// mode) or the Inception-B map (feature_map mode). One parameter set, value
// semantics; forward on one sample, trace optional.
template <typename T>
class Backbone {
 public:
  BackboneConfig cfg;
  ParamSet<T> params;
  std::string provenance = "scratch";
  std::string training_meta;  // free-form JSON text carried into checkpoints

  static Backbone build(const BackboneConfig& cfg) {
    cfg.validate();
    Backbone net;
    net.cfg = cfg;
    net.make_layers();
    net.register_all();
    net.init_params();
    return net;
  }

  // Same layer graph/param names, values taken from `donor` where names and
  // shapes match (the convolutional stage plus standardization); anything
  // else (the head) keeps its fresh initialization.
  static Backbone build_from_conv_stage(const BackboneConfig& cfg, const Backbone& donor) {
    Backbone net = build(cfg);
    for (const auto& name : net.params.names()) {
      if (name.rfind("head.", 0) == 0) continue;
      check(donor.params.has(name), "conv-stage transfer: donor missing param " + name);
      const auto& src = donor.params.at(name);
      auto& dst = net.params.at(name);
      check(src.dims() == dst.dims(), "conv-stage transfer: shape mismatch at " + name);
      dst = src;
    }
    return net;
  }

  void set_standardization(const std::vector<T>& mean, const std::vector<T>& stddev) {
    check(static_cast<int>(mean.size()) == cfg.in_channels &&
              static_cast<int>(stddev.size()) == cfg.in_channels,
          "standardization stats must have one entry per input channel");
    auto& m = params.at("stand.mean");
    auto& s = params.at("stand.std");
    for (int c = 0; c < cfg.in_channels; ++c) {
      check(stddev[c] > T(0), "standardization std must be positive");
      m[c] = mean[c];
      s[c] = stddev[c];
    }
  }

  Tensor<T> forward(const Tensor<T>& x, BackboneTrace<T>* tr) const {
    check(x.rank() == 4 && static_cast<int>(x.dim(0)) == cfg.in_channels &&
              static_cast<int>(x.dim(1)) == cfg.input_t &&
              static_cast<int>(x.dim(2)) == cfg.input_h &&
              static_cast<int>(x.dim(3)) == cfg.input_w,
          "backbone: input dims do not match config");

    Tensor<T> z = standardize(x);
    if (tr) tr->x_std = z;
    z = stem_.forward(params, z, tr ? &tr->stem : nullptr);
    z = pool1_.forward(z, tr ? &tr->pool1 : nullptr);
    z = inc_a_.forward(params, z, tr ? &tr->inc_a : nullptr);
    z = pool2_.forward(z, tr ? &tr->pool2 : nullptr);
    z = inc_b_.forward(params, z, tr ? &tr->inc_b : nullptr);
    if (cfg.output_mode == OutputMode::feature_map) return z;
    const uint32_t flat_n = static_cast<uint32_t>(z.size());
    Tensor<T> flat = Tensor<T>::of({flat_n}, std::move(z.values()));
    return head_.forward(params, flat, tr ? &tr->head : nullptr);
  }

  // gy: (embedding_dim) in embedding mode, the feature map otherwise.
  // Returns grad wrt the un-standardized input; accumulates into `grads`.
  Tensor<T> backward(const Tensor<T>& gy, const BackboneTrace<T>& tr, ParamSet<T>& grads) const {
    Tensor<T> g;
    if (cfg.output_mode == OutputMode::embedding) {
      Tensor<T> gflat = head_.backward(params, gy, tr.head, grads);
      auto d = cfg.feature_map_dims();
      g = Tensor<T>::of({static_cast<uint32_t>(d[0]), static_cast<uint32_t>(d[1]),
                         static_cast<uint32_t>(d[2]), static_cast<uint32_t>(d[3])},
                        std::move(gflat.values()));
    } else {
      g = gy;
    }
    g = inc_b_.backward(params, g, tr.inc_b, grads);
    g = pool2_.backward(g, tr.pool2);
    g = inc_a_.backward(params, g, tr.inc_a, grads);
    g = pool1_.backward(g, tr.pool1);
    g = stem_.backward(params, g, tr.stem, grads);
    // through the frozen standardization
    const auto& s = params.at("stand.std");
    const size_t plane = g.size() / cfg.in_channels;
    for (int c = 0; c < cfg.in_channels; ++c)
      kernels::scale(g.data() + c * plane, T(1) / s[c], plane);
    return g;
  }

  template <typename U>
  Backbone<U> cast() const {
    Backbone<U> out;
    out.cfg = cfg;
    out.provenance = provenance;
    out.training_meta = training_meta;
    out.params = params.template cast<U>();
    out.make_layers();
    return out;
  }

  // exposed for checkpoint loading
  void make_layers() {
    stem_ = Conv3d<T>::same3("stem", cfg.in_channels, cfg.stem_channels, 1, 2, 2);
    pool1_ = MaxPool3d<T>::spatial_halving();
    inc_a_ = Inception3d<T>::make("incA", cfg.stem_channels, cfg.inception_a,
                                  cfg.ca_mid(cfg.inception_a.out_channels()));
    pool2_ = MaxPool3d<T>::spatial_halving();
    inc_b_ = Inception3d<T>::make("incB", cfg.inception_a.out_channels(), cfg.inception_b,
                                  cfg.ca_mid(cfg.inception_b.out_channels()));
    if (cfg.output_mode == OutputMode::embedding)
      head_ = Linear<T>::make("head", cfg.flat_dim(), cfg.embedding_dim);
  }

  void register_all() {
    params.add("stand.mean", {static_cast<uint32_t>(cfg.in_channels)});
    params.add("stand.std", {static_cast<uint32_t>(cfg.in_channels)});
    stem_.register_params(params);
    inc_a_.register_params(params);
    inc_b_.register_params(params);
    if (cfg.output_mode == OutputMode::embedding) head_.register_params(params);
  }

  void init_params() {
    Rng rng(cfg.seed);
    for (const auto& name : params.names()) {
      Tensor<T>& t = params.at(name);
      const bool is_bias = name.size() > 5 && (name.rfind(".bias") == name.size() - 5 ||
                                               name.rfind(".b1") == name.size() - 3 ||
                                               name.rfind(".b2") == name.size() - 3);
      if (name == "stand.std") {
        t.fill(T(1));
      } else if (name == "stand.mean" || is_bias) {
        t.fill(T(0));
      } else {
        // weight: fan-in is everything but the leading (output) dim
        size_t fan_in = 1;
        for (size_t d = 1; d < t.rank(); ++d) fan_in *= t.dim(d);
        const double sigma = cfg.init_scheme == InitScheme::fan_in_scaled
                                 ? std::sqrt(2.0 / static_cast<double>(fan_in))
                                 : 1.0;
        for (size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(sigma * rng.normal());
      }
    }
  }

 private:
  template <typename U>
  friend class Backbone;

  Conv3d<T> stem_;
  MaxPool3d<T> pool1_;
  Inception3d<T> inc_a_;
  MaxPool3d<T> pool2_;
  Inception3d<T> inc_b_;
  Linear<T> head_;

  Tensor<T> standardize(const Tensor<T>& x) const {
    const auto& m = params.at("stand.mean");
    const auto& s = params.at("stand.std");
    Tensor<T> y(x.dims());
    const size_t plane = x.size() / cfg.in_channels;
    for (int c = 0; c < cfg.in_channels; ++c) {
      const T mu = m[c], inv = T(1) / s[c];
      const T* xi = x.data() + c * plane;
      T* yi = y.data() + c * plane;
      for (size_t i = 0; i < plane; ++i) yi[i] = (xi[i] - mu) * inv;
    }
    return y;
  }
};

using BackboneF = Backbone<float>;
using BackboneD = Backbone<double>;

}  // namespace mpf::backbone
