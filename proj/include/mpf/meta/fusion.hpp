#pragma once

#include <optional>

#include "mpf/backbone/network.hpp"
#include "mpf/imaging/image_ops.hpp"
#include "mpf/kernels/gemm.hpp"

namespace mpf::meta {

// "single" is the ablation mode: one encoder in the same episodic framework
// (no-prior baseline when scratch-initialized, PLTN/PLSM rows when
// initialized from one pretraining stage).
enum class Variant { single, parallel, cascade };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);

// The trained fusion model: encoders plus the fusion coefficient, and for
// the cascade the learned 1x1x1 projection feeding GFE features back into
// the adapted AFE's input.
struct FusionSpec {
  Variant variant = Variant::parallel;
  double gamma = 0.7;
  backbone::Backbone<float> gfe;                 // single: the only encoder
  std::optional<backbone::Backbone<float>> afe;  // parallel + cascade
  TensorF proj_w, proj_b;                        // cascade: (5, Cf), (5)

  void validate() const;
};

// Widens the first convolution from 5 to 5+extra input channels; new-channel
// kernels start as the mean of the pretrained ones, so inputs replicated
// across old and new channels reproduce pre-adaptation activations up to
// scale. Standardization stats extend with (0, 1).
backbone::Backbone<float> adapt_afe_for_cascade(const backbone::Backbone<float>& afe,
                                                int extra_channels);

template <typename T>
struct CascadeTrace {
  backbone::BackboneTrace<T> gfe_tr, afe_tr;
  Tensor<T> fmap;  // GFE feature map
  Tensor<T> proj;  // after 1x1x1 projection, (5, T, h, w)
};

// x -> GFE feature map -> 1x1x1 projection to 5 channels -> bilinear
// upsample to input resolution -> channel-concat with x -> adapted AFE.
template <typename T>
Tensor<T> cascade_forward(const backbone::Backbone<T>& gfe_fm,
                          const backbone::Backbone<T>& afe_adapted, const Tensor<T>& proj_w,
                          const Tensor<T>& proj_b, const Tensor<T>& x, CascadeTrace<T>* tr) {
  check(gfe_fm.cfg.output_mode == backbone::OutputMode::feature_map,
        "cascade_forward: GFE must be in feature_map mode");
  Tensor<T> fmap = gfe_fm.forward(x, tr ? &tr->gfe_tr : nullptr);
  const int Cf = fmap.dim(0), Tt = fmap.dim(1), h = fmap.dim(2), w = fmap.dim(3);
  check(proj_w.dim(0) == x.dim(0) &&
            static_cast<int>(proj_w.dim(1)) == Cf,
        "cascade_forward: projection shape mismatch");

  const size_t V = static_cast<size_t>(Tt) * h * w;
  Tensor<T> proj({x.dim(0), static_cast<uint32_t>(Tt), static_cast<uint32_t>(h),
                  static_cast<uint32_t>(w)});
  kernels::gemm_nn(x.dim(0), V, Cf, proj_w.data(), fmap.data(), proj.data());
  for (uint32_t c = 0; c < x.dim(0); ++c) {
    T* row = proj.data() + static_cast<size_t>(c) * V;
    for (size_t i = 0; i < V; ++i) row[i] += proj_b[c];
  }

  const int H = x.dim(2), W = x.dim(3);
  Tensor<T> xcat({2 * x.dim(0), x.dim(1), x.dim(2), x.dim(3)});
  std::memcpy(xcat.data(), x.data(), x.size() * sizeof(T));
  imaging::upsample_bilinear_hw(proj.data(), static_cast<size_t>(x.dim(0)) * Tt, h, w,
                                xcat.data() + x.size(), H, W);

  if (tr) {
    tr->fmap = std::move(fmap);
    tr->proj = std::move(proj);
  }
  return afe_adapted.forward(xcat, tr ? &tr->afe_tr : nullptr);
}

template <typename T>
void cascade_backward(const backbone::Backbone<T>& gfe_fm,
                      const backbone::Backbone<T>& afe_adapted, const Tensor<T>& proj_w,
                      const Tensor<T>& gemb, const CascadeTrace<T>& tr,
                      backbone::ParamSet<T>& g_gfe, backbone::ParamSet<T>& g_afe,
                      Tensor<T>& g_proj_w, Tensor<T>& g_proj_b) {
  Tensor<T> gxcat = afe_adapted.backward(gemb, tr.afe_tr, g_afe);
  const uint32_t C = gxcat.dim(0) / 2;
  const int Tt = tr.proj.dim(1), h = tr.proj.dim(2), w = tr.proj.dim(3);
  const int H = gxcat.dim(2), W = gxcat.dim(3);

  // grad wrt the projected+upsampled half of the concat
  Tensor<T> gproj(tr.proj.dims());
  imaging::upsample_bilinear_hw_backward(gxcat.data() + gxcat.size() / 2,
                                         static_cast<size_t>(C) * Tt, h, w, gproj.data(), H, W);

  const size_t V = static_cast<size_t>(Tt) * h * w;
  const int Cf = tr.fmap.dim(0);
  for (uint32_t c = 0; c < C; ++c)
    g_proj_b[c] += kernels::vsum(gproj.data() + static_cast<size_t>(c) * V, V);
  kernels::gemm_nt(C, Cf, V, gproj.data(), tr.fmap.data(), g_proj_w.data());

  Tensor<T> gfmap(tr.fmap.dims());
  kernels::gemm_tn(Cf, V, C, proj_w.data(), gproj.data(), gfmap.data());
  gfe_fm.backward(gfmap, tr.gfe_tr, g_gfe);
}

}  // namespace mpf::meta
