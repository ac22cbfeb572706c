#pragma once

#include <cmath>

#include "mpf/core/rng.hpp"
#include "mpf/core/tensor.hpp"
#include "mpf/data/featureset.hpp"

namespace mpf::pretrain {

template <typename T>
T euclidean_distance(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.size() == b.size(), "euclidean_distance: dim mismatch");
  T acc = T(0);
  for (size_t i = 0; i < a.size(); ++i) {
    const T d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// max(d(a,p)^2 - d(a,n)^2 + margin, 0); the subgradient at the hinge point
// is taken as zero.
template <typename T>
T triplet_loss(const Tensor<T>& fa, const Tensor<T>& fp, const Tensor<T>& fn, T margin) {
  check(fa.size() == fp.size() && fa.size() == fn.size(), "triplet_loss: dim mismatch");
  check(margin > T(0), "triplet_loss: margin must be positive");
  T dap2 = T(0), dan2 = T(0);
  for (size_t i = 0; i < fa.size(); ++i) {
    const T dp = fa[i] - fp[i];
    const T dn = fa[i] - fn[i];
    dap2 += dp * dp;
    dan2 += dn * dn;
  }
  const T v = dap2 - dan2 + margin;
  return v > T(0) ? v : T(0);
}

// Accumulates dLoss/d{fa,fp,fn} (scaled by `scale`) and returns the loss term.
template <typename T>
T triplet_loss_backward(const Tensor<T>& fa, const Tensor<T>& fp, const Tensor<T>& fn, T margin,
                        T scale, Tensor<T>& ga, Tensor<T>& gp, Tensor<T>& gn) {
  const T loss = triplet_loss(fa, fp, fn, margin);
  if (loss <= T(0)) return T(0);
  for (size_t i = 0; i < fa.size(); ++i) {
    const T dp = fa[i] - fp[i];
    const T dn = fa[i] - fn[i];
    ga[i] += scale * T(2) * (dp - dn);
    gp[i] -= scale * T(2) * dp;
    gn[i] += scale * T(2) * dn;
  }
  return loss;
}

struct Triplet {
  size_t anchor, positive, negative;
};

// Uniform random valid triplets; anchors are distinct within the batch.
std::vector<Triplet> sample_triplets(const std::vector<int>& labels, size_t batch_size, Rng& rng);

// Manifest-level entry point: triplets of record indices.
std::vector<Triplet> sample_triplets(const data::DatasetManifest& manifest, size_t batch_size,
                                     uint64_t seed);

}  // namespace mpf::pretrain
