#pragma once

#include <cmath>
#include <cstdio>
#include <vector>

#include "mpf/core/tensor.hpp"

namespace mpf::meta {

// Per-class arithmetic means of the support embeddings, accumulated in
// index-ascending order (the documented summation order).
template <typename T>
std::vector<Tensor<T>> compute_prototypes(const std::vector<Tensor<T>>& embeddings,
                                          const std::vector<int>& class_of, int n_classes) {
  check(embeddings.size() == class_of.size(), "compute_prototypes: length mismatch");
  check(!embeddings.empty(), "compute_prototypes: no embeddings");
  const auto dims = embeddings[0].dims();
  std::vector<Tensor<T>> protos(n_classes, Tensor<T>(dims));
  std::vector<size_t> counts(n_classes, 0);
  for (size_t i = 0; i < embeddings.size(); ++i) {
    check(class_of[i] >= 0 && class_of[i] < n_classes, "compute_prototypes: class out of range");
    check(embeddings[i].dims() == dims, "compute_prototypes: embedding dim mismatch");
    auto& p = protos[class_of[i]];
    for (size_t k = 0; k < p.size(); ++k) p[k] += embeddings[i][k];
    counts[class_of[i]]++;
  }
  for (int c = 0; c < n_classes; ++c) {
    check(counts[c] > 0, "compute_prototypes: class " + std::to_string(c) + " has no support");
    const T inv = T(1) / static_cast<T>(counts[c]);
    for (size_t k = 0; k < protos[c].size(); ++k) protos[c][k] *= inv;
  }
  return protos;
}

template <typename T>
T cosine_similarity(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.size() == b.size(), "cosine_similarity: dim mismatch");
  T dot = T(0), na = T(0), nb = T(0);
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  check(na > T(0) && nb > T(0),
        "cosine_similarity: zero vector (upstream produced a degenerate embedding)");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// d(cos)/da and d(cos)/db scaled by gs, accumulated into ga/gb.
template <typename T>
void cosine_similarity_backward(const Tensor<T>& a, const Tensor<T>& b, T gs, Tensor<T>& ga,
                                Tensor<T>& gb) {
  T dot = T(0), na2 = T(0), nb2 = T(0);
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na2 += a[i] * a[i];
    nb2 += b[i] * b[i];
  }
  const T na = std::sqrt(na2), nb = std::sqrt(nb2);
  const T inv = T(1) / (na * nb);
  const T s = dot * inv;
  for (size_t i = 0; i < a.size(); ++i) {
    ga[i] += gs * (b[i] * inv - s * a[i] / na2);
    gb[i] += gs * (a[i] * inv - s * b[i] / nb2);
  }
}

// Similarities -> class probabilities: d = 1 - s, then softmax over -d.
// The shift cancels, so argmax(prob) = argmax(similarity) always.
template <typename T>
std::vector<T> classify_query(const std::vector<T>& scores) {
  check(scores.size() >= 2, "classify_query: need at least two classes");
  std::vector<T> negd(scores.size());
  T mx = -std::numeric_limits<T>::infinity();
  for (size_t c = 0; c < scores.size(); ++c) {
    check(std::isfinite(scores[c]), "classify_query: non-finite score");
    negd[c] = -(T(1) - scores[c]);
    mx = std::max(mx, negd[c]);
  }
  T z = T(0);
  for (auto& v : negd) {
    v = std::exp(v - mx);
    z += v;
  }
  for (auto& v : negd) v /= z;
  return negd;
}

// Mean over queries of -log p[true]; probabilities clamped at 1e-12.
template <typename T>
T episode_loss(const std::vector<std::vector<T>>& probs, const std::vector<int>& labels) {
  check(probs.size() == labels.size() && !probs.empty(), "episode_loss: length mismatch");
  T acc = T(0);
  for (size_t q = 0; q < probs.size(); ++q) {
    T sum = T(0);
    for (T p : probs[q]) sum += p;
    check(std::fabs(sum - T(1)) < T(1e-6), "episode_loss: probabilities do not sum to 1");
    T p = probs[q][labels[q]];
    if (p < T(1e-12)) {
      std::fprintf(stderr, "episode_loss: clamping zero probability at true class\n");
      p = T(1e-12);
    }
    acc += -std::log(p);
  }
  return acc / static_cast<T>(probs.size());
}

// Fused scores -> softmax -> mean cross entropy, with d(loss)/d(scores)
// computed through the composite (numerically stable) form.
template <typename T>
T episode_loss_from_scores(const std::vector<std::vector<T>>& scores,
                           const std::vector<int>& labels,
                           std::vector<std::vector<T>>* dscores) {
  check(scores.size() == labels.size() && !scores.empty(),
        "episode_loss_from_scores: length mismatch");
  const T invq = T(1) / static_cast<T>(scores.size());
  T acc = T(0);
  if (dscores) dscores->assign(scores.size(), {});
  for (size_t q = 0; q < scores.size(); ++q) {
    const auto p = classify_query(scores[q]);
    T pq = std::max(p[labels[q]], T(1e-12));
    acc += -std::log(pq);
    if (dscores) {
      auto& d = (*dscores)[q];
      d.resize(p.size());
      for (size_t c = 0; c < p.size(); ++c)
        d[c] = invq * (p[c] - (static_cast<int>(c) == labels[q] ? T(1) : T(0)));
    }
  }
  return acc * invq;
}

}  // namespace mpf::meta
