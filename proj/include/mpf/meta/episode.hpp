#pragma once

#include "mpf/data/featureset.hpp"

namespace mpf::meta {

// N-way K-shot episode over a feature pool; support and query are disjoint
// index sets with exact per-class counts.
struct Episode {
  int way = 0, shot = 0, query_per_class = 0;
  std::vector<int> classes;                   // label-space class ids, one per way
  std::vector<std::vector<size_t>> support;   // [way][shot] pool indices
  std::vector<std::vector<size_t>> query;     // [way][query_per_class]
};

// Uniform class choice, then uniform sampling without replacement.
// Deterministic for a fixed (pool, N, K, Q, seed); class member order is
// canonicalized by clip id so manifest order does not leak in.
Episode sample_episode(const data::FeatureSet& pool, int way, int shot, int query_per_class,
                       uint64_t seed);

}  // namespace mpf::meta
