#include "mpf/meta/episode.hpp"

#include <algorithm>

#include "mpf/core/rng.hpp"

namespace mpf::meta {

Episode sample_episode(const data::FeatureSet& pool, int way, int shot, int query_per_class,
                       uint64_t seed) {
  check(way >= 2, "sample_episode: way must be >= 2");
  check(shot >= 1 && query_per_class >= 1, "sample_episode: shot and query must be >= 1");
  check(way <= pool.n_classes(), "sample_episode: way exceeds the number of classes");

  Rng rng(seed);
  std::vector<int> class_ids(pool.n_classes());
  for (int c = 0; c < pool.n_classes(); ++c) class_ids[c] = c;
  rng.shuffle(class_ids);
  class_ids.resize(way);

  auto by_class = pool.indices_by_class();
  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.query_per_class = query_per_class;
  ep.classes = class_ids;
  ep.support.resize(way);
  ep.query.resize(way);

  for (int k = 0; k < way; ++k) {
    auto members = by_class[class_ids[k]];
    check(static_cast<int>(members.size()) >= shot + query_per_class,
          "sample_episode: class '" + pool.class_names[class_ids[k]] + "' has " +
              std::to_string(members.size()) + " samples, needs " +
              std::to_string(shot + query_per_class));
    std::sort(members.begin(), members.end(), [&](size_t a, size_t b) {
      return pool.clip_ids[a] < pool.clip_ids[b];
    });
    rng.shuffle(members);
    ep.support[k].assign(members.begin(), members.begin() + shot);
    ep.query[k].assign(members.begin() + shot, members.begin() + shot + query_per_class);
  }
  return ep;
}

}  // namespace mpf::meta
