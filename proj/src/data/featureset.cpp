#include "mpf/data/featureset.hpp"

#include <cmath>

#include "mpf/core/tensor_io.hpp"

namespace mpf::data {

TensorF FeatureStore::read_feature(const std::filesystem::path& path) {
  return read_tensor(path);
}

FeatureSet build_feature_set(const DatasetManifest& m, const std::vector<size_t>& record_idx,
                             FeatureStore& store) {
  FeatureSet fs;
  fs.class_names = m.label_space.classes;
  fs.clip_ids.reserve(record_idx.size());
  for (size_t idx : record_idx) {
    const ClipRecord& r = m.records[idx];
    const std::string cls = m.label_space.mapped(r.label);
    const int label = m.label_space.class_index(cls);
    check(label >= 0, "feature set: label outside label space for clip " + r.clip_id);
    fs.clip_ids.push_back(r.clip_id);
    fs.subject_ids.push_back(r.subject_id);
    fs.labels.push_back(label);
    fs.features.push_back(&store.get(r));
  }
  return fs;
}

std::pair<std::vector<float>, std::vector<float>> channel_stats(const FeatureSet& fs,
                                                                int channels) {
  check(fs.size() > 0, "channel_stats: empty feature set");
  std::vector<double> sum(channels, 0.0), sumsq(channels, 0.0);
  size_t count = 0;
  for (const TensorF* t : fs.features) {
    check(static_cast<int>(t->dim(0)) == channels, "channel_stats: channel mismatch");
    const size_t plane = t->size() / channels;
    for (int c = 0; c < channels; ++c) {
      const float* p = t->data() + c * plane;
      for (size_t i = 0; i < plane; ++i) {
        sum[c] += p[i];
        sumsq[c] += static_cast<double>(p[i]) * p[i];
      }
    }
    count += t->size() / channels;
  }
  std::vector<float> mean(channels), stddev(channels);
  for (int c = 0; c < channels; ++c) {
    const double m = sum[c] / count;
    const double var = std::max(0.0, sumsq[c] / count - m * m);
    mean[c] = static_cast<float>(m);
    stddev[c] = static_cast<float>(std::sqrt(var + 1e-8));
  }
  return {mean, stddev};
}

}  // namespace mpf::data
