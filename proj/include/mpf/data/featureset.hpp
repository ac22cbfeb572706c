#pragma once

#include <filesystem>
#include <unordered_map>

#include "mpf/core/tensor_io.hpp"
#include "mpf/data/manifest.hpp"
#include "mpf/preprocess/pipeline.hpp"

namespace mpf::data {

// Preprocessed features for a set of clips, aligned vectors. Feature tensors
// are borrowed from a FeatureStore, which owns them for the whole run.
struct FeatureSet {
  std::vector<std::string> clip_ids;
  std::vector<std::string> subject_ids;
  std::vector<int> labels;  // indices into class_names
  std::vector<std::string> class_names;
  std::vector<const TensorF*> features;

  size_t size() const { return clip_ids.size(); }
  int n_classes() const { return static_cast<int>(class_names.size()); }

  std::vector<std::vector<size_t>> indices_by_class() const {
    std::vector<std::vector<size_t>> by_class(class_names.size());
    for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    return by_class;
  }
};

// Disk-backed feature cache: <dir>/<clip_id>.feat.mef, computed on demand
// through the preprocessing pipeline and pinned in memory afterwards.
class FeatureStore {
 public:
  FeatureStore(std::filesystem::path dir, preprocess::PreprocessConfig cfg)
      : dir_(std::move(dir)), cfg_(std::move(cfg)) {
    std::filesystem::create_directories(dir_);
  }

  const preprocess::PreprocessConfig& config() const { return cfg_; }

  const TensorF& get(const ClipRecord& rec) {
    auto it = mem_.find(rec.clip_id);
    if (it != mem_.end()) return it->second;
    const auto path = dir_ / (rec.clip_id + ".feat.mef");
    if (std::filesystem::exists(path))
      return mem_.emplace(rec.clip_id, read_feature(path)).first->second;
    preprocess::FusedFeature f = preprocess::preprocess_clip(rec, cfg_);
    write_tensor(f.tensor, path);
    return mem_.emplace(rec.clip_id, std::move(f.tensor)).first->second;
  }

 private:
  static TensorF read_feature(const std::filesystem::path& path);

  std::filesystem::path dir_;
  preprocess::PreprocessConfig cfg_;
  std::unordered_map<std::string, TensorF> mem_;
};

FeatureSet build_feature_set(const DatasetManifest& m, const std::vector<size_t>& record_idx,
                             FeatureStore& store);

// Per-channel mean/std over every voxel of the set (training-split
// statistics for the encoder's input standardization).
std::pair<std::vector<float>, std::vector<float>> channel_stats(const FeatureSet& fs,
                                                                int channels);

}  // namespace mpf::data
