#pragma once

#include <filesystem>

#include "mpf/backbone/network.hpp"
#include "mpf/data/featureset.hpp"
#include "mpf/pretrain/optimizer.hpp"
#include "mpf/pretrain/triplet.hpp"

namespace mpf::pretrain {

enum class Stage { gfe, afe };

struct TrainConfig {
  Stage stage = Stage::gfe;
  int epochs = 60;
  int batch_size = 128;
  LrSchedule lr{0.01, 1.0, 0};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double margin = 0.2;  // triplet margin (gfe only); the paper leaves it unset
  uint64_t seed = 1;
  std::string fold_subject;  // held-out subject; empty disables the guard
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double accuracy = 0.0;  // afe only
  double wall_ms = 0.0;
};

struct TrainResult {
  backbone::Backbone<float> encoder;
  std::vector<EpochLog> log;
  std::vector<std::string> consumed_clip_ids;  // sorted unique, for the leakage audit
};

// Shared-weight triplet training (one CA-I3D applied to anchor/positive/
// negative); returns the encoder with provenance "gfe_pretrained".
TrainResult train_gfe(const data::FeatureSet& train, backbone::BackboneConfig arch,
                      const TrainConfig& cfg);

// Supervised cross-entropy training on the balanced magnified set; the
// classification head is dropped from the returned encoder
// (provenance "afe_pretrained").
TrainResult train_afe(const data::FeatureSet& balanced_train, backbone::BackboneConfig arch,
                      const TrainConfig& cfg, int n_classes);

// JSONL: one record per epoch (epoch, loss, lr, accuracy, wall_ms).
void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace mpf::pretrain
