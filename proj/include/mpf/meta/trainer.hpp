#pragma once

#include <filesystem>

#include "mpf/meta/episode.hpp"
#include "mpf/meta/fusion.hpp"
#include "mpf/meta/protonet.hpp"
#include "mpf/pretrain/optimizer.hpp"

namespace mpf::meta {

struct MetaConfig {
  int way = 3, shot = 5, query = 5;
  int batches = 100;
  int episodes_per_batch = 4;
  pretrain::LrSchedule lr{0.05, 1.0, 0};
  double momentum = 0.9;
  double weight_decay = 0.0;
  // Cascade only: lr multiplier for the freshly initialized projection; the
  // usual new-layer boost so the residual path can grow while the
  // pretrained encoders move gently.
  double projection_lr_scale = 1.0;
  uint64_t seed = 1;
  std::string fold_subject;      // held-out subject guard
  bool freeze_encoders = false;  // freeze every parameter (evaluation-style run)
};

struct MetaLogEntry {
  int batch = 0;
  double loss = 0.0;
  double query_acc = 0.0;  // on this batch's episodes, before the update
};

struct MetaResult {
  FusionSpec model;
  std::vector<MetaLogEntry> log;
  std::vector<std::string> consumed_clip_ids;
};

// Episodic fine-tuning: batches of episodes, losses averaged per batch,
// gradients through prototypes, cosine scores and (variant P) the fused sum.
MetaResult train_mpfnet(const data::FeatureSet& pool, FusionSpec init, const MetaConfig& cfg);

// Query accuracy over freshly sampled episodes, no parameter updates.
double evaluate_episodes(const FusionSpec& model, const data::FeatureSet& pool, int n_episodes,
                         int way, int shot, int query_per_class, uint64_t seed);

// Embeds one sample under the model's scoring path(s).
struct QueryEmbedding {
  TensorF main;             // single/cascade embedding, or the GFE stream for P
  std::optional<TensorF> aux;  // the AFE stream for P
};

QueryEmbedding embed_sample(const FusionSpec& model, const TensorF& feature);

// Frozen-model scorer over a fixed support set (one per support resampling).
class FusionScorer {
 public:
  FusionScorer(const FusionSpec& model, const data::FeatureSet& pool,
               const std::vector<std::vector<size_t>>& support_by_class);

  // Fused per-class similarity, class order = position in support_by_class.
  std::vector<double> score(const QueryEmbedding& q) const;
  std::vector<double> score(const TensorF& feature) const {
    return score(embed_sample(*model_, feature));
  }
  // gamma override for evaluation-time sweeps; NaN keeps the model's value
  void set_gamma(double g) { gamma_ = g; }

 private:
  const FusionSpec* model_;
  double gamma_;
  std::vector<TensorF> protos_main_, protos_aux_;
};

void save_fusion(const FusionSpec& spec, const std::filesystem::path& dir);
FusionSpec load_fusion(const std::filesystem::path& dir);

}  // namespace mpf::meta
