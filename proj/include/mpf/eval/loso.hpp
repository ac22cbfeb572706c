#pragma once

#include <functional>
#include <map>
#include <memory>

#include "mpf/data/featureset.hpp"
#include "mpf/eval/metrics.hpp"
#include "mpf/magnify/magnify.hpp"
#include "mpf/meta/trainer.hpp"
#include "mpf/pretrain/trainer.hpp"

namespace mpf::eval {

struct LosoFold {
  std::string test_subject;
  std::vector<size_t> train_idx;  // record indices into the manifest
  std::vector<size_t> test_idx;
};

// One fold per distinct subject; magnified copies follow their source
// subject through the subject_id they inherit.
std::vector<LosoFold> loso_split(const data::DatasetManifest& manifest);

struct Prediction {
  std::string clip_id;
  std::string subject;
  int true_cls = 0;
  int pred_cls = 0;
  std::vector<double> probs;  // mean over support resamplings
};

struct FoldReport {
  std::string subject;
  ConfusionMatrix cm;
};

struct MetricsReport {
  std::vector<std::string> classes;
  std::vector<FoldReport> folds;
  ConfusionMatrix aggregate;
  double acc = 0, uf1 = 0, uar = 0;
  std::vector<double> per_class_f1;
  double per_class_acc_std = 0;
  std::vector<Prediction> predictions;

  void finalize();  // recompute aggregate metrics from the fold matrices
};

// Per-query scorer used by the fold evaluator; the oracle and random
// baselines in the tests implement this directly, the real path wraps a
// trained FusionSpec.
class FoldScorer {
 public:
  virtual ~FoldScorer() = default;
  virtual std::vector<double> score(const data::FeatureSet& fs, size_t idx) = 0;
};

using ScorerFactory = std::function<std::unique_ptr<FoldScorer>(
    const std::vector<std::vector<size_t>>& support_by_class)>;

// Every held-out clip is scored against `resamplings` support sets drawn
// from the training subjects; predictions are majority votes with mean
// probabilities logged.
std::vector<Prediction> evaluate_fold(const data::FeatureSet& test, const data::FeatureSet& train,
                                      const ScorerFactory& make_scorer, int shot,
                                      int resamplings, uint64_t seed);

// Audit of which clips each fold's training consumed (the LOSO leakage log).
struct AuditLog {
  std::map<std::string, std::set<std::string>> consumed_by_fold;  // subject -> clip ids
  void merge(const std::string& fold_subject, const std::vector<std::string>& clip_ids);
  void write(const std::filesystem::path& dir) const;
};

struct PipelineConfig {
  preprocess::PreprocessConfig preprocess;
  int magnify_cap = 5;
  backbone::BackboneConfig arch;  // input dims must match the corpus
  pretrain::TrainConfig gfe;
  pretrain::TrainConfig afe;
  meta::MetaConfig meta;
  int support_resamplings = 10;
  double gamma = 0.7;
  meta::Variant sweep_variant = meta::Variant::cascade;  // for the L sweep
  uint64_t seed = 1;
};

// Per-fold pretraining pieces, shared between run_loso and the CLI stages
// (seeds derive from cfg.seed and the fold subject, so both paths produce
// identical checkpoints).
pretrain::TrainResult train_fold_gfe(const data::DatasetManifest& manifest,
                                     const LosoFold& fold, data::FeatureStore& store,
                                     const PipelineConfig& cfg);

pretrain::TrainResult train_fold_afe(const data::DatasetManifest& manifest,
                                     const data::DatasetManifest& balanced_fold,
                                     const LosoFold& fold, data::FeatureStore& store,
                                     const PipelineConfig& cfg);

// Union of the per-fold balancing plans, magnified once and cached under
// work_dir; each fold then cuts its own subset via balanced_for_fold.
data::DatasetManifest build_union_balanced(const data::DatasetManifest& manifest,
                                           const std::string& flow_port, int cap,
                                           const std::filesystem::path& work_dir);

// Scores one fold's held-out clips with a trained fusion model (query
// embeddings cached across support resamplings). NaN gamma keeps the
// model's own coefficient.
std::vector<Prediction> evaluate_fold_with_model(const meta::FusionSpec& model,
                                                 const data::FeatureSet& test,
                                                 const data::FeatureSet& train, int shot,
                                                 int resamplings, uint64_t seed, double gamma);

// Builds the pre-meta-training fusion model for a variant from the fold's
// pretrained encoders ("single" starts from scratch: the no-prior baseline).
meta::FusionSpec init_fusion(meta::Variant variant, const backbone::Backbone<float>& gfe,
                             const backbone::Backbone<float>& afe, const data::FeatureSet& pool,
                             const PipelineConfig& cfg, uint64_t fold_index);

// Per-fold balanced manifest: the stated balancing rule applied to this
// fold's training-split counts, drawing clips from a shared magnified store.
data::DatasetManifest balanced_for_fold(const data::DatasetManifest& all_balanced,
                                        const data::DatasetManifest& raw,
                                        const LosoFold& fold, int cap);

// The full protocol: per fold preprocess -> balance -> GFE -> AFE ->
// meta-train `variant` -> evaluate the held-out subject.
MetricsReport run_loso(const data::DatasetManifest& manifest, data::FeatureStore& store,
                       const PipelineConfig& cfg, meta::Variant variant,
                       const std::filesystem::path& work_dir, AuditLog* audit);

struct SweepRow {
  double value = 0;
  double acc = 0, uf1 = 0, uar = 0;
};

// gamma: one LOSO training pass of variant P at the configured gamma, then
// evaluation-time re-scoring per grid value. L: full pipeline per value.
std::vector<SweepRow> sweep(const data::DatasetManifest& manifest, const PipelineConfig& cfg,
                            const std::string& param, const std::vector<double>& values,
                            const std::filesystem::path& work_dir);

void write_report(const MetricsReport& report, const std::filesystem::path& dir);
MetricsReport read_report(const std::filesystem::path& dir);
void write_sweep_table(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
std::string render_report_text(const MetricsReport& report);

}  // namespace mpf::eval
