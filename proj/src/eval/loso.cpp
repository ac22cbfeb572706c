#include "mpf/eval/loso.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mpf/core/rng.hpp"

namespace mpf::eval {

using data::DatasetManifest;
using data::FeatureSet;
using data::FeatureStore;
using meta::FusionSpec;
using meta::Variant;

namespace {

uint64_t fnv_subject(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<LosoFold> loso_split(const DatasetManifest& manifest) {
  const auto subjects = manifest.subjects();
  check(subjects.size() >= 2, "loso_split: need at least two subjects");
  std::vector<LosoFold> folds;
  for (const auto& s : subjects) {
    LosoFold f;
    f.test_subject = s;
    for (size_t i = 0; i < manifest.records.size(); ++i) {
      if (manifest.records[i].subject_id == s)
        f.test_idx.push_back(i);
      else
        f.train_idx.push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

void MetricsReport::finalize() {
  check(!folds.empty(), "metrics report: no folds");
  aggregate = ConfusionMatrix::zero(classes);
  for (const auto& f : folds) aggregate += f.cm;
  acc = accuracy(aggregate);
  auto [f1, recall] = uf1_uar(aggregate);
  uf1 = f1;
  uar = recall;
  per_class_f1 = per_class_metrics(aggregate).f1;
  per_class_acc_std = per_class_recall_std(aggregate);
}

std::vector<Prediction> evaluate_fold(const FeatureSet& test, const FeatureSet& train,
                                      const ScorerFactory& make_scorer, int shot,
                                      int resamplings, uint64_t seed) {
  check(test.size() > 0, "evaluate_fold: empty test set");
  check(resamplings >= 1, "evaluate_fold: need at least one support resampling");
  const int n_classes = test.n_classes();
  auto by_class = train.indices_by_class();
  for (int c = 0; c < n_classes; ++c) {
    check(static_cast<int>(by_class[c].size()) >= shot,
          "evaluate_fold: training split has only " + std::to_string(by_class[c].size()) +
              " samples of class '" + train.class_names[c] + "', support needs " +
              std::to_string(shot));
    std::sort(by_class[c].begin(), by_class[c].end(),
              [&](size_t a, size_t b) { return train.clip_ids[a] < train.clip_ids[b]; });
  }

  std::vector<std::vector<int>> votes(test.size(), std::vector<int>(n_classes, 0));
  std::vector<std::vector<double>> prob_sums(test.size(), std::vector<double>(n_classes, 0.0));

  for (int e = 0; e < resamplings; ++e) {
    std::vector<std::vector<size_t>> support(n_classes);
    for (int c = 0; c < n_classes; ++c) {
      auto members = by_class[c];
      Rng rng(mix_seed(seed, 0x5a9, e, c));
      rng.shuffle(members);
      support[c].assign(members.begin(), members.begin() + shot);
    }
    auto scorer = make_scorer(support);
    for (size_t q = 0; q < test.size(); ++q) {
      const auto scores = scorer->score(test, q);
      check(static_cast<int>(scores.size()) == n_classes,
            "evaluate_fold: scorer returned wrong class count");
      const auto probs = meta::classify_query(scores);
      int arg = 0;
      for (int c = 1; c < n_classes; ++c)
        if (scores[c] > scores[arg]) arg = c;
      votes[q][arg]++;
      for (int c = 0; c < n_classes; ++c) prob_sums[q][c] += probs[c];
    }
  }

  std::vector<Prediction> preds(test.size());
  for (size_t q = 0; q < test.size(); ++q) {
    Prediction& p = preds[q];
    p.clip_id = test.clip_ids[q];
    p.subject = test.subject_ids[q];
    p.true_cls = test.labels[q];
    int best = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (votes[q][c] > votes[q][best] ||
          (votes[q][c] == votes[q][best] && prob_sums[q][c] > prob_sums[q][best]))
        best = c;
    }
    p.pred_cls = best;
    p.probs.resize(n_classes);
    for (int c = 0; c < n_classes; ++c) p.probs[c] = prob_sums[q][c] / resamplings;
  }
  return preds;
}

void AuditLog::merge(const std::string& fold_subject, const std::vector<std::string>& clip_ids) {
  consumed_by_fold[fold_subject].insert(clip_ids.begin(), clip_ids.end());
}

void AuditLog::write(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (const auto& [subject, clips] : consumed_by_fold) {
    std::ofstream os(dir / ("fold_" + subject + ".consumed.txt"), std::ios::trunc);
    check(os.good(), "audit: cannot write under " + dir.string());
    for (const auto& c : clips) os << c << "\n";
  }
}

data::DatasetManifest balanced_for_fold(const DatasetManifest& all_balanced,
                                        const DatasetManifest& raw, const LosoFold& fold,
                                        int cap) {
  const std::set<std::string> exclude{fold.test_subject};
  const auto counts = raw.class_counts(exclude);
  const magnify::MagnificationPlan plan = magnify::plan_balancing(counts, cap);

  DatasetManifest out = all_balanced;
  out.records.clear();
  for (const auto& r : all_balanced.records) {
    if (r.subject_id == fold.test_subject) continue;
    const std::string cls = all_balanced.label_space.mapped(r.label);
    const auto it = plan.per_class.find(cls);
    const int phi_max = it == plan.per_class.end() ? 0 : it->second;
    if (r.magnification_factor <= phi_max) out.records.push_back(r);
  }
  return out;
}

pretrain::TrainResult train_fold_gfe(const DatasetManifest& manifest, const LosoFold& fold,
                                     FeatureStore& store, const PipelineConfig& cfg) {
  FeatureSet train_fs = data::build_feature_set(manifest, fold.train_idx, store);
  const uint64_t fold_tag = fnv_subject(fold.test_subject);
  pretrain::TrainConfig gfe_cfg = cfg.gfe;
  gfe_cfg.stage = pretrain::Stage::gfe;
  gfe_cfg.fold_subject = fold.test_subject;
  gfe_cfg.seed = mix_seed(cfg.seed, 0x6fe, fold_tag);
  backbone::BackboneConfig arch_g = cfg.arch;
  arch_g.seed = mix_seed(cfg.seed, 0x6fe5, fold_tag);
  return pretrain::train_gfe(train_fs, arch_g, gfe_cfg);
}

pretrain::TrainResult train_fold_afe(const DatasetManifest& manifest,
                                     const DatasetManifest& balanced_fold,
                                     const LosoFold& fold, FeatureStore& store,
                                     const PipelineConfig& cfg) {
  std::vector<size_t> bal_idx(balanced_fold.records.size());
  for (size_t i = 0; i < bal_idx.size(); ++i) bal_idx[i] = i;
  FeatureSet bal_fs = data::build_feature_set(balanced_fold, bal_idx, store);
  const uint64_t fold_tag = fnv_subject(fold.test_subject);
  pretrain::TrainConfig afe_cfg = cfg.afe;
  afe_cfg.stage = pretrain::Stage::afe;
  afe_cfg.fold_subject = fold.test_subject;
  afe_cfg.seed = mix_seed(cfg.seed, 0xafe, fold_tag);
  backbone::BackboneConfig arch_a = cfg.arch;
  arch_a.seed = mix_seed(cfg.seed, 0xafe5, fold_tag);
  return pretrain::train_afe(bal_fs, arch_a, afe_cfg,
                             static_cast<int>(manifest.label_space.classes.size()));
}

FusionSpec init_fusion(Variant variant, const backbone::Backbone<float>& gfe,
                       const backbone::Backbone<float>& afe, const FeatureSet& pool,
                       const PipelineConfig& cfg, uint64_t fold_index) {
  FusionSpec spec;
  spec.variant = variant;
  spec.gamma = cfg.gamma;
  switch (variant) {
    case Variant::single: {
      backbone::BackboneConfig arch = cfg.arch;
      arch.seed = mix_seed(cfg.seed, 0xba5e, fold_index);
      spec.gfe = backbone::Backbone<float>::build(arch);
      auto [mean, stddev] = data::channel_stats(pool, arch.in_channels);
      spec.gfe.set_standardization(mean, stddev);
      break;
    }
    case Variant::parallel:
      spec.gfe = gfe;
      spec.afe = afe;
      break;
    case Variant::cascade: {
      backbone::BackboneConfig fm_cfg = gfe.cfg;
      fm_cfg.output_mode = backbone::OutputMode::feature_map;
      spec.gfe = backbone::Backbone<float>::build_from_conv_stage(fm_cfg, gfe);
      spec.afe = meta::adapt_afe_for_cascade(afe, afe.cfg.in_channels);
      const int cf = fm_cfg.inception_b.out_channels();
      // zero projection: meta-training starts exactly at the adapted-AFE
      // behavior and grows the residual GFE path from inert
      spec.proj_w = TensorF({static_cast<uint32_t>(cfg.arch.in_channels),
                             static_cast<uint32_t>(cf)});
      spec.proj_b = TensorF({static_cast<uint32_t>(cfg.arch.in_channels)});
      break;
    }
  }
  return spec;
}

namespace {

struct FusionFoldScorer : FoldScorer {
  const FusionSpec* model;
  meta::FusionScorer scorer;
  std::unordered_map<size_t, meta::QueryEmbedding>* cache;

  FusionFoldScorer(const FusionSpec& m, const FeatureSet& pool,
                   const std::vector<std::vector<size_t>>& support, double gamma,
                   std::unordered_map<size_t, meta::QueryEmbedding>* c)
      : model(&m), scorer(m, pool, support), cache(c) {
    scorer.set_gamma(gamma);
  }

  std::vector<double> score(const FeatureSet& fs, size_t idx) override {
    auto it = cache->find(idx);
    if (it == cache->end())
      it = cache->emplace(idx, meta::embed_sample(*model, *fs.features[idx])).first;
    return scorer.score(it->second);
  }
};

struct FoldModel {
  LosoFold fold;
  FusionSpec model;
};

std::vector<FoldModel> train_all_folds(const DatasetManifest& manifest, FeatureStore& store,
                                       const PipelineConfig& cfg, Variant variant,
                                       const std::filesystem::path& work_dir, AuditLog* audit) {
  const auto folds = loso_split(manifest);
  const DatasetManifest balanced =
      build_union_balanced(manifest, store.config().flow, cfg.magnify_cap, work_dir);

  std::vector<FoldModel> out;
  for (size_t fi = 0; fi < folds.size(); ++fi) {
    const LosoFold& fold = folds[fi];
    FeatureSet pool = data::build_feature_set(manifest, fold.train_idx, store);

    FusionSpec init;
    if (variant == Variant::single) {
      init = init_fusion(variant, {}, {}, pool, cfg, fi);
    } else {
      const DatasetManifest bal_fold =
          balanced_for_fold(balanced, manifest, fold, cfg.magnify_cap);
      auto gfe = train_fold_gfe(manifest, fold, store, cfg);
      auto afe = train_fold_afe(manifest, bal_fold, fold, store, cfg);
      if (audit) {
        audit->merge(fold.test_subject, gfe.consumed_clip_ids);
        audit->merge(fold.test_subject, afe.consumed_clip_ids);
      }
      init = init_fusion(variant, gfe.encoder, afe.encoder, pool, cfg, fi);
    }

    meta::MetaConfig mcfg = cfg.meta;
    mcfg.fold_subject = fold.test_subject;
    mcfg.seed = mix_seed(cfg.seed, 0x3e7a, fi);
    meta::MetaResult mres = meta::train_mpfnet(pool, std::move(init), mcfg);
    if (audit) audit->merge(fold.test_subject, mres.consumed_clip_ids);

    out.push_back({fold, std::move(mres.model)});
  }
  return out;
}

MetricsReport evaluate_all_folds(const DatasetManifest& manifest, FeatureStore& store,
                                 const PipelineConfig& cfg,
                                 const std::vector<FoldModel>& models, double gamma) {
  MetricsReport report;
  report.classes = manifest.label_space.classes;
  for (size_t fi = 0; fi < models.size(); ++fi) {
    const auto& fm = models[fi];
    FeatureSet pool = data::build_feature_set(manifest, fm.fold.train_idx, store);
    FeatureSet test = data::build_feature_set(manifest, fm.fold.test_idx, store);
    auto preds = evaluate_fold_with_model(fm.model, test, pool, cfg.meta.shot,
                                          cfg.support_resamplings,
                                          mix_seed(cfg.seed, 0xf01d, fi), gamma);
    FoldReport fr;
    fr.subject = fm.fold.test_subject;
    fr.cm = ConfusionMatrix::zero(report.classes);
    for (const auto& p : preds) fr.cm.add(p.true_cls, p.pred_cls);
    report.folds.push_back(std::move(fr));
    report.predictions.insert(report.predictions.end(), preds.begin(), preds.end());
  }
  report.finalize();
  return report;
}

}  // namespace

data::DatasetManifest build_union_balanced(const DatasetManifest& manifest,
                                           const std::string& flow_port, int cap,
                                           const std::filesystem::path& work_dir) {
  std::filesystem::create_directories(work_dir);
  const auto cache = work_dir / ("balanced.union.cap" + std::to_string(cap) + ".jsonl");
  if (std::filesystem::exists(cache)) return data::load_manifest(cache);

  std::map<std::string, int> union_phi;
  for (const auto& fold : loso_split(manifest)) {
    const auto counts = manifest.class_counts({fold.test_subject});
    const auto plan = magnify::plan_balancing(counts, cap);
    for (const auto& [cls, phi] : plan.per_class)
      union_phi[cls] = std::max(union_phi[cls], phi);
  }
  magnify::MagnificationPlan union_plan;
  union_plan.cap = cap;
  union_plan.per_class = union_phi;
  const auto raw_counts = manifest.class_counts();
  for (const auto& [cls, phi] : union_phi)
    union_plan.predicted_counts[cls] =
        static_cast<int>(magnify::amplified_count(raw_counts.at(cls), phi));

  auto flow = preprocess::make_flow_port(flow_port);
  magnify::FlowWarpMagnifier magnifier(*flow);
  DatasetManifest balanced =
      magnify::build_balanced_dataset(manifest, union_plan, work_dir / "magnified", magnifier);
  data::save_manifest(balanced, cache);
  return balanced;
}

std::vector<Prediction> evaluate_fold_with_model(const FusionSpec& model,
                                                 const FeatureSet& test,
                                                 const FeatureSet& train, int shot,
                                                 int resamplings, uint64_t seed, double gamma) {
  const double g = std::isnan(gamma) ? model.gamma : gamma;
  std::unordered_map<size_t, meta::QueryEmbedding> cache;
  ScorerFactory factory = [&](const std::vector<std::vector<size_t>>& support) {
    return std::make_unique<FusionFoldScorer>(model, train, support, g, &cache);
  };
  return evaluate_fold(test, train, factory, shot, resamplings, seed);
}

MetricsReport run_loso(const DatasetManifest& manifest, FeatureStore& store,
                       const PipelineConfig& cfg, Variant variant,
                       const std::filesystem::path& work_dir, AuditLog* audit) {
  auto models = train_all_folds(manifest, store, cfg, variant, work_dir, audit);
  return evaluate_all_folds(manifest, store, cfg, models, cfg.gamma);
}

std::vector<SweepRow> sweep(const DatasetManifest& manifest, const PipelineConfig& cfg,
                            const std::string& param, const std::vector<double>& values,
                            const std::filesystem::path& work_dir) {
  check(!values.empty(), "sweep: empty grid");
  std::vector<SweepRow> rows;

  if (param == "gamma") {
    for (double v : values)
      check(v >= 0.0 && v <= 1.0, "sweep: gamma values must lie in [0,1]");
    FeatureStore store(work_dir / "features", cfg.preprocess);
    AuditLog audit;
    auto models =
        train_all_folds(manifest, store, cfg, Variant::parallel, work_dir, &audit);
    for (double v : values) {
      MetricsReport r = evaluate_all_folds(manifest, store, cfg, models, v);
      rows.push_back({v, r.acc, r.uf1, r.uar});
    }
    return rows;
  }

  if (param == "L") {
    for (double v : values)
      check(v >= 3 && v <= 20 && v == std::floor(v),
            "sweep: L values must be integers in [3,20]");
    for (double v : values) {
      PipelineConfig c = cfg;
      c.preprocess.sequence_length = static_cast<int>(v);
      c.arch.input_t = static_cast<int>(v) - 1;
      const auto dir = work_dir / ("L" + std::to_string(static_cast<int>(v)));
      FeatureStore store(dir / "features", c.preprocess);
      AuditLog audit;
      MetricsReport r = run_loso(manifest, store, c, cfg.sweep_variant, dir, &audit);
      rows.push_back({v, r.acc, r.uf1, r.uar});
    }
    return rows;
  }

  fail("sweep: unknown parameter '" + param + "' (expected 'L' or 'gamma')");
}

}  // namespace mpf::eval
