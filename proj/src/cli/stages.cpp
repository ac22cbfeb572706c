#include "mpf/cli/stages.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mpf/backbone/checkpoint.hpp"

namespace mpf::cli {

using eval::LosoFold;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Timer {
  double t0 = now_ms();
  double elapsed() const { return now_ms() - t0; }
};

std::filesystem::path balanced_union_path(const RunConfig& cfg) {
  return cfg.run_dir / "magnify" /
         ("balanced.union.cap" + std::to_string(cfg.pipeline.magnify_cap) + ".jsonl");
}

std::filesystem::path features_marker(const RunConfig& cfg) {
  return cfg.run_dir / "features" / ".done";
}

data::DatasetManifest require_manifest(const RunConfig& cfg) {
  const auto p = cfg.manifest_path();
  if (!std::filesystem::exists(p))
    throw MissingUpstream("synth", "corpus manifest not found at " + p.string());
  return data::load_manifest(p);
}

data::DatasetManifest require_balanced(const RunConfig& cfg) {
  const auto p = balanced_union_path(cfg);
  if (!std::filesystem::exists(p))
    throw MissingUpstream("magnify", "balanced manifest not found at " + p.string());
  return data::load_manifest(p);
}

void require_features(const RunConfig& cfg) {
  if (!std::filesystem::exists(features_marker(cfg)))
    throw MissingUpstream("preprocess", "feature cache marker not found at " +
                                            features_marker(cfg).string());
}

std::string key_synth(const RunConfig& cfg) {
  std::ostringstream os;
  os << cfg.synth.seed << "|" << cfg.synth.n_subjects << "|" << cfg.synth.clips_per_class
     << "|" << cfg.synth.height << "x" << cfg.synth.width << "|"
     << cfg.synth.motion_amplitude << "|" << cfg.synth.direction_jitter << "|"
     << cfg.synth.region_jitter << "|" << cfg.synth.texture_noise;
  return hash_hex(fnv1a(os.str()));
}

std::string key_magnify(const RunConfig& cfg) {
  std::ostringstream os;
  os << hash_hex(fnv1a_file(cfg.manifest_path())) << "|" << cfg.pipeline.magnify_cap << "|"
     << cfg.pipeline.preprocess.flow;
  return hash_hex(fnv1a(os.str()));
}

std::string preprocess_config_str(const RunConfig& cfg) {
  const auto& p = cfg.pipeline.preprocess;
  std::ostringstream os;
  os << p.sequence_length << "|" << p.interpolator << "|" << p.flow << "|"
     << p.precomputed_dir.string();
  return os.str();
}

std::string key_preprocess(const RunConfig& cfg) {
  std::ostringstream os;
  os << hash_hex(fnv1a_file(cfg.manifest_path())) << "|"
     << hash_hex(fnv1a_file(balanced_union_path(cfg))) << "|" << preprocess_config_str(cfg);
  return hash_hex(fnv1a(os.str()));
}

std::string train_config_str(const pretrain::TrainConfig& c) {
  std::ostringstream os;
  os << c.epochs << "|" << c.batch_size << "|" << c.lr.initial << "|" << c.lr.decay_factor
     << "|" << c.lr.decay_every << "|" << c.momentum << "|" << c.weight_decay << "|"
     << c.margin;
  return os.str();
}

std::string key_pretrain(const RunConfig& cfg, const std::string& which,
                         const std::string& subject, const std::string& arch_json) {
  std::ostringstream os;
  os << key_preprocess(cfg) << "|" << which << "|" << subject << "|" << cfg.seed << "|"
     << arch_json << "|"
     << train_config_str(which == "gfe" ? cfg.pipeline.gfe : cfg.pipeline.afe);
  if (which == "afe") os << "|" << cfg.pipeline.magnify_cap;
  return hash_hex(fnv1a(os.str()));
}

std::string meta_config_str(const RunConfig& cfg) {
  const auto& m = cfg.pipeline.meta;
  std::ostringstream os;
  os << m.way << "|" << m.shot << "|" << m.query << "|" << m.batches << "|"
     << m.episodes_per_batch << "|" << m.lr.initial << "|" << m.momentum << "|"
     << m.weight_decay << "|" << m.freeze_encoders << "|" << cfg.pipeline.gamma;
  return os.str();
}

std::string key_train(const RunConfig& cfg, meta::Variant variant, const std::string& subject,
                      const std::string& arch_json) {
  std::ostringstream os;
  os << key_preprocess(cfg) << "|" << meta::variant_name(variant) << "|" << subject << "|"
     << cfg.seed << "|" << arch_json << "|" << meta_config_str(cfg);
  if (variant != meta::Variant::single)
    os << "|" << key_pretrain(cfg, "gfe", subject, arch_json) << "|"
       << key_pretrain(cfg, "afe", subject, arch_json);
  return hash_hex(fnv1a(os.str()));
}

std::string key_eval(const RunConfig& cfg, meta::Variant variant,
                     const std::vector<LosoFold>& folds, const std::string& arch_json) {
  std::ostringstream os;
  os << cfg.pipeline.support_resamplings << "|" << cfg.pipeline.meta.shot;
  for (const auto& f : folds) os << "|" << key_train(cfg, variant, f.test_subject, arch_json);
  return hash_hex(fnv1a(os.str()));
}

void write_audit(const RunConfig& cfg, const std::string& stage, const std::string& subject,
                 const std::vector<std::string>& clip_ids) {
  std::filesystem::create_directories(cfg.run_dir / "audit");
  std::ofstream os(cfg.run_dir / "audit" / (stage + "_" + subject + ".txt"), std::ios::trunc);
  check(os.good(), "audit: cannot write under " + (cfg.run_dir / "audit").string());
  for (const auto& c : clip_ids) os << c << "\n";
}

void write_resolved_config(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.run_dir);
  std::ofstream os(cfg.run_dir / "config.resolved.json", std::ios::trunc);
  os << cfg.canonical_json << "\n";
}

std::filesystem::path fusion_dir(const RunConfig& cfg, const std::string& subject,
                                 meta::Variant v) {
  return cfg.run_dir / "train" / subject / meta::variant_name(v);
}

}  // namespace

void stage_synth(const RunConfig& cfg) {
  StageLedger ledger(cfg.run_dir);
  write_resolved_config(cfg);
  if (!cfg.external_manifest.empty()) {
    std::printf("synth: external manifest supplied, nothing to generate\n");
    return;
  }
  const std::string key = key_synth(cfg);
  if (ledger.is_done("synth", key)) {
    std::printf("synth: up to date, skipped\n");
    return;
  }
  Timer t;
  data::synth_generate(cfg.synth, cfg.run_dir / "corpus");
  ledger.mark("synth", key, {"corpus/manifest.jsonl"}, t.elapsed(), cfg.overrides_applied);
  std::printf("synth: generated corpus under %s\n", (cfg.run_dir / "corpus").c_str());
}

void stage_magnify(const RunConfig& cfg) {
  StageLedger ledger(cfg.run_dir);
  const auto manifest = require_manifest(cfg);
  const std::string key = key_magnify(cfg);
  if (ledger.is_done("magnify", key)) {
    std::printf("magnify: up to date, skipped\n");
    return;
  }
  Timer t;
  const auto balanced = eval::build_union_balanced(manifest, cfg.pipeline.preprocess.flow,
                                                   cfg.pipeline.magnify_cap,
                                                   cfg.run_dir / "magnify");
  // per-fold balanced manifests, resumable artifacts for pretrain-afe
  for (const auto& fold : eval::loso_split(manifest)) {
    const auto bal_fold =
        eval::balanced_for_fold(balanced, manifest, fold, cfg.pipeline.magnify_cap);
    data::save_manifest(bal_fold,
                        cfg.run_dir / "magnify" / ("fold_" + fold.test_subject + ".jsonl"));
  }
  ledger.mark("magnify", key,
              {"magnify/balanced.union.cap" + std::to_string(cfg.pipeline.magnify_cap) +
               ".jsonl"},
              t.elapsed(), cfg.overrides_applied);
  std::printf("magnify: emitted %zu records (union plan)\n", balanced.records.size());
}

void stage_preprocess(const RunConfig& cfg) {
  StageLedger ledger(cfg.run_dir);
  const auto manifest = require_manifest(cfg);
  const auto balanced = require_balanced(cfg);
  const std::string key = key_preprocess(cfg);
  if (ledger.is_done("preprocess", key)) {
    std::printf("preprocess: up to date, skipped\n");
    return;
  }
  Timer t;
  data::FeatureStore store(cfg.run_dir / "features", cfg.pipeline.preprocess);
  size_t n = 0;
  for (const auto& r : balanced.records) {  // balanced includes every raw record
    store.get(r);
    ++n;
  }
  std::ofstream marker(features_marker(cfg), std::ios::trunc);
  marker << key << "\n";
  ledger.mark("preprocess", key, {"features/.done"}, t.elapsed(), cfg.overrides_applied);
  std::printf("preprocess: %zu clips featurized\n", n);
}

void stage_pretrain_gfe(const RunConfig& rc) {
  StageLedger ledger(rc.run_dir);
  auto manifest = require_manifest(rc);
  require_features(rc);
  RunConfig cfg = rc;
  finalize_arch(cfg, manifest);
  const std::string arch_json = backbone::config_to_json(cfg.pipeline.arch);
  data::FeatureStore store(cfg.run_dir / "features", cfg.pipeline.preprocess);

  for (const auto& fold : eval::loso_split(manifest)) {
    const std::string key = key_pretrain(cfg, "gfe", fold.test_subject, arch_json);
    const std::string unit = "pretrain-gfe:" + fold.test_subject;
    if (ledger.is_done(unit, key)) {
      std::printf("%s: up to date, skipped\n", unit.c_str());
      continue;
    }
    Timer t;
    auto res = eval::train_fold_gfe(manifest, fold, store, cfg.pipeline);
    const auto dir = cfg.run_dir / "pretrain" / fold.test_subject / "gfe";
    backbone::save_checkpoint(res.encoder, dir);
    pretrain::write_training_log(res.log, dir / "log.jsonl");
    write_audit(cfg, "pretrain-gfe", fold.test_subject, res.consumed_clip_ids);
    ledger.mark(unit, key,
                {"pretrain/" + fold.test_subject + "/gfe/meta.json"}, t.elapsed(),
                cfg.overrides_applied);
    std::printf("%s: final loss %.4f\n", unit.c_str(), res.log.back().loss);
  }
}

void stage_pretrain_afe(const RunConfig& rc) {
  StageLedger ledger(rc.run_dir);
  auto manifest = require_manifest(rc);
  require_features(rc);
  RunConfig cfg = rc;
  finalize_arch(cfg, manifest);
  const std::string arch_json = backbone::config_to_json(cfg.pipeline.arch);
  data::FeatureStore store(cfg.run_dir / "features", cfg.pipeline.preprocess);

  for (const auto& fold : eval::loso_split(manifest)) {
    const std::string key = key_pretrain(cfg, "afe", fold.test_subject, arch_json);
    const std::string unit = "pretrain-afe:" + fold.test_subject;
    if (ledger.is_done(unit, key)) {
      std::printf("%s: up to date, skipped\n", unit.c_str());
      continue;
    }
    const auto fold_manifest_path =
        cfg.run_dir / "magnify" / ("fold_" + fold.test_subject + ".jsonl");
    if (!std::filesystem::exists(fold_manifest_path))
      throw MissingUpstream("magnify", "per-fold balanced manifest missing: " +
                                           fold_manifest_path.string());
    const auto bal_fold = data::load_manifest(fold_manifest_path);
    Timer t;
    auto res = eval::train_fold_afe(manifest, bal_fold, fold, store, cfg.pipeline);
    const auto dir = cfg.run_dir / "pretrain" / fold.test_subject / "afe";
    backbone::save_checkpoint(res.encoder, dir);
    pretrain::write_training_log(res.log, dir / "log.jsonl");
    write_audit(cfg, "pretrain-afe", fold.test_subject, res.consumed_clip_ids);
    ledger.mark(unit, key,
                {"pretrain/" + fold.test_subject + "/afe/meta.json"}, t.elapsed(),
                cfg.overrides_applied);
    std::printf("%s: final acc %.3f\n", unit.c_str(), res.log.back().accuracy);
  }
}

void stage_train(const RunConfig& rc) {
  StageLedger ledger(rc.run_dir);
  auto manifest = require_manifest(rc);
  require_features(rc);
  RunConfig cfg = rc;
  finalize_arch(cfg, manifest);
  const std::string arch_json = backbone::config_to_json(cfg.pipeline.arch);
  data::FeatureStore store(cfg.run_dir / "features", cfg.pipeline.preprocess);
  const auto folds = eval::loso_split(manifest);

  for (size_t fi = 0; fi < folds.size(); ++fi) {
    const auto& fold = folds[fi];
    for (meta::Variant variant : cfg.variants) {
      const std::string vname = meta::variant_name(variant);
      const std::string key = key_train(cfg, variant, fold.test_subject, arch_json);
      const std::string unit = "train:" + fold.test_subject + ":" + vname;
      if (ledger.is_done(unit, key)) {
        std::printf("%s: up to date, skipped\n", unit.c_str());
        continue;
      }

      data::FeatureSet pool = data::build_feature_set(manifest, fold.train_idx, store);
      meta::FusionSpec init;
      if (variant == meta::Variant::single) {
        init = eval::init_fusion(variant, {}, {}, pool, cfg.pipeline, fi);
      } else {
        const auto gdir = cfg.run_dir / "pretrain" / fold.test_subject / "gfe";
        const auto adir = cfg.run_dir / "pretrain" / fold.test_subject / "afe";
        if (!std::filesystem::exists(gdir / "meta.json"))
          throw MissingUpstream("pretrain-gfe", "checkpoint missing: " + gdir.string());
        if (!std::filesystem::exists(adir / "meta.json"))
          throw MissingUpstream("pretrain-afe", "checkpoint missing: " + adir.string());
        auto gfe = backbone::load_checkpoint(gdir);
        auto afe = backbone::load_checkpoint(adir);
        init = eval::init_fusion(variant, gfe, afe, pool, cfg.pipeline, fi);
      }

      meta::MetaConfig mcfg = cfg.pipeline.meta;
      mcfg.fold_subject = fold.test_subject;
      mcfg.seed = mix_seed(cfg.pipeline.seed, 0x3e7a, fi);
      Timer t;
      auto res = meta::train_mpfnet(pool, std::move(init), mcfg);
      const auto dir = fusion_dir(cfg, fold.test_subject, variant);
      meta::save_fusion(res.model, dir);
      {
        std::ofstream os(dir / "log.jsonl", std::ios::trunc);
        for (const auto& e : res.log)
          os << "{\"batch\":" << e.batch << ",\"loss\":" << e.loss
             << ",\"query_acc\":" << e.query_acc << "}\n";
      }
      write_audit(cfg, "train-" + vname, fold.test_subject, res.consumed_clip_ids);
      ledger.mark(unit, key,
                  {"train/" + fold.test_subject + "/" + vname + "/fusion.json"}, t.elapsed(),
                  cfg.overrides_applied);
      std::printf("%s: final batch loss %.4f\n", unit.c_str(), res.log.back().loss);
    }
  }
}

void stage_eval(const RunConfig& rc) {
  StageLedger ledger(rc.run_dir);
  auto manifest = require_manifest(rc);
  require_features(rc);
  RunConfig cfg = rc;
  finalize_arch(cfg, manifest);
  const std::string arch_json = backbone::config_to_json(cfg.pipeline.arch);
  data::FeatureStore store(cfg.run_dir / "features", cfg.pipeline.preprocess);
  const auto folds = eval::loso_split(manifest);

  for (meta::Variant variant : cfg.variants) {
    const std::string vname = meta::variant_name(variant);
    const std::string key = key_eval(cfg, variant, folds, arch_json);
    const std::string unit = "eval:" + vname;
    if (ledger.is_done(unit, key)) {
      std::printf("%s: up to date, skipped\n", unit.c_str());
      continue;
    }
    for (const auto& fold : folds)
      if (!std::filesystem::exists(fusion_dir(cfg, fold.test_subject, variant) /
                                   "fusion.json"))
        throw MissingUpstream("train", "trained model missing for fold " + fold.test_subject +
                                           " variant " + vname);

    Timer t;
    eval::MetricsReport report;
    report.classes = manifest.label_space.classes;
    for (size_t fi = 0; fi < folds.size(); ++fi) {
      const auto& fold = folds[fi];
      auto model = meta::load_fusion(fusion_dir(cfg, fold.test_subject, variant));
      auto pool = data::build_feature_set(manifest, fold.train_idx, store);
      auto test = data::build_feature_set(manifest, fold.test_idx, store);
      auto preds = eval::evaluate_fold_with_model(
          model, test, pool, cfg.pipeline.meta.shot, cfg.pipeline.support_resamplings,
          mix_seed(cfg.pipeline.seed, 0xf01d, fi), std::nan(""));
      eval::FoldReport fr;
      fr.subject = fold.test_subject;
      fr.cm = eval::ConfusionMatrix::zero(report.classes);
      for (const auto& p : preds) fr.cm.add(p.true_cls, p.pred_cls);
      report.folds.push_back(std::move(fr));
      report.predictions.insert(report.predictions.end(), preds.begin(), preds.end());
    }
    report.finalize();
    eval::write_report(report, cfg.run_dir / "eval" / vname);
    ledger.mark(unit, key, {"eval/" + vname + "/report.json"}, t.elapsed(),
                cfg.overrides_applied);
    std::printf("eval %s: acc %.4f UF1 %.4f UAR %.4f\n", vname.c_str(), report.acc,
                report.uf1, report.uar);
  }
}

void stage_sweep(const RunConfig& rc) {
  StageLedger ledger(rc.run_dir);
  auto manifest = require_manifest(rc);
  RunConfig cfg = rc;
  finalize_arch(cfg, manifest);
  const std::string arch_json = backbone::config_to_json(cfg.pipeline.arch);

  std::ostringstream kv;
  kv << cfg.sweep_param;
  for (double v : cfg.sweep_values) kv << "," << v;
  const std::string key = hash_hex(fnv1a(kv.str() + "|" + key_preprocess(cfg)));
  if (ledger.is_done("sweep", key)) {
    std::printf("sweep: up to date, skipped\n");
    return;
  }

  Timer t;
  std::vector<eval::SweepRow> rows;
  if (cfg.sweep_param == "gamma") {
    require_features(cfg);
    data::FeatureStore store(cfg.run_dir / "features", cfg.pipeline.preprocess);
    const auto folds = eval::loso_split(manifest);
    // evaluation-time sweep over the staged parallel models
    std::vector<meta::FusionSpec> models;
    for (const auto& fold : folds) {
      const auto dir = fusion_dir(cfg, fold.test_subject, meta::Variant::parallel);
      if (!std::filesystem::exists(dir / "fusion.json"))
        throw MissingUpstream("train",
                              "variant P model missing for fold " + fold.test_subject);
      models.push_back(meta::load_fusion(dir));
    }
    for (double v : cfg.sweep_values) {
      eval::MetricsReport report;
      report.classes = manifest.label_space.classes;
      for (size_t fi = 0; fi < folds.size(); ++fi) {
        auto pool = data::build_feature_set(manifest, folds[fi].train_idx, store);
        auto test = data::build_feature_set(manifest, folds[fi].test_idx, store);
        auto preds = eval::evaluate_fold_with_model(
            models[fi], test, pool, cfg.pipeline.meta.shot,
            cfg.pipeline.support_resamplings, mix_seed(cfg.pipeline.seed, 0xf01d, fi), v);
        eval::FoldReport fr;
        fr.subject = folds[fi].test_subject;
        fr.cm = eval::ConfusionMatrix::zero(report.classes);
        for (const auto& p : preds) fr.cm.add(p.true_cls, p.pred_cls);
        report.folds.push_back(std::move(fr));
      }
      report.finalize();
      rows.push_back({v, report.acc, report.uf1, report.uar});
    }
  } else {
    rows = eval::sweep(manifest, cfg.pipeline, cfg.sweep_param, cfg.sweep_values,
                       cfg.run_dir / "sweep");
  }

  std::filesystem::create_directories(cfg.run_dir / "sweep");
  const std::string out = "sweep/" + cfg.sweep_param + ".csv";
  eval::write_sweep_table(rows, cfg.run_dir / out);
  ledger.mark("sweep", key, {out}, t.elapsed(), cfg.overrides_applied);
  std::printf("sweep: %zu rows -> %s\n", rows.size(), out.c_str());
}

void stage_report(const RunConfig& cfg) {
  bool any = false;
  std::string summary;
  for (meta::Variant variant : cfg.variants) {
    const std::string vname = meta::variant_name(variant);
    const auto dir = cfg.run_dir / "eval" / vname;
    if (!std::filesystem::exists(dir / "report.json")) continue;
    any = true;
    const auto report = eval::read_report(dir);
    summary += "=== variant " + vname + " ===\n" + eval::render_report_text(report) + "\n";
  }
  if (!any) throw MissingUpstream("eval", "no evaluation reports under " +
                                              (cfg.run_dir / "eval").string());
  std::filesystem::create_directories(cfg.run_dir / "report");
  std::ofstream os(cfg.run_dir / "report" / "summary.txt", std::ios::trunc);
  os << summary;
  std::fputs(summary.c_str(), stdout);
}

}  // namespace mpf::cli
