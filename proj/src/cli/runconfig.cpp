#include "mpf/cli/runconfig.hpp"

#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "mpf/backbone/checkpoint.hpp"

namespace mpf::cli {

using nlohmann::json;

std::string Overrides::describe() const {
  std::string s;
  if (seed) s += "seed=" + std::to_string(*seed) + " ";
  if (run_dir) s += "run_dir=" + *run_dir + " ";
  if (!s.empty()) s.pop_back();
  return s;
}

double default_gamma(const std::string& dataset_tag) {
  if (dataset_tag == "smic") return 0.8;
  if (dataset_tag == "casme2") return 0.7;
  if (dataset_tag == "samm") return 0.6;
  return 0.7;  // composite and synthetic
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

pretrain::TrainConfig parse_train(const json& j, const pretrain::TrainConfig& defaults) {
  pretrain::TrainConfig c = defaults;
  c.epochs = get_or(j, "epochs", c.epochs);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  c.lr.initial = get_or(j, "lr", c.lr.initial);
  c.lr.decay_factor = get_or(j, "lr_decay_factor", c.lr.decay_factor);
  c.lr.decay_every = get_or(j, "lr_decay_every", c.lr.decay_every);
  c.momentum = get_or(j, "momentum", c.momentum);
  c.weight_decay = get_or(j, "weight_decay", c.weight_decay);
  c.margin = get_or(j, "margin", c.margin);
  return c;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& config_path, const Overrides& overrides) {
  std::ifstream is(config_path);
  if (!is.good()) throw ConfigError("cannot open config file " + config_path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config parse failure: " + std::string(e.what()));
  }

  RunConfig cfg;
  try {
    cfg.dataset_tag = get_or<std::string>(j, "dataset_tag", "synthetic");
    cfg.seed = get_or<uint64_t>(j, "seed", 1);
    cfg.run_dir = get_or<std::string>(j, "run_dir", "mpf_run");
    cfg.external_manifest = get_or<std::string>(j, "manifest", "");

    if (j.contains("synth")) {
      const json& s = j["synth"];
      cfg.synth.seed = get_or<uint64_t>(s, "seed", 1);
      cfg.synth.n_subjects = get_or(s, "subjects", 4);
      cfg.synth.clips_per_class = get_or(s, "clips_per_class", 5);
      cfg.synth.height = get_or(s, "height", 32);
      cfg.synth.width = get_or(s, "width", 32);
      cfg.synth.motion_amplitude = get_or(s, "amplitude", 1.0);
      cfg.synth.direction_jitter = get_or(s, "direction_jitter", 0.0);
      cfg.synth.region_jitter = get_or(s, "region_jitter", 0.0);
      cfg.synth.texture_noise = get_or(s, "texture_noise", 0.01);
      cfg.synth.distractor_amplitude = get_or(s, "distractor_amplitude", 0.0);
      cfg.synth.distractor_count = get_or(s, "distractor_count", 1);
    }

    const json p = j.value("preprocess", json::object());
    cfg.pipeline.preprocess.sequence_length = get_or(p, "sequence_length", 11);
    cfg.pipeline.preprocess.interpolator = get_or<std::string>(p, "interpolator", "linear");
    cfg.pipeline.preprocess.flow = get_or<std::string>(p, "flow", "farneback");
    cfg.pipeline.preprocess.precomputed_dir = get_or<std::string>(p, "precomputed_dir", "");

    cfg.pipeline.magnify_cap = get_or(j.value("magnify", json::object()), "cap", 5);

    if (j.contains("backbone")) {
      const json& b = j["backbone"];
      auto& a = cfg.pipeline.arch;
      a.stem_channels = get_or(b, "stem_channels", a.stem_channels);
      a.embedding_dim = get_or(b, "embedding_dim", a.embedding_dim);
      a.ca_reduction = get_or(b, "ca_reduction", a.ca_reduction);
      if (b.contains("inception_a")) {
        auto v = b["inception_a"].get<std::vector<int>>();
        if (v.size() != 6) throw ConfigError("backbone.inception_a needs 6 widths");
        a.inception_a = {v[0], v[1], v[2], v[3], v[4], v[5]};
      }
      if (b.contains("inception_b")) {
        auto v = b["inception_b"].get<std::vector<int>>();
        if (v.size() != 6) throw ConfigError("backbone.inception_b needs 6 widths");
        a.inception_b = {v[0], v[1], v[2], v[3], v[4], v[5]};
      }
      a.init_scheme = backbone::init_scheme_from_name(
          get_or<std::string>(b, "init_scheme", "fan_in_scaled"));
    }

    pretrain::TrainConfig gfe_defaults;
    gfe_defaults.stage = pretrain::Stage::gfe;
    gfe_defaults.epochs = 60;
    gfe_defaults.batch_size = 128;
    gfe_defaults.lr = {0.01, 1.0, 0};
    cfg.pipeline.gfe = parse_train(j.value("gfe", json::object()), gfe_defaults);

    pretrain::TrainConfig afe_defaults;
    afe_defaults.stage = pretrain::Stage::afe;
    afe_defaults.epochs = 80;
    afe_defaults.batch_size = 32;
    afe_defaults.lr = {0.001, 0.1, 10};
    cfg.pipeline.afe = parse_train(j.value("afe", json::object()), afe_defaults);

    const json m = j.value("meta", json::object());
    auto& mc = cfg.pipeline.meta;
    mc.way = get_or(m, "way", 3);
    mc.shot = get_or(m, "shot", 5);
    mc.query = get_or(m, "query", 5);
    mc.batches = get_or(m, "batches", 100);
    mc.episodes_per_batch = get_or(m, "episodes_per_batch", 4);
    mc.lr.initial = get_or(m, "lr", 0.05);
    mc.momentum = get_or(m, "momentum", 0.9);
    mc.weight_decay = get_or(m, "weight_decay", 0.0);
    mc.freeze_encoders = get_or(m, "freeze_encoders", false);
    cfg.pipeline.gamma = get_or(m, "gamma", default_gamma(cfg.dataset_tag));

    const json e = j.value("eval", json::object());
    cfg.pipeline.support_resamplings = get_or(e, "support_resamplings", 10);
    for (const auto& v :
         get_or<std::vector<std::string>>(e, "variants", {"single", "P", "C"}))
      cfg.variants.push_back(meta::variant_from_name(v));

    const json sw = j.value("sweep", json::object());
    cfg.sweep_param = get_or<std::string>(sw, "param", "gamma");
    cfg.sweep_values = get_or<std::vector<double>>(sw, "values", {});
    if (cfg.sweep_values.empty()) {
      if (cfg.sweep_param == "gamma")
        for (int i = 0; i <= 10; ++i) cfg.sweep_values.push_back(i / 10.0);
      else
        for (int v = 3; v <= 20; ++v) cfg.sweep_values.push_back(v);
    }
  } catch (const json::exception& e) {
    throw ConfigError("config field error: " + std::string(e.what()));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  // precedence: flag > environment > file
  if (const char* env = std::getenv("MPF_RUN_DIR"); env && *env) cfg.run_dir = env;
  if (overrides.run_dir) cfg.run_dir = *overrides.run_dir;
  if (overrides.seed) cfg.seed = *overrides.seed;
  cfg.overrides_applied = overrides.describe();
  cfg.pipeline.seed = cfg.seed;

  // validation
  const int L = cfg.pipeline.preprocess.sequence_length;
  if (L < 3 || L > 20) throw ConfigError("preprocess.sequence_length must be in [3,20]");
  if (cfg.pipeline.gamma < 0.0 || cfg.pipeline.gamma > 1.0)
    throw ConfigError("meta.gamma must be in [0,1]");
  if (cfg.pipeline.meta.way != 3 && cfg.pipeline.meta.way != 5)
    throw ConfigError("meta.way must be 3 or 5");
  if (cfg.pipeline.meta.shot < 1 || cfg.pipeline.meta.query < 1)
    throw ConfigError("meta.shot and meta.query must be >= 1");
  if (cfg.pipeline.magnify_cap < 1 || cfg.pipeline.magnify_cap > data::kMagnificationCap)
    throw ConfigError("magnify.cap must be in [1,14]");
  if (cfg.pipeline.support_resamplings < 1)
    throw ConfigError("eval.support_resamplings must be >= 1");
  if (cfg.variants.empty()) throw ConfigError("eval.variants is empty");
  if (!cfg.external_manifest.empty() && !std::filesystem::exists(cfg.external_manifest))
    throw ConfigError("manifest path does not exist: " + cfg.external_manifest.string());
  if (cfg.sweep_param != "gamma" && cfg.sweep_param != "L")
    throw ConfigError("sweep.param must be 'gamma' or 'L'");
  for (double v : cfg.sweep_values) {
    if (cfg.sweep_param == "gamma" && (v < 0.0 || v > 1.0))
      throw ConfigError("sweep gamma values must lie in [0,1]");
    if (cfg.sweep_param == "L" && (v < 3 || v > 20))
      throw ConfigError("sweep L values must lie in [3,20]");
  }

  // canonical resolved dump (config round trip is a fixed point of this form)
  json resolved = j;
  resolved["seed"] = cfg.seed;
  resolved["run_dir"] = cfg.run_dir.string();
  cfg.canonical_json = resolved.dump(2);

  return cfg;
}

void finalize_arch(RunConfig& cfg, const data::DatasetManifest& manifest) {
  auto& a = cfg.pipeline.arch;
  a.in_channels = 5;
  a.input_t = cfg.pipeline.preprocess.sequence_length - 1;
  a.input_h = manifest.frame_h;
  a.input_w = manifest.frame_w;
  try {
    a.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace mpf::cli
