#pragma once

#include <optional>

#include "mpf/data/synthetic.hpp"
#include "mpf/eval/loso.hpp"

namespace mpf::cli {

// exit 2
class ConfigError : public Error {
 public:
  using Error::Error;
};

// exit 3; names the stage whose artifacts are missing
class MissingUpstream : public Error {
 public:
  MissingUpstream(const std::string& stage, const std::string& what)
      : Error("missing upstream stage '" + stage + "': " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Overrides {
  std::optional<uint64_t> seed;
  std::optional<std::string> run_dir;
  std::string describe() const;
};

struct RunConfig {
  std::filesystem::path run_dir = "mpf_run";
  uint64_t seed = 1;
  std::string dataset_tag = "synthetic";
  std::filesystem::path external_manifest;  // set: use it instead of the synth stage

  data::SynthSpec synth;
  eval::PipelineConfig pipeline;
  std::vector<meta::Variant> variants;
  std::string sweep_param = "gamma";
  std::vector<double> sweep_values;

  std::string canonical_json;  // resolved config, canonical dump
  std::string overrides_applied;

  std::filesystem::path manifest_path() const {
    return external_manifest.empty() ? run_dir / "corpus" / "manifest.jsonl"
                                     : external_manifest;
  }
};

// Parses, applies overrides (flag > MPF_RUN_DIR env > file), validates.
RunConfig load_run_config(const std::filesystem::path& config_path, const Overrides& overrides);

// Fills in the architecture's input dims from the corpus geometry.
void finalize_arch(RunConfig& cfg, const data::DatasetManifest& manifest);

// Tuned per-dataset defaults for the fusion coefficient.
double default_gamma(const std::string& dataset_tag);

}  // namespace mpf::cli
