#include <cstdio>

#include "CLI11.hpp"
#include "mpf/cli/stages.hpp"

// Exit codes: 0 ok (including skip-via-ledger), 1 stage failure,
// 2 config validation failure, 3 missing upstream artifact.
int main(int argc, char** argv) {
  CLI::App app{"mpfnet: few-shot micro-expression recognition pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir_flag;
  int64_t seed_flag = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration file (JSON)")->required();
    cmd->add_option("--run-dir", run_dir_flag,
                    "override the run directory (also via MPF_RUN_DIR)");
    cmd->add_option("--seed", seed_flag, "override every stage seed");
  };

  struct Cmd {
    const char* name;
    const char* help;
    void (*fn)(const mpf::cli::RunConfig&);
  };
  const Cmd cmds[] = {
      {"synth", "generate the synthetic corpus", mpf::cli::stage_synth},
      {"magnify", "motion-magnify and balance the dataset", mpf::cli::stage_magnify},
      {"preprocess", "compute fused spatiotemporal features", mpf::cli::stage_preprocess},
      {"pretrain-gfe", "triplet-pretrain the generic encoder per fold",
       mpf::cli::stage_pretrain_gfe},
      {"pretrain-afe", "supervised-pretrain the advanced encoder per fold",
       mpf::cli::stage_pretrain_afe},
      {"train", "episodic meta-training per fold and variant", mpf::cli::stage_train},
      {"eval", "leave-one-subject-out evaluation", mpf::cli::stage_eval},
      {"sweep", "hyperparameter sweep table (gamma or L)", mpf::cli::stage_sweep},
      {"report", "render metric tables and confusion matrices", mpf::cli::stage_report},
  };

  std::map<std::string, void (*)(const mpf::cli::RunConfig&)> dispatch;
  for (const auto& c : cmds) {
    add_common(app.add_subcommand(c.name, c.help));
    dispatch[c.name] = c.fn;
  }

  CLI11_PARSE(app, argc, argv);

  mpf::cli::Overrides overrides;
  if (!run_dir_flag.empty()) overrides.run_dir = run_dir_flag;
  if (seed_flag >= 0) overrides.seed = static_cast<uint64_t>(seed_flag);

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    const mpf::cli::RunConfig cfg = mpf::cli::load_run_config(config_path, overrides);
    dispatch.at(sub)(cfg);
    return 0;
  } catch (const mpf::cli::MissingUpstream& e) {
    std::fprintf(stderr, "error: %s\nrun the '%s' stage first\n", e.what(),
                 e.stage().c_str());
    return 3;
  } catch (const mpf::cli::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
