#pragma once

#include "mpf/cli/ledger.hpp"
#include "mpf/cli/runconfig.hpp"

namespace mpf::cli {

// Stage commands. Each is idempotent: a unit whose content-hash key matches
// a completed ledger entry (with outputs still present) is skipped. Stages
// throw MissingUpstream when a prerequisite artifact is absent.
void stage_synth(const RunConfig& cfg);
void stage_magnify(const RunConfig& cfg);
void stage_preprocess(const RunConfig& cfg);
void stage_pretrain_gfe(const RunConfig& cfg);
void stage_pretrain_afe(const RunConfig& cfg);
void stage_train(const RunConfig& cfg);
void stage_eval(const RunConfig& cfg);
void stage_sweep(const RunConfig& cfg);
void stage_report(const RunConfig& cfg);

}  // namespace mpf::cli
