#include <cmath>

#include "doctest.h"
#include "mpf/core/rng.hpp"
#include "mpf/core/tensor_io.hpp"
#include "mpf/data/synthetic.hpp"
#include "mpf/magnify/magnify.hpp"
#include "test_support.hpp"

using namespace mpf;
using namespace mpf::magnify;
using mpf::preprocess::FlowContext;
using mpf::preprocess::FrameSequence;

namespace {

struct SynthClip {
  data::DatasetManifest manifest;
  data::ClipRecord rec;
  FrameSequence seq;
  FlowContext ctx;
};

SynthClip make_clip(const std::string& tag, double amp, int hw = 64) {
  data::SynthSpec spec;
  spec.seed = 17;
  spec.n_subjects = 2;
  spec.clips_per_class = 1;
  spec.height = hw;
  spec.width = hw;
  spec.motion_amplitude = amp;
  SynthClip c;
  c.manifest = data::synth_generate(spec, testsup::scratch_dir(tag));
  c.rec = c.manifest.records[0];  // first record: class "negative"
  c.seq = preprocess::load_frame_sequence(c.rec);
  c.ctx.clip_id = c.rec.clip_id;
  c.ctx.gt_path = data::gt_flow_path(c.rec.frames_path);
  c.ctx.n_frames = 2;
  return c;
}

}  // namespace

TEST_CASE("phi = 0 returns the input bit-exact") {
  SynthClip c = make_clip("mag_phi0", 1.0);
  preprocess::OracleFlow oracle;
  FlowWarpMagnifier mag(oracle);
  FrameSequence out = magnify_sequence(c.seq, 0, mag, c.ctx);
  CHECK(out.frames.values() == c.seq.frames.values());
}

TEST_CASE("static input is unchanged for any phi") {
  SynthClip c = make_clip("mag_static", 0.0);
  preprocess::OracleFlow oracle;
  FlowWarpMagnifier mag(oracle);
  for (int phi : {1, 4, 14}) {
    FrameSequence out = magnify_sequence(c.seq, phi, mag, c.ctx);
    CHECK(out.frames.values() == c.seq.frames.values());
  }
}

TEST_CASE("negative phi is rejected") {
  SynthClip c = make_clip("mag_neg", 1.0);
  preprocess::OracleFlow oracle;
  FlowWarpMagnifier mag(oracle);
  CHECK_THROWS_AS(magnify_sequence(c.seq, -1, mag, c.ctx), Error);
}

TEST_CASE("displacement grows as (1+phi) * delta within 0.25 px") {
  SynthClip c = make_clip("mag_linear", 1.0);
  preprocess::OracleFlow oracle;
  FlowWarpMagnifier mag(oracle);
  auto box = data::class_regions(c.rec.label, 64, 64)[0];
  for (int phi : {1, 2, 4}) {
    FrameSequence out = magnify_sequence(c.seq, phi, mag, c.ctx);
    // The negative-class region moves straight down. Keep the tracked block's
    // targets clear of the trailing ramp (forward-warp fold-over lands
    // there), while still overlapping resplatted rows so the hole-fill ghost
    // cannot tie the match at zero shift.
    auto [dx, dy] = testsup::measure_block_shift(out.frame(0), out.frame(1), box.r0 + 2,
                                                 box.r1 - 3 - phi, box.c0 + 7, box.c1 - 7, 8);
    const double want = 1.0 + phi;
    INFO("phi ", phi, " measured (", dx, ",", dy, ")");
    CHECK(std::fabs(dy - want) <= 0.25);
    CHECK(std::fabs(dx) <= 0.25);
  }
}

TEST_CASE("amplified_count reproduces the published per-class rows") {
  CHECK(amplified_count(70, 8) == 630);
  CHECK(amplified_count(25, 14) == 375);
  CHECK(amplified_count(92, 3) == 368);
  CHECK_THROWS_AS(amplified_count(0, 3), Error);
  CHECK_THROWS_AS(amplified_count(10, 0), Error);
}

TEST_CASE("plan_balancing applies the stated rule") {
  MagnificationPlan p = plan_balancing({{"neg", 70}, {"pos", 51}, {"sur", 43}}, 14);
  CHECK(p.per_class["neg"] == 8);
  CHECK(p.per_class["pos"] == 12);
  CHECK(p.per_class["sur"] == 14);
  CHECK(p.predicted_counts["neg"] == 630);
  CHECK(p.predicted_counts["pos"] == 663);
  CHECK(p.predicted_counts["sur"] == 645);

  MagnificationPlan eq = plan_balancing({{"a", 9}, {"b", 9}}, 14);
  CHECK(eq.per_class["a"] == 14);
  CHECK(eq.per_class["b"] == 14);
  CHECK(eq.predicted_counts["a"] == 9 * 15);

  MagnificationPlan cl = plan_balancing({{"a", 100}, {"b", 10}}, 14);
  CHECK(cl.per_class["a"] == 1);
  CHECK(cl.per_class["b"] == 14);
  CHECK(cl.predicted_counts["a"] == 200);
  CHECK(cl.predicted_counts["b"] == 150);

  CHECK_THROWS_AS(plan_balancing({}, 14), Error);
}

TEST_CASE("balancing reduces imbalance whenever counts are unequal") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, int> counts;
    counts["a"] = rng.uniform_int(5, 120);
    counts["b"] = rng.uniform_int(5, 120);
    counts["c"] = rng.uniform_int(5, 120);
    int lo = std::min({counts["a"], counts["b"], counts["c"]});
    int hi = std::max({counts["a"], counts["b"], counts["c"]});
    if (lo == hi) continue;
    MagnificationPlan p = plan_balancing(counts, 14);
    int plo = INT32_MAX, phi = 0;
    for (auto& [cls, n] : p.predicted_counts) {
      plo = std::min(plo, n);
      phi = std::max(phi, n);
    }
    CHECK(static_cast<double>(phi) / plo < static_cast<double>(hi) / lo);
  }
}

TEST_CASE("build_balanced_dataset emits originals plus magnified copies") {
  data::SynthSpec spec;
  spec.seed = 23;
  spec.n_subjects = 2;
  spec.clips_per_class = 2;  // 12 records, 4 per class
  spec.height = 32;
  spec.width = 32;
  auto dir = testsup::scratch_dir("mag_build");
  auto m = data::synth_generate(spec, dir);

  MagnificationPlan plan;
  plan.cap = 14;
  for (const auto& cls : m.label_space.classes) plan.per_class[cls] = 1;

  preprocess::OracleFlow oracle;
  FlowWarpMagnifier mag(oracle);
  auto out_dir = testsup::scratch_dir("mag_build_out");
  data::DatasetManifest out = build_balanced_dataset(m, plan, out_dir, mag);
  CHECK(out.records.size() == 24);  // one copy each

  int magnified = 0;
  for (const auto& r : out.records) {
    if (r.magnification_factor > 0) {
      ++magnified;
      CHECK(r.clip_id.find("__mag") != std::string::npos);
      CHECK(std::filesystem::exists(r.frames_path));
      CHECK(std::filesystem::exists(data::gt_flow_path(r.frames_path)));
    }
  }
  CHECK(magnified == 12);

  // copies keep their source subject
  for (const auto& r : out.records)
    if (r.magnification_factor > 0) {
      std::string base = r.clip_id.substr(0, r.clip_id.find("__mag"));
      bool found = false;
      for (const auto& o : m.records)
        if (o.clip_id == base) {
          CHECK(o.subject_id == r.subject_id);
          found = true;
        }
      CHECK(found);
    }

  // plan with a class missing from the manifest is rejected
  MagnificationPlan bad;
  bad.per_class["nonexistent"] = 2;
  CHECK_THROWS_AS(build_balanced_dataset(m, bad, out_dir, mag), Error);
}
