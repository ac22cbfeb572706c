#include <cmath>

#include "doctest.h"
#include "mpf/core/tensor_io.hpp"
#include "mpf/data/synthetic.hpp"
#include "mpf/preprocess/pipeline.hpp"
#include "test_support.hpp"

using namespace mpf;
using namespace mpf::preprocess;
namespace fs = std::filesystem;

namespace {

TensorF const_frame(float v, uint32_t h = 16, uint32_t w = 16) {
  TensorF f({3, h, w});
  f.fill(v);
  return f;
}

}  // namespace

TEST_CASE("interpolation endpoints are the inputs, bit-exact") {
  LinearInterpolator lin;
  TensorF onset = const_frame(0.25f);
  TensorF apex = const_frame(0.75f);
  onset[5] = 0.123456f;
  apex[5] = 0.654321f;
  FrameSequence seq = interpolate_sequence(onset, apex, 11, lin);
  CHECK(seq.length() == 11);
  CHECK(seq.frame(0).values() == onset.values());
  CHECK(seq.frame(10).values() == apex.values());
}

TEST_CASE("linear blend: all-0 to all-1 gives frame t = t/10") {
  LinearInterpolator lin;
  FrameSequence seq = interpolate_sequence(const_frame(0.0f), const_frame(1.0f), 11, lin);
  for (int t = 0; t < 11; ++t) {
    TensorF f = seq.frame(t);
    for (size_t i = 0; i < f.size(); ++i)
      CHECK(f[i] == doctest::Approx(t / 10.0).epsilon(1e-6));
  }
}

TEST_CASE("identical onset and apex give identical frames") {
  LinearInterpolator lin;
  TensorF onset = const_frame(0.4f);
  FrameSequence seq = interpolate_sequence(onset, onset, 7, lin);
  for (int t = 0; t < 7; ++t) CHECK(seq.frame(t).values() == onset.values());
}

TEST_CASE("interpolation rejects bad inputs") {
  LinearInterpolator lin;
  CHECK_THROWS_AS(interpolate_sequence(const_frame(0), const_frame(0, 8, 8), 11, lin), Error);
  CHECK_THROWS_AS(interpolate_sequence(const_frame(0), const_frame(0), 1, lin), Error);
}

TEST_CASE("frame difference is symmetric, zero on identical frames, channel-exact") {
  TensorF a = const_frame(0.3f);
  TensorF b = a;
  TensorF z = frame_difference(a, b);
  for (size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0f);

  // +0.1 in G only
  const size_t plane = 16 * 16;
  for (size_t p = 0; p < plane; ++p) b[plane + p] += 0.1f;
  TensorF d1 = frame_difference(a, b);
  TensorF d2 = frame_difference(b, a);
  CHECK(d1.values() == d2.values());
  for (size_t p = 0; p < plane; ++p) {
    CHECK(d1[p] == 0.0f);
    CHECK(d1[plane + p] == doctest::Approx(0.1).epsilon(1e-5));
    CHECK(d1[2 * plane + p] == 0.0f);
  }
}

TEST_CASE("fusion places channels at their documented slots") {
  TensorF flows({2, 10, 8, 8});
  TensorF diffs({3, 10, 8, 8});
  flows.fill(2.0f);
  diffs.fill(3.0f);
  TensorF fused = fuse_features(flows, diffs);
  CHECK(fused.dims() == std::vector<uint32_t>{5, 10, 8, 8});
  const size_t block = 10 * 8 * 8;
  for (size_t c = 0; c < 5; ++c)
    for (size_t i = 0; i < block; ++i)
      CHECK(fused[c * block + i] == (c < 2 ? 2.0f : 3.0f));

  TensorF zf({2, 4, 8, 8}), zd({3, 4, 8, 8});
  TensorF zfused = fuse_features(zf, zd);
  for (size_t i = 0; i < zfused.size(); ++i) CHECK(zfused[i] == 0.0f);

  CHECK_THROWS_AS(fuse_features(TensorF({2, 9, 8, 8}), diffs), Error);
}

TEST_CASE("oracle flow reads ground truth exactly on the raw pair") {
  auto dir = testsup::scratch_dir("pp_oracle");
  data::SynthSpec spec;
  spec.seed = 2;
  spec.n_subjects = 2;
  spec.clips_per_class = 1;
  spec.height = 48;
  spec.width = 48;
  spec.motion_amplitude = 1.0;
  auto m = data::synth_generate(spec, dir);

  // find a "positive" clip: first region shifts 1 px rightward
  const data::ClipRecord* rec = nullptr;
  for (const auto& r : m.records)
    if (r.label == "positive") {
      rec = &r;
      break;
    }
  REQUIRE(rec != nullptr);

  FrameSequence seq = load_frame_sequence(*rec);
  OracleFlow oracle;
  FlowContext ctx;
  ctx.clip_id = rec->clip_id;
  ctx.gt_path = data::gt_flow_path(rec->frames_path);
  ctx.from = 0;
  ctx.to = 1;
  ctx.n_frames = 2;
  TensorF flow = optical_flow(seq.frame(0), seq.frame(1), oracle, ctx);

  auto box = data::class_regions("positive", 48, 48)[0];
  const size_t plane = 48 * 48;
  const size_t p = static_cast<size_t>(box.center_r) * 48 + box.center_c;
  CHECK(flow[p] == doctest::Approx(1.0).epsilon(1e-6));          // u = 1
  CHECK(flow[plane + p] == doctest::Approx(0.0).epsilon(1e-6));  // v = 0

  // flow vanishes outside every class region
  double outside = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 48; ++c)
      outside += std::fabs(flow[static_cast<size_t>(r) * 48 + c]);
  CHECK(outside == 0.0);
}

TEST_CASE("classical flow: identical frames give zero flow") {
  auto dir = testsup::scratch_dir("pp_farneback_zero");
  data::SynthSpec spec;
  spec.seed = 4;
  spec.n_subjects = 2;
  spec.clips_per_class = 1;
  spec.height = 64;
  spec.width = 64;
  auto m = data::synth_generate(spec, dir);
  FrameSequence seq = load_frame_sequence(m.records[0]);
  FarnebackFlow fb;
  FlowContext ctx;
  TensorF flow = fb.compute(seq.frame(0), seq.frame(0), ctx);
  for (size_t i = 0; i < flow.size(); ++i) CHECK(std::fabs(flow[i]) <= 1e-3);
}

TEST_CASE("classical flow tracks synthetic displacements within 0.3 px MEPE") {
  auto dir = testsup::scratch_dir("pp_farneback_acc");
  for (double amp : {1.0, 2.0}) {
    data::SynthSpec spec;
    spec.seed = 11;
    spec.n_subjects = 2;
    spec.clips_per_class = 1;
    spec.height = 64;
    spec.width = 64;
    spec.motion_amplitude = amp;
    auto sub = dir / ("amp" + std::to_string(static_cast<int>(amp * 10)));
    auto m = data::synth_generate(spec, sub);
    FarnebackFlow fb;
    for (const auto& rec : m.records) {
      FrameSequence seq = load_frame_sequence(rec);
      FlowContext ctx;
      TensorF est = fb.compute(seq.frame(0), seq.frame(1), ctx);
      TensorF gt = read_tensor(data::gt_flow_path(rec.frames_path));
      const size_t plane = 64 * 64;
      double epe = 0;
      for (size_t p = 0; p < plane; ++p) {
        const double du = est[p] - gt[p];
        const double dv = est[plane + p] - gt[plane + p];
        epe += std::sqrt(du * du + dv * dv);
      }
      epe /= plane;
      INFO("clip ", rec.clip_id, " amp ", amp, " mepe ", epe);
      CHECK(epe <= 0.3);
    }
  }
}

TEST_CASE("preprocess_clip: shape contract and static-clip behavior") {
  auto dir = testsup::scratch_dir("pp_clip");
  data::SynthSpec spec;
  spec.seed = 6;
  spec.n_subjects = 2;
  spec.clips_per_class = 1;
  spec.height = 128;
  spec.width = 128;
  auto m = data::synth_generate(spec, dir);

  PreprocessConfig cfg;
  cfg.sequence_length = 11;
  cfg.flow = "oracle";
  FusedFeature f = preprocess_clip(m.records[0], cfg);
  CHECK(f.tensor.dims() == std::vector<uint32_t>{5, 10, 128, 128});

  // static corpus: flow ~ 0 via classical port, diffs exactly 0
  data::SynthSpec stat = spec;
  stat.motion_amplitude = 0.0;
  stat.height = 64;
  stat.width = 64;
  auto m2 = data::synth_generate(stat, testsup::scratch_dir("pp_clip_static"));
  PreprocessConfig cfg2;
  cfg2.flow = "farneback";
  FusedFeature f2 = preprocess_clip(m2.records[0], cfg2);
  const size_t block = static_cast<size_t>(10) * 64 * 64;
  for (size_t i = 0; i < 2 * block; ++i) CHECK(std::fabs(f2.tensor[i]) <= 1e-3);
  for (size_t i = 2 * block; i < 5 * block; ++i) CHECK(f2.tensor[i] == 0.0f);
}

TEST_CASE("precomputed flow reader sums adjacent spans") {
  auto dir = testsup::scratch_dir("pp_precomp");
  TensorF per_pair({2, 3, 8, 8});
  const size_t plane = 64;
  for (int t = 0; t < 3; ++t)
    for (size_t p = 0; p < plane; ++p) {
      per_pair[(0 * 3 + t) * plane + p] = 0.5f;
      per_pair[(1 * 3 + t) * plane + p] = -0.25f;
    }
  write_tensor(per_pair, dir / "clipX.flow.mef");

  PrecomputedFlow port;
  FlowContext ctx;
  ctx.clip_id = "clipX";
  ctx.precomputed_dir = dir;
  ctx.n_frames = 4;
  ctx.from = 1;
  ctx.to = 2;
  TensorF a({3, 8, 8});
  TensorF one = port.compute(a, a, ctx);
  CHECK(one[0] == doctest::Approx(0.5));
  ctx.from = 0;
  ctx.to = 3;
  TensorF all = port.compute(a, a, ctx);
  CHECK(all[0] == doctest::Approx(1.5));
  CHECK(all[plane] == doctest::Approx(-0.75));
}
