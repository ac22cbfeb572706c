#include <cmath>
#include <fstream>

#include "doctest.h"
#include "mpf/core/tensor_io.hpp"
#include "mpf/data/manifest.hpp"
#include "mpf/data/synthetic.hpp"
#include "test_support.hpp"

using namespace mpf;
using namespace mpf::data;
namespace fs = std::filesystem;

namespace {

DatasetManifest tiny_manifest(const fs::path& dir) {
  DatasetManifest m;
  m.label_space = LabelSpace::cde3();
  m.frame_h = 32;
  m.frame_w = 32;
  for (int i = 0; i < 2; ++i) {
    ClipRecord r;
    r.clip_id = "clip" + std::to_string(i);
    r.subject_id = "subjA";
    r.label = i == 0 ? "negative" : "positive";
    r.frames_path = dir / (r.clip_id + ".frames.mef");
    r.onset_index = 0;
    r.apex_index = 1;
    r.source_dataset = "synthetic";
    write_tensor(TensorF({3, 2, 32, 32}), r.frames_path);
    m.records.push_back(r);
  }
  return m;
}

uint64_t hash_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  uint64_t h = 1469598103934665603ULL;
  char c;
  while (is.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

TEST_CASE("manifest with two valid records round trips") {
  auto dir = testsup::scratch_dir("manifest_rt");
  DatasetManifest m = tiny_manifest(dir);
  save_manifest(m, dir / "manifest.jsonl");
  DatasetManifest r = load_manifest(dir / "manifest.jsonl");
  CHECK(r.records.size() == 2);
  CHECK(r.records[0].clip_id == "clip0");
  CHECK(r.records[1].label == "positive");
  CHECK(r.frame_h == 32);
}

TEST_CASE("onset >= apex is rejected naming the clip") {
  auto dir = testsup::scratch_dir("manifest_bad");
  DatasetManifest m = tiny_manifest(dir);
  m.records[1].onset_index = 3;
  m.records[1].apex_index = 3;
  try {
    m.validate();
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("clip1") != std::string::npos);
  }
}

TEST_CASE("unknown label and bad magnification are rejected") {
  auto dir = testsup::scratch_dir("manifest_bad2");
  DatasetManifest m = tiny_manifest(dir);
  m.records[0].label = "confused";
  CHECK_THROWS_AS(m.validate(), Error);
  m = tiny_manifest(dir);
  m.records[0].magnification_factor = 15;
  CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("missing frames file fails the load") {
  auto dir = testsup::scratch_dir("manifest_missing");
  DatasetManifest m = tiny_manifest(dir);
  save_manifest(m, dir / "manifest.jsonl");
  fs::remove(m.records[0].frames_path);
  CHECK_THROWS_AS(load_manifest(dir / "manifest.jsonl"), Error);
}

TEST_CASE("synthetic corpus: 16 subjects discoverable") {
  auto dir = testsup::scratch_dir("synth16");
  SynthSpec spec;
  spec.seed = 3;
  spec.n_subjects = 16;
  spec.clips_per_class = 1;
  spec.height = 32;
  spec.width = 32;
  synth_generate(spec, dir);
  DatasetManifest m = load_manifest(dir / "manifest.jsonl");
  CHECK(m.subjects().size() == 16);
  CHECK(m.records.size() == 16 * 3);
}

TEST_CASE("synthetic corpus: counts are subjects x clips x classes") {
  auto dir = testsup::scratch_dir("synth_counts");
  SynthSpec spec;
  spec.seed = 7;
  spec.n_subjects = 4;
  spec.clips_per_class = 5;
  spec.height = 32;
  spec.width = 32;
  DatasetManifest m = synth_generate(spec, dir);
  CHECK(m.records.size() == 60);
  auto counts = m.class_counts();
  CHECK(counts.size() == 3);
  for (const auto& [cls, n] : counts) CHECK(n == 20);
}

TEST_CASE("zero amplitude means identical onset and apex frames") {
  auto dir = testsup::scratch_dir("synth_zero");
  SynthSpec spec;
  spec.seed = 5;
  spec.n_subjects = 2;
  spec.clips_per_class = 1;
  spec.height = 32;
  spec.width = 32;
  spec.motion_amplitude = 0.0;
  DatasetManifest m = synth_generate(spec, dir);
  for (const auto& r : m.records) {
    TensorF frames = read_tensor(r.frames_path);
    const size_t plane = static_cast<size_t>(frames.dim(2)) * frames.dim(3);
    for (int c = 0; c < 3; ++c)
      for (size_t p = 0; p < plane; ++p)
        CHECK(frames[(c * 2 + 0) * plane + p] == frames[(c * 2 + 1) * plane + p]);
  }
}

TEST_CASE("same seed reproduces byte-identical corpora") {
  SynthSpec spec;
  spec.seed = 21;
  spec.n_subjects = 2;
  spec.clips_per_class = 2;
  spec.height = 32;
  spec.width = 32;
  auto d1 = testsup::scratch_dir("synth_det1");
  auto d2 = testsup::scratch_dir("synth_det2");
  synth_generate(spec, d1);
  synth_generate(spec, d2);
  for (auto& entry : fs::recursive_directory_iterator(d1)) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), d1);
    CHECK(fs::exists(d2 / rel));
    CHECK(hash_file(entry.path()) == hash_file(d2 / rel));
  }
}

TEST_CASE("ground-truth field carries exactly the amplitude at the region center") {
  auto dir = testsup::scratch_dir("synth_gt");
  SynthSpec spec;
  spec.seed = 13;
  spec.n_subjects = 2;
  spec.clips_per_class = 2;
  spec.height = 48;
  spec.width = 48;
  spec.motion_amplitude = 1.5;
  DatasetManifest m = synth_generate(spec, dir);
  for (const auto& r : m.records) {
    TensorF gt = read_tensor(gt_flow_path(r.frames_path));
    auto regions = class_regions(r.label, spec.height, spec.width);
    const auto& box = regions[0];
    const size_t plane = static_cast<size_t>(spec.height) * spec.width;
    const size_t p = static_cast<size_t>(box.center_r) * spec.width + box.center_c;
    const double u = gt[p], v = gt[plane + p];
    CHECK(std::sqrt(u * u + v * v) == doctest::Approx(1.5).epsilon(1e-6));
  }
}

TEST_CASE("rejects undersized corpora and bad amplitude") {
  auto dir = testsup::scratch_dir("synth_rej");
  SynthSpec spec;
  spec.n_subjects = 1;
  CHECK_THROWS_AS(synth_generate(spec, dir), Error);
  spec.n_subjects = 2;
  spec.motion_amplitude = 0.2;  // below the 0.5 px floor and not zero
  CHECK_THROWS_AS(synth_generate(spec, dir), Error);
}
