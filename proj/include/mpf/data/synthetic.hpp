#pragma once

#include <filesystem>

#include "mpf/core/tensor.hpp"
#include "mpf/data/manifest.hpp"

namespace mpf::data {

// Desk-scale stand-in corpus. Class identity lives purely in motion: a
// localized displacement between the onset and apex frame whose region and
// direction encode the class; appearance (per-subject texture) carries no
// class signal by construction.
struct SynthSpec {
  uint64_t seed = 1;
  int n_subjects = 4;
  int clips_per_class = 5;  // per subject
  int height = 64;
  int width = 64;
  double motion_amplitude = 1.0;  // px at the region center; 0 = static clips
  // Optional per-clip geometric variation. Direction jitter rotates the
  // class direction (magnitude preserved), region jitter offsets the region
  // center by up to this fraction of the frame size.
  double direction_jitter = 0.0;  // radians
  double region_jitter = 0.0;
  double texture_noise = 0.01;
  // Class-independent nuisance motion: extra bumps at random spots in the
  // mid-face band (disjoint from every class region), random directions.
  // Raises within-class variance without touching the class signal.
  double distractor_amplitude = 0.0;
  int distractor_count = 1;
};

struct RegionBox {
  int r0, r1, c0, c1;  // half-open
  int center_r, center_c;
};

// Canonical (unjittered) displaced regions for a class; the first entry is
// the one whose center carries exactly motion_amplitude.
std::vector<RegionBox> class_regions(const std::string& cls, int height, int width);

// Emits clips/<id>.frames.mef (3,2,H,W), gt/<id>.flow.gt.mef (2,H,W) and
// manifest.jsonl under out_dir. Byte-identical for identical (spec, out_dir
// contents absent) inputs.
DatasetManifest synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

// Ground-truth displacement sidecar for a frames file, by convention:
// .../clips/<id>.frames.mef -> .../gt/<id>.flow.gt.mef
std::filesystem::path gt_flow_path(const std::filesystem::path& frames_path);

}  // namespace mpf::data
