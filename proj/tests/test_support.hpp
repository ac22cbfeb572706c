#pragma once

#include <filesystem>
#include <string>

#include "mpf/data/synthetic.hpp"

namespace mpf::testsup {

// Fresh scratch directory under the system temp root.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("mpf_test_" + tag);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

// Sub-pixel displacement of a pixel block between two frames, independent of
// the flow code: integer-shift SSD search on luminance plus parabolic
// refinement. Search is over [-range, range] in both axes. The caller picks
// a block that moves rigidly (for warped content, keep clear of the trailing
// ramp where forward-warp fold-over lands).
std::pair<double, double> measure_block_shift(const TensorF& frame_a, const TensorF& frame_b,
                                              int r0, int r1, int c0, int c1, int range);

// Convenience: central block of a synthetic class region, eroded by a
// quarter on leading/side edges and by `trailing_erode` extra pixels on all
// sides of the motion axis.
std::pair<double, double> measure_region_shift(const TensorF& frame_a, const TensorF& frame_b,
                                               const data::RegionBox& box, int range,
                                               int trailing_erode = 0);

}  // namespace mpf::testsup
