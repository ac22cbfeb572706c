#pragma once

#include "mpf/data/manifest.hpp"
#include "mpf/preprocess/ports.hpp"

namespace mpf::preprocess {

struct FrameSequence {
  TensorF frames;  // (3, L, H, W), values in [0,1]
  int length() const { return static_cast<int>(frames.dim(1)); }
  TensorF frame(int t) const;
  void set_frame(int t, const TensorF& f);
};

struct FusedFeature {
  TensorF tensor;  // (5, L-1, H, W): [u, v, dR, dG, dB]
  std::string clip_id;
};

struct PreprocessConfig {
  int sequence_length = 11;  // L
  std::string interpolator = "linear";
  std::string flow = "farneback";
  FarnebackParams farneback;
  std::filesystem::path precomputed_dir;
};

// Frame 0 and L-1 are the inputs themselves, bit-exact; intermediates come
// from the port at alpha = t/(L-1).
FrameSequence interpolate_sequence(const TensorF& onset, const TensorF& apex, int length,
                                   const InterpolatorPort& interp);

TensorF optical_flow(const TensorF& frame_a, const TensorF& frame_b, const FlowPort& port,
                     const FlowContext& ctx);

TensorF frame_difference(const TensorF& frame_a, const TensorF& frame_b);  // (3,H,W), |b-a|

// flows (2,L-1,H,W) + diffs (3,L-1,H,W) -> (5,L-1,H,W), channel order fixed.
TensorF fuse_features(const TensorF& flows, const TensorF& diffs);

FrameSequence load_frame_sequence(const data::ClipRecord& record);

FusedFeature preprocess_clip(const data::ClipRecord& record, const PreprocessConfig& cfg,
                             const InterpolatorPort& interp, const FlowPort& flow);

// Convenience wrapper constructing ports from the config.
FusedFeature preprocess_clip(const data::ClipRecord& record, const PreprocessConfig& cfg);

}  // namespace mpf::preprocess
