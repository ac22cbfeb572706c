#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "mpf/core/tensor.hpp"

namespace mpf::preprocess {

// Frame = (3,H,W) in [0,1]. Flow = (2,H,W), u then v, pixels.

class InterpolatorPort {
 public:
  virtual ~InterpolatorPort() = default;
  virtual const char* name() const = 0;
  // alpha in (0,1): position of the intermediate frame between onset (0)
  // and apex (1). Must be reentrant.
  virtual TensorF at(const TensorF& onset, const TensorF& apex, double alpha) const = 0;
};

class LinearInterpolator final : public InterpolatorPort {
 public:
  const char* name() const override { return "linear"; }
  TensorF at(const TensorF& onset, const TensorF& apex, double alpha) const override;
};

// Everything a port may need to identify the pair inside a clip. Pixel-only
// estimators ignore it.
struct FlowContext {
  std::string clip_id;
  std::filesystem::path gt_path;          // ground-truth sidecar, if any
  std::filesystem::path precomputed_dir;  // external flow files, if any
  int from = 0;
  int to = 1;
  int n_frames = 2;
};

class FlowPort {
 public:
  virtual ~FlowPort() = default;
  virtual const char* name() const = 0;
  virtual TensorF compute(const TensorF& frame_a, const TensorF& frame_b,
                          const FlowContext& ctx) const = 0;
};

// Reads the stored onset->apex displacement and rescales it to the requested
// frame span, assuming uniform motion in time. Exact on synthetic clips.
class OracleFlow final : public FlowPort {
 public:
  const char* name() const override { return "oracle"; }
  TensorF compute(const TensorF&, const TensorF&, const FlowContext& ctx) const override;
};

struct FarnebackParams {
  double pyr_scale = 0.5;
  int levels = 3;
  int winsize = 13;
  int iterations = 3;
  int poly_n = 5;
  double poly_sigma = 1.1;
};

// Coarse-to-fine polynomial-expansion flow on luminance.
class FarnebackFlow final : public FlowPort {
 public:
  explicit FarnebackFlow(FarnebackParams p = {}) : params_(p) {}
  const char* name() const override { return "farneback"; }
  TensorF compute(const TensorF& a, const TensorF& b, const FlowContext&) const override;

 private:
  FarnebackParams params_;
};

// Reads one externally computed (2, L-1, H, W) tensor per clip, named
// "<clip_id>.flow.mef"; non-adjacent spans sum the per-pair fields.
class PrecomputedFlow final : public FlowPort {
 public:
  const char* name() const override { return "precomputed"; }
  TensorF compute(const TensorF&, const TensorF&, const FlowContext& ctx) const override;
};

std::unique_ptr<FlowPort> make_flow_port(const std::string& name);

// Raw Farneback entry point, exposed for tests and tuning.
TensorF farneback_flow(const TensorF& lum_a, const TensorF& lum_b, const FarnebackParams& p);

}  // namespace mpf::preprocess
