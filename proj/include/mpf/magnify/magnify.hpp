#pragma once

#include <map>

#include "mpf/preprocess/pipeline.hpp"

namespace mpf::magnify {

class MagnifierPort {
 public:
  virtual ~MagnifierPort() = default;
  virtual const char* name() const = 0;
  // Scales motion relative to frame 0 by (1+phi). phi = 0 must return the
  // input unchanged, bit-exact.
  virtual preprocess::FrameSequence magnify(const preprocess::FrameSequence& seq, int phi,
                                            const preprocess::FlowContext& ctx) const = 0;
};

// Estimates the motion field against frame 0 through the flow port, then
// forward-warps frame 0 by (1+phi) times that field with bilinear splatting;
// splat holes fall back to the original frame.
class FlowWarpMagnifier final : public MagnifierPort {
 public:
  explicit FlowWarpMagnifier(const preprocess::FlowPort& flow) : flow_(flow) {}
  const char* name() const override { return "flow_warp"; }
  preprocess::FrameSequence magnify(const preprocess::FrameSequence& seq, int phi,
                                    const preprocess::FlowContext& ctx) const override;

 private:
  const preprocess::FlowPort& flow_;
};

preprocess::FrameSequence magnify_sequence(const preprocess::FrameSequence& seq, int phi,
                                           const MagnifierPort& magnifier,
                                           const preprocess::FlowContext& ctx);

struct MagnificationPlan {
  std::map<std::string, int> per_class;          // class -> phi_max
  int cap = data::kMagnificationCap;
  std::map<std::string, int> predicted_counts;   // class -> raw * (phi_max + 1)
};

// raw originals plus one magnified copy per phi in 1..phi_max
int64_t amplified_count(int64_t raw, int phi_max);

// target = min_count * (cap + 1); phi_max = clamp(round(target/raw) - 1, 1, cap).
// The smallest class always lands exactly on the cap.
MagnificationPlan plan_balancing(const std::map<std::string, int>& raw_counts,
                                 int cap = data::kMagnificationCap);

// Emits "<clip_id>__mag<phi>" clips (the onset..apex span, motion-scaled)
// for phi in 1..phi_max[class] next to the originals, plus scaled
// ground-truth sidecars when the source clip has one. Input records are
// copied through untouched with their subject ids.
data::DatasetManifest build_balanced_dataset(const data::DatasetManifest& manifest,
                                             const MagnificationPlan& plan,
                                             const std::filesystem::path& out_dir,
                                             const MagnifierPort& magnifier);

}  // namespace mpf::magnify
