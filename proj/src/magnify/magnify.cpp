#include "mpf/magnify/magnify.hpp"

#include <cmath>

#include "mpf/core/tensor_io.hpp"
#include "mpf/data/synthetic.hpp"
#include "mpf/imaging/image_ops.hpp"

namespace mpf::magnify {

using preprocess::FlowContext;
using preprocess::FrameSequence;

FrameSequence FlowWarpMagnifier::magnify(const FrameSequence& seq, int phi,
                                         const FlowContext& ctx) const {
  const int L = seq.length();
  FrameSequence out;
  out.frames = TensorF(seq.frames.dims(), seq.frames.axes());
  const TensorF ref = seq.frame(0);
  out.set_frame(0, ref);
  FlowContext c = ctx;
  c.n_frames = L;
  for (int t = 1; t < L; ++t) {
    c.from = 0;
    c.to = t;
    const TensorF frame_t = seq.frame(t);
    const TensorF delta = flow_.compute(ref, frame_t, c);
    out.set_frame(t, imaging::forward_warp(ref, delta, static_cast<float>(1 + phi), ref));
  }
  return out;
}

FrameSequence magnify_sequence(const FrameSequence& seq, int phi, const MagnifierPort& magnifier,
                               const FlowContext& ctx) {
  check(phi >= 0, "magnify_sequence: phi must be >= 0");
  check(seq.length() >= 2, "magnify_sequence: need at least 2 frames");
  if (phi == 0) return seq;  // Eq. reduces to the identity; keep it bit-exact
  return magnifier.magnify(seq, phi, ctx);
}

int64_t amplified_count(int64_t raw, int phi_max) {
  check(raw >= 1, "amplified_count: raw must be >= 1");
  check(phi_max >= 1, "amplified_count: phi_max must be >= 1");
  return raw * (phi_max + 1);
}

MagnificationPlan plan_balancing(const std::map<std::string, int>& raw_counts, int cap) {
  check(!raw_counts.empty(), "plan_balancing: empty class map");
  check(cap >= 1 && cap <= data::kMagnificationCap,
        "plan_balancing: cap must be in [1,14]");
  int min_count = 0;
  bool first = true;
  for (const auto& [cls, n] : raw_counts) {
    check(n >= 1, "plan_balancing: class '" + cls + "' has no samples");
    if (first || n < min_count) min_count = n;
    first = false;
  }
  MagnificationPlan plan;
  plan.cap = cap;
  const int64_t target = static_cast<int64_t>(min_count) * (cap + 1);
  for (const auto& [cls, n] : raw_counts) {
    const long rounded = std::lround(static_cast<double>(target) / n);
    const int phi = static_cast<int>(std::clamp<long>(rounded - 1, 1, cap));
    plan.per_class[cls] = phi;
    plan.predicted_counts[cls] = static_cast<int>(amplified_count(n, phi));
  }
  return plan;
}

data::DatasetManifest build_balanced_dataset(const data::DatasetManifest& manifest,
                                             const MagnificationPlan& plan,
                                             const std::filesystem::path& out_dir,
                                             const MagnifierPort& magnifier) {
  const auto counts = manifest.class_counts();
  for (const auto& [cls, phi] : plan.per_class)
    check(counts.count(cls) > 0,
          "build_balanced_dataset: plan class '" + cls + "' not present in manifest");

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "clips", ec);
  std::filesystem::create_directories(out_dir / "gt", ec);
  check(std::filesystem::is_directory(out_dir / "clips"),
        "build_balanced_dataset: cannot create " + (out_dir / "clips").string());

  data::DatasetManifest out = manifest;
  out.records.clear();
  for (const auto& r : manifest.records) {
    out.records.push_back(r);  // original, phi = 0
    const std::string cls = manifest.label_space.mapped(r.label);
    auto it = plan.per_class.find(cls);
    if (it == plan.per_class.end()) continue;
    const int phi_max = it->second;

    FrameSequence raw = preprocess::load_frame_sequence(r);
    check(r.onset_index >= 0 && r.apex_index < raw.length(),
          "build_balanced_dataset: bad onset/apex for clip " + r.clip_id);
    // magnification operates on the onset..apex span
    const int span = r.apex_index - r.onset_index + 1;
    FrameSequence sub;
    sub.frames = TensorF({3, static_cast<uint32_t>(span), raw.frames.dim(2), raw.frames.dim(3)},
                         {"rgb", "t", "h", "w"});
    for (int t = 0; t < span; ++t) sub.set_frame(t, raw.frame(r.onset_index + t));

    FlowContext ctx;
    ctx.clip_id = r.clip_id;
    ctx.gt_path = data::gt_flow_path(r.frames_path);
    ctx.n_frames = span;
    const bool has_gt = std::filesystem::exists(ctx.gt_path);

    for (int phi = 1; phi <= phi_max; ++phi) {
      FrameSequence mag = magnify_sequence(sub, phi, magnifier, ctx);
      data::ClipRecord copy = r;
      copy.clip_id = r.clip_id + "__mag" + std::to_string(phi);
      copy.frames_path = out_dir / "clips" / (copy.clip_id + ".frames.mef");
      copy.onset_index = 0;
      copy.apex_index = span - 1;
      copy.magnification_factor = phi;
      write_tensor(mag.frames, copy.frames_path);
      if (has_gt) {
        TensorF gt = read_tensor(ctx.gt_path);
        const float s = static_cast<float>(1 + phi);
        for (size_t i = 0; i < gt.size(); ++i) gt[i] *= s;
        write_tensor(gt, data::gt_flow_path(copy.frames_path));
      }
      out.records.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace mpf::magnify
