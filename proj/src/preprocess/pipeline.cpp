#include "mpf/preprocess/pipeline.hpp"

#include <cmath>
#include <cstring>

#include "mpf/core/tensor_io.hpp"
#include "mpf/data/synthetic.hpp"

namespace mpf::preprocess {

TensorF FrameSequence::frame(int t) const {
  const uint32_t L = frames.dim(1), H = frames.dim(2), W = frames.dim(3);
  check(t >= 0 && t < static_cast<int>(L), "frame index out of range");
  TensorF f({3, H, W}, {"rgb", "h", "w"});
  const size_t plane = static_cast<size_t>(H) * W;
  for (int c = 0; c < 3; ++c)
    std::memcpy(f.data() + c * plane, frames.data() + (c * L + t) * plane,
                plane * sizeof(float));
  return f;
}

void FrameSequence::set_frame(int t, const TensorF& f) {
  const uint32_t L = frames.dim(1), H = frames.dim(2), W = frames.dim(3);
  check(f.rank() == 3 && f.dim(0) == 3 && f.dim(1) == H && f.dim(2) == W,
        "set_frame: shape mismatch");
  const size_t plane = static_cast<size_t>(H) * W;
  for (int c = 0; c < 3; ++c)
    std::memcpy(frames.data() + (c * L + t) * plane, f.data() + c * plane,
                plane * sizeof(float));
}

FrameSequence interpolate_sequence(const TensorF& onset, const TensorF& apex, int length,
                                   const InterpolatorPort& interp) {
  check(onset.rank() == 3 && onset.dim(0) == 3, "interpolate: onset must be (3,H,W)");
  check(onset.same_shape(apex), "interpolate: onset/apex shape mismatch");
  check(length >= 2, "interpolate: sequence length must be >= 2");
  const uint32_t H = onset.dim(1), W = onset.dim(2);
  FrameSequence seq;
  seq.frames = TensorF({3, static_cast<uint32_t>(length), H, W}, {"rgb", "t", "h", "w"});
  seq.set_frame(0, onset);
  seq.set_frame(length - 1, apex);
  for (int t = 1; t < length - 1; ++t)
    seq.set_frame(t, interp.at(onset, apex, static_cast<double>(t) / (length - 1)));
  return seq;
}

TensorF optical_flow(const TensorF& frame_a, const TensorF& frame_b, const FlowPort& port,
                     const FlowContext& ctx) {
  check(frame_a.same_shape(frame_b), "optical_flow: frame shape mismatch");
  TensorF flow = port.compute(frame_a, frame_b, ctx);
  check(flow.rank() == 3 && flow.dim(0) == 2 && flow.dim(1) == frame_a.dim(1) &&
            flow.dim(2) == frame_a.dim(2),
        "optical_flow: port returned wrong shape");
  for (size_t i = 0; i < flow.size(); ++i)
    check(std::isfinite(flow[i]), "optical_flow: non-finite value from port");
  return flow;
}

TensorF frame_difference(const TensorF& frame_a, const TensorF& frame_b) {
  check(frame_a.rank() == 3 && frame_a.dim(0) == 3, "frame_difference: expected (3,H,W)");
  check(frame_a.same_shape(frame_b), "frame_difference: shape mismatch");
  TensorF d(frame_a.dims(), frame_a.axes());
  for (size_t i = 0; i < d.size(); ++i) d[i] = std::fabs(frame_b[i] - frame_a[i]);
  return d;
}

TensorF fuse_features(const TensorF& flows, const TensorF& diffs) {
  check(flows.rank() == 4 && flows.dim(0) == 2, "fuse: flows must be (2,L-1,H,W)");
  check(diffs.rank() == 4 && diffs.dim(0) == 3, "fuse: diffs must be (3,L-1,H,W)");
  check(flows.dim(1) == diffs.dim(1) && flows.dim(2) == diffs.dim(2) &&
            flows.dim(3) == diffs.dim(3),
        "fuse: time/spatial dims mismatch");
  const uint32_t Tm1 = flows.dim(1), H = flows.dim(2), W = flows.dim(3);
  TensorF out({5, Tm1, H, W}, {"c", "t", "h", "w"});
  const size_t block = static_cast<size_t>(Tm1) * H * W;
  std::memcpy(out.data(), flows.data(), 2 * block * sizeof(float));
  std::memcpy(out.data() + 2 * block, diffs.data(), 3 * block * sizeof(float));
  return out;
}

FrameSequence load_frame_sequence(const data::ClipRecord& record) {
  TensorF frames = read_tensor(record.frames_path);
  check(frames.rank() == 4 && frames.dim(0) == 3,
        "clip '" + record.clip_id + "': frames file must be (3,L,H,W)");
  FrameSequence seq;
  seq.frames = std::move(frames);
  return seq;
}

FusedFeature preprocess_clip(const data::ClipRecord& record, const PreprocessConfig& cfg,
                             const InterpolatorPort& interp, const FlowPort& flow) {
  FrameSequence raw = load_frame_sequence(record);
  const int L = cfg.sequence_length;
  check(record.onset_index >= 0 && record.apex_index < raw.length() &&
            record.onset_index < record.apex_index,
        "clip '" + record.clip_id + "': onset/apex indices out of range");
  const TensorF onset = raw.frame(record.onset_index);
  const TensorF apex = raw.frame(record.apex_index);
  FrameSequence seq = interpolate_sequence(onset, apex, L, interp);

  FlowContext ctx;
  ctx.clip_id = record.clip_id;
  ctx.gt_path = data::gt_flow_path(record.frames_path);
  ctx.precomputed_dir = cfg.precomputed_dir;
  ctx.n_frames = L;

  const uint32_t H = onset.dim(1), W = onset.dim(2);
  const uint32_t Tm1 = static_cast<uint32_t>(L - 1);
  TensorF flows({2, Tm1, H, W}, {"uv", "t", "h", "w"});
  TensorF diffs({3, Tm1, H, W}, {"rgb", "t", "h", "w"});
  const size_t plane = static_cast<size_t>(H) * W;
  for (int t = 0; t + 1 < L; ++t) {
    ctx.from = t;
    ctx.to = t + 1;
    const TensorF fa = seq.frame(t);
    const TensorF fb = seq.frame(t + 1);
    const TensorF fl = optical_flow(fa, fb, flow, ctx);
    const TensorF df = frame_difference(fa, fb);
    for (int c = 0; c < 2; ++c)
      std::memcpy(flows.data() + (c * Tm1 + t) * plane, fl.data() + c * plane,
                  plane * sizeof(float));
    for (int c = 0; c < 3; ++c)
      std::memcpy(diffs.data() + (c * Tm1 + t) * plane, df.data() + c * plane,
                  plane * sizeof(float));
  }

  FusedFeature f;
  f.tensor = fuse_features(flows, diffs);
  f.clip_id = record.clip_id;
  return f;
}

FusedFeature preprocess_clip(const data::ClipRecord& record, const PreprocessConfig& cfg) {
  LinearInterpolator linear;
  check(cfg.interpolator == "linear", "unknown interpolator port: " + cfg.interpolator);
  auto port = make_flow_port(cfg.flow);
  if (cfg.flow == "farneback")
    return preprocess_clip(record, cfg, linear, FarnebackFlow(cfg.farneback));
  return preprocess_clip(record, cfg, linear, *port);
}

}  // namespace mpf::preprocess
