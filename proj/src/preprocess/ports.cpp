#include "mpf/preprocess/ports.hpp"

#include "mpf/core/tensor_io.hpp"
#include "mpf/imaging/image_ops.hpp"

namespace mpf::preprocess {

TensorF LinearInterpolator::at(const TensorF& onset, const TensorF& apex, double alpha) const {
  check(onset.same_shape(apex), "interpolator: onset/apex shape mismatch");
  TensorF out(onset.dims(), onset.axes());
  const float a = static_cast<float>(alpha);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = onset[i] + a * (apex[i] - onset[i]);
  return out;
}

TensorF OracleFlow::compute(const TensorF& frame_a, const TensorF&, const FlowContext& ctx) const {
  check(!ctx.gt_path.empty(), "oracle flow: no ground-truth path in context");
  TensorF gt = read_tensor(ctx.gt_path);
  check(gt.rank() == 3 && gt.dim(0) == 2, "oracle flow: sidecar must be (2,H,W)");
  check(gt.dim(1) == frame_a.dim(1) && gt.dim(2) == frame_a.dim(2),
        "oracle flow: sidecar size mismatch for clip " + ctx.clip_id);
  check(ctx.n_frames >= 2 && ctx.from >= 0 && ctx.to > ctx.from && ctx.to < ctx.n_frames,
        "oracle flow: bad frame span");
  const float scale =
      static_cast<float>(ctx.to - ctx.from) / static_cast<float>(ctx.n_frames - 1);
  if (scale != 1.0f)
    for (size_t i = 0; i < gt.size(); ++i) gt[i] *= scale;
  return gt;
}

TensorF FarnebackFlow::compute(const TensorF& a, const TensorF& b, const FlowContext&) const {
  check(a.same_shape(b), "flow: frame shape mismatch");
  return farneback_flow(imaging::luminance(a), imaging::luminance(b), params_);
}

TensorF PrecomputedFlow::compute(const TensorF& frame_a, const TensorF&,
                                 const FlowContext& ctx) const {
  check(!ctx.precomputed_dir.empty(), "precomputed flow: no directory in context");
  const auto path = ctx.precomputed_dir / (ctx.clip_id + ".flow.mef");
  TensorF all = read_tensor(path);
  check(all.rank() == 4 && all.dim(0) == 2, "precomputed flow: expected (2,L-1,H,W) in " +
                                                path.string());
  check(static_cast<int>(all.dim(1)) == ctx.n_frames - 1,
        "precomputed flow: pair count mismatch for clip " + ctx.clip_id);
  const uint32_t H = all.dim(2), W = all.dim(3);
  check(H == frame_a.dim(1) && W == frame_a.dim(2),
        "precomputed flow: size mismatch for clip " + ctx.clip_id);
  check(ctx.from >= 0 && ctx.to > ctx.from && ctx.to < ctx.n_frames,
        "precomputed flow: bad frame span");
  TensorF out({2, H, W}, {"uv", "h", "w"});
  const size_t plane = static_cast<size_t>(H) * W;
  const size_t pairs = all.dim(1);
  for (int t = ctx.from; t < ctx.to; ++t)
    for (int c = 0; c < 2; ++c)
      for (size_t p = 0; p < plane; ++p)
        out[c * plane + p] += all[(c * pairs + t) * plane + p];
  return out;
}

std::unique_ptr<FlowPort> make_flow_port(const std::string& name) {
  if (name == "oracle") return std::make_unique<OracleFlow>();
  if (name == "farneback") return std::make_unique<FarnebackFlow>();
  if (name == "precomputed") return std::make_unique<PrecomputedFlow>();
  fail("unknown flow port: " + name);
}

}  // namespace mpf::preprocess
