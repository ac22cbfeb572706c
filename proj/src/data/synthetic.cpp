#include "mpf/data/synthetic.hpp"

#include <cmath>

#include "mpf/core/rng.hpp"
#include "mpf/core/tensor_io.hpp"
#include "mpf/imaging/image_ops.hpp"

namespace mpf::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct ClassMotion {
  std::vector<RegionBox> regions;
  std::vector<std::pair<double, double>> dirs;  // unit (u,v) per region
};

RegionBox make_box(double r0f, double r1f, double c0f, double c1f, int H, int W) {
  RegionBox b;
  b.r0 = static_cast<int>(std::lround(r0f * H));
  b.r1 = static_cast<int>(std::lround(r1f * H));
  b.c0 = static_cast<int>(std::lround(c0f * W));
  b.c1 = static_cast<int>(std::lround(c1f * W));
  b.center_r = (b.r0 + b.r1) / 2;
  b.center_c = (b.c0 + b.c1) / 2;
  return b;
}

ClassMotion class_motion(const std::string& cls, int H, int W) {
  ClassMotion m;
  if (cls == "negative") {  // brow region pushed down
    m.regions = {make_box(0.15, 0.38, 0.28, 0.72, H, W)};
    m.dirs = {{0.0, 1.0}};
  } else if (cls == "surprise") {  // brow region pulled up
    m.regions = {make_box(0.15, 0.38, 0.28, 0.72, H, W)};
    m.dirs = {{0.0, -1.0}};
  } else if (cls == "positive") {  // mouth corners pulled outward
    m.regions = {make_box(0.58, 0.82, 0.62, 0.88, H, W),
                 make_box(0.58, 0.82, 0.12, 0.38, H, W)};
    m.dirs = {{1.0, 0.0}, {-1.0, 0.0}};
  } else {
    fail("synth: unknown class " + cls);
  }
  return m;
}

// 1 on the eroded interior, cosine falloff over the margin band, 0 outside.
double ramp1d(int i, int lo, int hi, int margin) {
  if (i < lo || i >= hi) return 0.0;
  const double dlo = i - lo + 0.5;
  const double dhi = hi - i - 0.5;
  const double d = std::min(dlo, dhi);
  if (d >= margin) return 1.0;
  return 0.5 * (1.0 - std::cos(kPi * d / margin));
}

TensorF displacement_field(const ClassMotion& m, double amp, int H, int W) {
  TensorF field({2, static_cast<uint32_t>(H), static_cast<uint32_t>(W)}, {"uv", "h", "w"});
  float* u = field.data();
  float* v = u + static_cast<size_t>(H) * W;
  for (size_t k = 0; k < m.regions.size(); ++k) {
    const RegionBox& b = m.regions[k];
    const int mr = std::max(2, (b.r1 - b.r0) / 5);
    const int mc = std::max(2, (b.c1 - b.c0) / 5);
    for (int r = b.r0; r < b.r1 && r < H; ++r) {
      if (r < 0) continue;
      for (int c = b.c0; c < b.c1 && c < W; ++c) {
        if (c < 0) continue;
        const double w = ramp1d(r, b.r0, b.r1, mr) * ramp1d(c, b.c0, b.c1, mc);
        const size_t p = static_cast<size_t>(r) * W + c;
        u[p] += static_cast<float>(amp * w * m.dirs[k].first);
        v[p] += static_cast<float>(amp * w * m.dirs[k].second);
      }
    }
  }
  return field;
}

void add_cosines(std::vector<double>& img, int H, int W, Rng& rng, int count, double amp_lo,
                 double amp_hi, double freq_hi) {
  for (int k = 0; k < count; ++k) {
    const double a = rng.uniform(amp_lo, amp_hi);
    const double fx = rng.uniform(0.5, freq_hi);
    const double fy = rng.uniform(0.5, freq_hi);
    const double ph = rng.uniform(0.0, 2.0 * kPi);
    const double sx = rng.uniform() < 0.5 ? -1.0 : 1.0;
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c)
        img[static_cast<size_t>(r) * W + c] +=
            a * std::cos(2.0 * kPi * (sx * fx * c / W + fy * r / H) + ph);
  }
}

TensorF render_frame(const std::vector<double>& base, const double gain[3], const double off[3],
                     int H, int W) {
  TensorF f({3, static_cast<uint32_t>(H), static_cast<uint32_t>(W)}, {"rgb", "h", "w"});
  const size_t plane = static_cast<size_t>(H) * W;
  for (int c = 0; c < 3; ++c)
    for (size_t p = 0; p < plane; ++p) {
      double v = 0.5 + gain[c] * (base[p] - 0.5) + off[c];
      f[c * plane + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return f;
}

}  // namespace

std::vector<RegionBox> class_regions(const std::string& cls, int height, int width) {
  return class_motion(cls, height, width).regions;
}

std::filesystem::path gt_flow_path(const std::filesystem::path& frames_path) {
  std::string stem = frames_path.filename().string();
  const std::string suffix = ".frames.mef";
  if (stem.size() > suffix.size() && stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0)
    stem = stem.substr(0, stem.size() - suffix.size());
  return frames_path.parent_path().parent_path() / "gt" / (stem + ".flow.gt.mef");
}

DatasetManifest synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  check(spec.n_subjects >= 2, "synth: n_subjects must be >= 2");
  check(spec.clips_per_class >= 1, "synth: clips_per_class must be >= 1");
  check(spec.height >= 32 && spec.width >= 32, "synth: frame_size must be >= 32x32");
  check(spec.motion_amplitude == 0.0 || spec.motion_amplitude >= 0.5,
        "synth: motion_amplitude must be 0 (static) or >= 0.5 px");

  const int H = spec.height, W = spec.width;
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "clips", ec);
  std::filesystem::create_directories(out_dir / "gt", ec);
  check(std::filesystem::is_directory(out_dir / "clips") &&
            std::filesystem::is_directory(out_dir / "gt"),
        "synth: cannot create output directories under " + out_dir.string());

  DatasetManifest m;
  m.label_space = LabelSpace::cde3();
  m.frame_h = H;
  m.frame_w = W;
  m.preprocessed = true;

  const size_t plane = static_cast<size_t>(H) * W;
  for (int s = 0; s < spec.n_subjects; ++s) {
    Rng srng(mix_seed(spec.seed, 0xface, static_cast<uint64_t>(s)));
    std::vector<double> subject_tex(plane, 0.0);
    add_cosines(subject_tex, H, W, srng, 7, 0.35, 1.0, 5.0);
    double lo = subject_tex[0], hi = subject_tex[0];
    for (double v : subject_tex) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = std::max(hi - lo, 1e-9);
    for (double& v : subject_tex) v = 0.25 + 0.5 * (v - lo) / span;
    double gain[3], off[3];
    for (int c = 0; c < 3; ++c) {
      gain[c] = srng.uniform(0.8, 1.2);
      off[c] = srng.uniform(-0.05, 0.05);
    }

    for (size_t ci = 0; ci < m.label_space.classes.size(); ++ci) {
      const std::string& cls = m.label_space.classes[ci];
      for (int k = 0; k < spec.clips_per_class; ++k) {
        Rng crng(mix_seed(spec.seed, static_cast<uint64_t>(s), ci + 1, static_cast<uint64_t>(k)));
        std::vector<double> tex = subject_tex;
        add_cosines(tex, H, W, crng, 2, 0.02, 0.05, 8.0);
        for (size_t p = 0; p < plane; ++p)
          tex[p] = std::clamp(tex[p] + spec.texture_noise * crng.normal(), 0.02, 0.98);

        ClassMotion motion = class_motion(cls, H, W);
        if (spec.direction_jitter > 0.0) {
          const double a = crng.uniform(-spec.direction_jitter, spec.direction_jitter);
          const double ca = std::cos(a), sa = std::sin(a);
          for (auto& d : motion.dirs)
            d = {d.first * ca - d.second * sa, d.first * sa + d.second * ca};
        }
        if (spec.region_jitter > 0.0) {
          const int dr = static_cast<int>(std::lround(crng.uniform(-1.0, 1.0) * spec.region_jitter * H));
          const int dc = static_cast<int>(std::lround(crng.uniform(-1.0, 1.0) * spec.region_jitter * W));
          for (auto& b : motion.regions) {
            b.r0 += dr; b.r1 += dr; b.center_r += dr;
            b.c0 += dc; b.c1 += dc; b.center_c += dc;
          }
        }

        if (spec.distractor_amplitude > 0.0) {
          // mid-face band: rows [0.42, 0.56), clear of the brow and mouth boxes
          const int dh = std::max(4, H / 8);
          const int dw = std::max(4, W / 8);
          const int r0 = static_cast<int>(std::lround(0.42 * H));
          const double gain =
              spec.distractor_amplitude / std::max(spec.motion_amplitude, 1e-9);
          for (int d = 0; d < spec.distractor_count; ++d) {
            const int c0 = crng.uniform_int(2, W - dw - 2);
            RegionBox db{r0, r0 + dh, c0, c0 + dw, r0 + dh / 2, c0 + dw / 2};
            const double a = crng.uniform(0.0, 2.0 * kPi);
            motion.regions.push_back(db);
            motion.dirs.push_back({std::cos(a) * gain, std::sin(a) * gain});
          }
        }

        TensorF field = displacement_field(motion, spec.motion_amplitude, H, W);
        TensorF onset = render_frame(tex, gain, off, H, W);
        TensorF apex = spec.motion_amplitude == 0.0
                           ? onset
                           : imaging::forward_warp(onset, field, 1.0f, onset);

        char idbuf[64];
        std::snprintf(idbuf, sizeof(idbuf), "s%02d_%s_%02d", s, cls.c_str(), k);
        const std::string clip_id = idbuf;

        TensorF frames({3, 2, static_cast<uint32_t>(H), static_cast<uint32_t>(W)},
                       {"rgb", "t", "h", "w"});
        for (size_t p = 0; p < 3 * plane; ++p) {
          const size_t c = p / plane, q = p % plane;
          frames[(c * 2 + 0) * plane + q] = onset[p];
          frames[(c * 2 + 1) * plane + q] = apex[p];
        }
        const auto frames_path = out_dir / "clips" / (clip_id + ".frames.mef");
        write_tensor(frames, frames_path);
        write_tensor(field, out_dir / "gt" / (clip_id + ".flow.gt.mef"));

        ClipRecord r;
        r.clip_id = clip_id;
        char sbuf[32];
        std::snprintf(sbuf, sizeof(sbuf), "subj%02d", s);
        r.subject_id = sbuf;
        r.label = cls;
        r.frames_path = frames_path;
        r.onset_index = 0;
        r.apex_index = 1;
        r.source_dataset = "synthetic";
        r.magnification_factor = 0;
        m.records.push_back(std::move(r));
      }
    }
  }

  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

}  // namespace mpf::data
