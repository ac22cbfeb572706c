#include <cmath>
#include <fstream>

#include "doctest.h"
#include "mpf/data/synthetic.hpp"
#include "mpf/meta/protonet.hpp"
#include "mpf/pretrain/trainer.hpp"
#include "test_support.hpp"

using namespace mpf;
using namespace mpf::pretrain;

namespace {

backbone::BackboneConfig test_arch(int hw, uint64_t seed) {
  backbone::BackboneConfig c;
  c.in_channels = 5;
  c.stem_channels = 6;
  c.inception_a = {3, 4, 6, 2, 3, 3};  // 15 out
  c.inception_b = {4, 4, 6, 2, 3, 3};  // 16 out
  c.embedding_dim = 32;
  c.input_t = 10;
  c.input_h = hw;
  c.input_w = hw;
  c.seed = seed;
  return c;
}

struct Pool {
  data::DatasetManifest manifest;
  std::unique_ptr<data::FeatureStore> store;
  data::FeatureSet fs;
};

Pool make_pool(const std::string& tag, int subjects, int clips_per_class, uint64_t seed) {
  Pool p;
  data::SynthSpec spec;
  spec.seed = seed;
  spec.n_subjects = subjects;
  spec.clips_per_class = clips_per_class;
  spec.height = 32;
  spec.width = 32;
  spec.motion_amplitude = 1.5;
  auto dir = testsup::scratch_dir(tag);
  p.manifest = data::synth_generate(spec, dir);
  preprocess::PreprocessConfig cfg;
  cfg.flow = "oracle";
  p.store = std::make_unique<data::FeatureStore>(dir / "features", cfg);
  std::vector<size_t> idx(p.manifest.records.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  p.fs = data::build_feature_set(p.manifest, idx, *p.store);
  return p;
}

}  // namespace

TEST_CASE("euclidean distance basics") {
  TensorF a({2}), b({2});
  CHECK(euclidean_distance(a, a) == 0.0f);
  b[0] = 3;
  b[1] = 4;
  CHECK(euclidean_distance(a, b) == doctest::Approx(5.0));

  // triangle inequality on random triples
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    TensorF x({4}), y({4}), z({4});
    for (int i = 0; i < 4; ++i) {
      x[i] = static_cast<float>(rng.normal());
      y[i] = static_cast<float>(rng.normal());
      z[i] = static_cast<float>(rng.normal());
    }
    CHECK(euclidean_distance(x, z) <=
          euclidean_distance(x, y) + euclidean_distance(y, z) + 1e-5f);
  }
  TensorF c({3});
  CHECK_THROWS_AS(euclidean_distance(a, c), Error);
}

TEST_CASE("triplet loss hand cases") {
  TensorF a({2}), p({2}), n({2});
  // all coincide -> margin
  CHECK(triplet_loss(a, p, n, 0.2f) == doctest::Approx(0.2));
  // d(a,p)=0, d(a,n)=1 -> max(0-1+0.2, 0) = 0
  n[0] = 1;
  CHECK(triplet_loss(a, p, n, 0.2f) == doctest::Approx(0.0));
  // d(a,p)=1, d(a,n)=1 -> 0.2
  p[1] = 1;
  n[0] = 0;
  n[1] = 1;
  p[1] = 0;
  p[0] = 1;
  CHECK(triplet_loss(a, p, n, 0.2f) == doctest::Approx(0.2));
  CHECK(triplet_loss(a, p, n, 0.2f) >= 0.0f);
}

TEST_CASE("triplet loss is always nonnegative and zero when well separated") {
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    TensorF a({3}), p({3}), n({3});
    for (int i = 0; i < 3; ++i) {
      a[i] = static_cast<float>(rng.normal());
      p[i] = static_cast<float>(rng.normal());
      n[i] = static_cast<float>(rng.normal());
    }
    const float l = triplet_loss(a, p, n, 0.2f);
    CHECK(l >= 0.0f);
    const float dap = euclidean_distance(a, p), dan = euclidean_distance(a, n);
    if (dan * dan >= dap * dap + 0.2f) CHECK(l == 0.0f);
  }
}

TEST_CASE("triplet gradient matches finite differences away from the hinge") {
  Rng rng(13);
  const double margin = 0.2;
  int active_checked = 0;
  for (int t = 0; t < 50; ++t) {
    Tensor<double> a({3}), p({3}), n({3});
    for (int i = 0; i < 3; ++i) {
      a[i] = rng.normal();
      p[i] = rng.normal();
      n[i] = rng.normal();
    }
    const double l = triplet_loss(a, p, n, margin);
    if (l < 1e-3) continue;  // inactive or near the kink
    ++active_checked;
    Tensor<double> ga({3}), gp({3}), gn({3});
    triplet_loss_backward(a, p, n, margin, 1.0, ga, gp, gn);
    auto fd_check = [&](Tensor<double>& v, const Tensor<double>& g) {
      for (int i = 0; i < 3; ++i) {
        const double eps = 1e-6;
        const double keep = v[i];
        v[i] = keep + eps;
        const double lp = triplet_loss(a, p, n, margin);
        v[i] = keep - eps;
        const double lm = triplet_loss(a, p, n, margin);
        v[i] = keep;
        const double fd = (lp - lm) / (2 * eps);
        CHECK(std::fabs(fd - g[i]) / std::max({std::fabs(fd), std::fabs(g[i]), 1.0}) < 1e-4);
      }
    };
    fd_check(a, ga);
    fd_check(p, gp);
    fd_check(n, gn);
  }
  CHECK(active_checked >= 10);
}

TEST_CASE("inactive hinge leaves gradients at zero and sgd does not move") {
  TensorF a({2}), p({2}), n({2});
  n[0] = 5.0f;  // far negative, identical positive: loss 0
  TensorF ga({2}), gp({2}), gn({2});
  CHECK(triplet_loss_backward(a, p, n, 0.2f, 1.0f, ga, gp, gn) == 0.0f);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(ga[i] == 0.0f);
    CHECK(gp[i] == 0.0f);
    CHECK(gn[i] == 0.0f);
  }

  backbone::ParamSet<float> ps;
  auto& w = ps.add("layer.weight", {4});
  for (int i = 0; i < 4; ++i) w[i] = 1.0f + i;
  auto zero = backbone::ParamSet<float>::zeros_like(ps);
  Sgd<float> opt(ps, 0.9, 0.0);  // weight decay off
  const auto before = ps.at("layer.weight").values();
  opt.step(ps, zero, 0.05);
  CHECK(ps.at("layer.weight").values() == before);
}

TEST_CASE("sample_triplets respects the label constraints") {
  std::vector<int> labels = {0, 0, 1, 1};
  Rng rng(3);
  auto ts = sample_triplets(labels, 4, rng);
  CHECK(ts.size() == 4);
  std::set<size_t> anchors;
  for (const auto& t : ts) {
    CHECK(labels[t.anchor] == labels[t.positive]);
    CHECK(labels[t.anchor] != labels[t.negative]);
    CHECK(t.anchor != t.positive);
    anchors.insert(t.anchor);
  }
  CHECK(anchors.size() == 4);

  std::vector<int> single = {0, 0, 0};
  Rng rng2(3);
  CHECK_THROWS_AS(sample_triplets(single, 2, rng2), Error);

  // deterministic under seed
  Rng ra(42), rb(42);
  auto t1 = sample_triplets(labels, 3, ra);
  auto t2 = sample_triplets(labels, 3, rb);
  for (size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].anchor == t2[i].anchor);
    CHECK(t1[i].positive == t2[i].positive);
    CHECK(t1[i].negative == t2[i].negative);
  }
}

TEST_CASE("lr schedule decays by the configured factor") {
  LrSchedule s{0.001, 0.1, 10};
  CHECK(s.at(0) == doctest::Approx(0.001));
  CHECK(s.at(9) == doctest::Approx(0.001));
  CHECK(s.at(10) == doctest::Approx(1e-4));
  CHECK(s.at(25) == doctest::Approx(1e-5));
  LrSchedule flat{0.01, 1.0, 0};
  CHECK(flat.at(57) == doctest::Approx(0.01));
}

TEST_CASE("train_gfe reduces the triplet loss and is deterministic") {
  Pool pool = make_pool("gfe_train", 2, 4, 31);

  TrainConfig cfg;
  cfg.stage = Stage::gfe;
  cfg.epochs = 8;
  cfg.batch_size = 12;
  cfg.lr = {0.02, 1.0, 0};
  cfg.margin = 0.2;
  cfg.seed = 7;

  auto r1 = train_gfe(pool.fs, test_arch(32, 7), cfg);
  CHECK(r1.encoder.provenance == "gfe_pretrained");
  CHECK(r1.log.size() == 8);
  CHECK(r1.log.back().loss < r1.log.front().loss);
  CHECK(!r1.consumed_clip_ids.empty());

  auto r2 = train_gfe(pool.fs, test_arch(32, 7), cfg);
  for (const auto& n : r1.encoder.params.names())
    CHECK(r1.encoder.params.at(n).values() == r2.encoder.params.at(n).values());
}

TEST_CASE("trained GFE separates classes in cosine space") {
  Pool pool = make_pool("gfe_sep", 2, 5, 33);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 16;
  cfg.lr = {0.02, 1.0, 0};
  cfg.seed = 11;
  auto res = train_gfe(pool.fs, test_arch(32, 11), cfg);

  std::vector<TensorF> embs;
  for (size_t i = 0; i < pool.fs.size(); ++i)
    embs.push_back(res.encoder.forward(*pool.fs.features[i], nullptr));
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (size_t i = 0; i < embs.size(); ++i)
    for (size_t j = i + 1; j < embs.size(); ++j) {
      const double c = meta::cosine_similarity(embs[i], embs[j]);
      if (pool.fs.labels[i] == pool.fs.labels[j]) {
        intra += c;
        ++n_intra;
      } else {
        inter += c;
        ++n_inter;
      }
    }
  intra /= n_intra;
  inter /= n_inter;
  INFO("intra ", intra, " inter ", inter);
  CHECK(inter < intra);
}

TEST_CASE("leakage guard rejects the held-out subject") {
  Pool pool = make_pool("gfe_leak", 2, 2, 35);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.fold_subject = "subj01";
  CHECK_THROWS_AS(train_gfe(pool.fs, test_arch(32, 3), cfg), Error);
  CHECK_THROWS_AS(train_afe(pool.fs, test_arch(32, 3), cfg, 3), Error);
}

TEST_CASE("train_afe overfits a tiny balanced set and drops the head") {
  Pool pool = make_pool("afe_train", 2, 4, 37);
  TrainConfig cfg;
  cfg.stage = Stage::afe;
  cfg.epochs = 25;
  cfg.batch_size = 8;
  cfg.lr = {0.01, 0.1, 10};
  cfg.seed = 9;

  auto res = train_afe(pool.fs, test_arch(32, 9), cfg, 3);
  CHECK(res.encoder.provenance == "afe_pretrained");
  CHECK(res.log.back().accuracy > 0.9);
  CHECK(!res.encoder.params.has("cls.weight"));

  // class absent from the split is a hard error
  data::FeatureSet broken = pool.fs;
  for (auto& l : broken.labels)
    if (l == 2) l = 1;
  CHECK_THROWS_AS(train_afe(broken, test_arch(32, 9), cfg, 3), Error);
}

TEST_CASE("training log round trips as JSONL") {
  std::vector<EpochLog> log = {{0, 1.5, 0.01, 0.3, 12.0}, {1, 1.1, 0.01, 0.5, 11.0}};
  auto dir = testsup::scratch_dir("trainlog");
  write_training_log(log, dir / "log.jsonl");
  std::ifstream is(dir / "log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 2);
}
