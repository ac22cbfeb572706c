#include "mpf/pretrain/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include "json.hpp"

namespace mpf::pretrain {

using backbone::Backbone;
using backbone::BackboneTrace;
using backbone::ParamSet;
using data::FeatureSet;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void guard_fold(const FeatureSet& fs, const std::string& fold_subject, const char* stage) {
  if (fold_subject.empty()) return;
  for (size_t i = 0; i < fs.size(); ++i)
    check(fs.subject_ids[i] != fold_subject,
          std::string(stage) + ": held-out subject '" + fold_subject +
              "' present in training data (clip " + fs.clip_ids[i] + ")");
}

std::vector<Triplet> sample_batch(const std::vector<int>& labels, size_t batch, Rng& rng) {
  return sample_triplets(labels, batch, rng);
}

}  // namespace

std::vector<Triplet> sample_triplets(const std::vector<int>& labels, size_t batch_size,
                                     Rng& rng) {
  const int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<size_t>> by_class(std::max(n_classes, 0));
  for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::vector<size_t> eligible;  // anchors: class has >= 2 members and another class exists
  size_t nonempty = 0;
  for (const auto& c : by_class) nonempty += c.empty() ? 0 : 1;
  for (const auto& c : by_class)
    if (c.size() >= 2 && nonempty >= 2) eligible.insert(eligible.end(), c.begin(), c.end());
  check(!eligible.empty(), "sample_triplets: no valid triplet exists (need two classes, one "
                           "with at least two samples)");
  check(batch_size <= eligible.size(),
        "sample_triplets: batch of " + std::to_string(batch_size) +
            " exceeds the " + std::to_string(eligible.size()) + " distinct eligible anchors");

  std::sort(eligible.begin(), eligible.end());
  rng.shuffle(eligible);

  std::vector<Triplet> out;
  out.reserve(batch_size);
  for (size_t k = 0; k < batch_size; ++k) {
    const size_t a = eligible[k];
    const auto& same = by_class[labels[a]];
    size_t p = a;
    while (p == a) p = same[rng.uniform_int(0, static_cast<int>(same.size()) - 1)];
    size_t total_other = 0;
    for (int c = 0; c < n_classes; ++c)
      if (c != labels[a]) total_other += by_class[c].size();
    size_t pick = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(total_other) - 1));
    size_t n = 0;
    bool found = false;
    for (int c = 0; c < n_classes && !found; ++c) {
      if (c == labels[a]) continue;
      if (pick < by_class[c].size()) {
        n = by_class[c][pick];
        found = true;
      } else {
        pick -= by_class[c].size();
      }
    }
    check(found, "sample_triplets: internal negative pick failure");
    out.push_back({a, p, n});
  }
  return out;
}

std::vector<Triplet> sample_triplets(const data::DatasetManifest& manifest, size_t batch_size,
                                     uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(manifest.records.size());
  for (const auto& r : manifest.records)
    labels.push_back(manifest.label_space.class_index(manifest.label_space.mapped(r.label)));
  Rng rng(seed);
  return sample_triplets(labels, batch_size, rng);
}

TrainResult train_gfe(const FeatureSet& train, backbone::BackboneConfig arch,
                      const TrainConfig& cfg) {
  guard_fold(train, cfg.fold_subject, "train_gfe");
  check(train.size() >= 3, "train_gfe: need at least 3 clips");

  arch.output_mode = backbone::OutputMode::embedding;
  Backbone<float> net = Backbone<float>::build(arch);
  auto [mean, stddev] = data::channel_stats(train, arch.in_channels);
  net.set_standardization(mean, stddev);

  Sgd<float> opt(net.params, cfg.momentum, cfg.weight_decay);
  ParamSet<float> grads = ParamSet<float>::zeros_like(net.params);
  Rng rng(mix_seed(cfg.seed, 0x67fe));

  // how many anchors are even possible per batch
  size_t eligible = 0;
  {
    auto by_class = train.indices_by_class();
    size_t nonempty = 0;
    for (const auto& c : by_class) nonempty += c.empty() ? 0 : 1;
    for (const auto& c : by_class)
      if (c.size() >= 2 && nonempty >= 2) eligible += c.size();
  }
  check(eligible > 0, "train_gfe: training set cannot form a triplet");
  const size_t batch = std::min<size_t>(cfg.batch_size, eligible);
  const size_t batches_per_epoch = std::max<size_t>(1, train.size() / batch);

  TrainResult res{std::move(net), {}, {}};
  std::set<std::string> consumed;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr.at(epoch);
    const double t0 = now_ms();
    double loss_sum = 0.0;
    size_t loss_count = 0;

    for (size_t b = 0; b < batches_per_epoch; ++b) {
      std::vector<Triplet> triplets = sample_batch(train.labels, batch, rng);

      // unique clips in this batch
      std::vector<size_t> uniq;
      for (const auto& t : triplets) {
        uniq.push_back(t.anchor);
        uniq.push_back(t.positive);
        uniq.push_back(t.negative);
      }
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      std::unordered_map<size_t, size_t> slot;
      for (size_t i = 0; i < uniq.size(); ++i) slot[uniq[i]] = i;

      // pass 1: embeddings, projected onto the unit sphere. The margin is
      // only meaningful at a fixed embedding scale; raw squared distances
      // make the hinge gradient scale with the fourth power of the norm.
      std::vector<TensorF> embs(uniq.size());
      std::vector<TensorF> unit(uniq.size());
      std::vector<float> norms(uniq.size());
      for (size_t i = 0; i < uniq.size(); ++i) {
        embs[i] = res.encoder.forward(*train.features[uniq[i]], nullptr);
        consumed.insert(train.clip_ids[uniq[i]]);
        float n2 = kernels::dot(embs[i].data(), embs[i].data(), embs[i].size());
        check(std::isfinite(n2), "train_gfe: encoder diverged (non-finite embedding) at "
                                 "epoch " + std::to_string(epoch));
        norms[i] = std::sqrt(std::max(n2, 1e-24f));
        unit[i] = embs[i];
        kernels::scale(unit[i].data(), 1.0f / norms[i], unit[i].size());
      }

      // per-embedding grads on the sphere, mean reduction over the batch
      std::vector<TensorF> gunit(uniq.size(),
                                 TensorF({static_cast<uint32_t>(arch.embedding_dim)}));
      const float scale = 1.0f / static_cast<float>(triplets.size());
      for (const auto& t : triplets) {
        const float term = triplet_loss_backward(
            unit[slot[t.anchor]], unit[slot[t.positive]], unit[slot[t.negative]],
            static_cast<float>(cfg.margin), scale, gunit[slot[t.anchor]],
            gunit[slot[t.positive]], gunit[slot[t.negative]]);
        loss_sum += term;
        ++loss_count;
      }
      check(std::isfinite(loss_sum), "train_gfe: loss diverged (non-finite) at epoch " +
                                         std::to_string(epoch));

      // pass 2: backprop per unique clip, chain through the normalization
      for (size_t i = 0; i < uniq.size(); ++i) {
        bool nonzero = false;
        for (size_t k = 0; k < gunit[i].size() && !nonzero; ++k)
          nonzero = gunit[i][k] != 0.0f;
        if (!nonzero) continue;
        TensorF gemb({static_cast<uint32_t>(arch.embedding_dim)});
        const float proj = kernels::dot(gunit[i].data(), unit[i].data(), gemb.size());
        for (size_t k = 0; k < gemb.size(); ++k)
          gemb[k] = (gunit[i][k] - proj * unit[i][k]) / norms[i];
        BackboneTrace<float> tr;
        res.encoder.forward(*train.features[uniq[i]], &tr);
        res.encoder.backward(gemb, tr, grads);
      }

      opt.step(res.encoder.params, grads, lr);
      grads.zero_all();
    }

    res.log.push_back({epoch, loss_sum / std::max<size_t>(1, loss_count), lr, 0.0,
                       now_ms() - t0});
  }

  res.encoder.provenance = "gfe_pretrained";
  nlohmann::json meta{{"stage", "gfe"},
                      {"epochs", cfg.epochs},
                      {"final_loss", res.log.empty() ? 0.0 : res.log.back().loss}};
  res.encoder.training_meta = meta.dump();
  res.consumed_clip_ids.assign(consumed.begin(), consumed.end());
  return res;
}

TrainResult train_afe(const FeatureSet& balanced_train, backbone::BackboneConfig arch,
                      const TrainConfig& cfg, int n_classes) {
  guard_fold(balanced_train, cfg.fold_subject, "train_afe");
  check(n_classes >= 2, "train_afe: need at least two classes");
  {
    std::vector<size_t> per_class(n_classes, 0);
    for (int l : balanced_train.labels) per_class[l]++;
    for (int c = 0; c < n_classes; ++c)
      check(per_class[c] > 0, "train_afe: class '" + balanced_train.class_names[c] +
                                  "' absent from the training split");
  }

  arch.output_mode = backbone::OutputMode::embedding;
  Backbone<float> net = Backbone<float>::build(arch);
  auto [mean, stddev] = data::channel_stats(balanced_train, arch.in_channels);
  net.set_standardization(mean, stddev);

  // classification head, discarded after training
  backbone::Linear<float> head =
      backbone::Linear<float>::make("cls", arch.embedding_dim, n_classes);
  ParamSet<float> head_ps;
  head.register_params(head_ps);
  {
    Rng hrng(mix_seed(cfg.seed, 0xafe0));
    auto& w = head_ps.at("cls.weight");
    const double sigma = std::sqrt(2.0 / arch.embedding_dim);
    for (size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(sigma * hrng.normal());
  }

  Sgd<float> opt(net.params, cfg.momentum, cfg.weight_decay);
  Sgd<float> opt_head(head_ps, cfg.momentum, cfg.weight_decay);
  ParamSet<float> grads = ParamSet<float>::zeros_like(net.params);
  ParamSet<float> head_grads = ParamSet<float>::zeros_like(head_ps);

  Rng rng(mix_seed(cfg.seed, 0xafe1));
  std::vector<size_t> order(balanced_train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult res{std::move(net), {}, {}};
  std::set<std::string> consumed;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr.at(epoch);
    const double t0 = now_ms();
    rng.shuffle(order);
    double loss_sum = 0.0;
    size_t correct = 0;

    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const float scale = 1.0f / static_cast<float>(end - start);
      for (size_t k = start; k < end; ++k) {
        const size_t i = order[k];
        consumed.insert(balanced_train.clip_ids[i]);
        BackboneTrace<float> tr;
        backbone::LinearTrace<float> htr;
        TensorF emb = res.encoder.forward(*balanced_train.features[i], &tr);
        TensorF logits = head.forward(head_ps, emb, &htr);

        // softmax cross entropy
        float mx = logits[0];
        for (size_t c = 1; c < logits.size(); ++c) mx = std::max(mx, logits[c]);
        double z = 0;
        for (size_t c = 0; c < logits.size(); ++c) z += std::exp(logits[c] - mx);
        const int y = balanced_train.labels[i];
        const double logp = logits[y] - mx - std::log(z);
        loss_sum += -logp;
        check(std::isfinite(loss_sum),
              "train_afe: loss diverged (non-finite) at epoch " + std::to_string(epoch));

        int argmax = 0;
        for (size_t c = 1; c < logits.size(); ++c)
          if (logits[c] > logits[argmax]) argmax = static_cast<int>(c);
        correct += argmax == y ? 1 : 0;

        TensorF dlogits({static_cast<uint32_t>(n_classes)});
        for (int c = 0; c < n_classes; ++c) {
          const double p = std::exp(logits[c] - mx) / z;
          dlogits[c] = scale * static_cast<float>(p - (c == y ? 1.0 : 0.0));
        }
        TensorF gemb = head.backward(head_ps, dlogits, htr, head_grads);
        res.encoder.backward(gemb, tr, grads);
      }
      opt.step(res.encoder.params, grads, lr);
      opt_head.step(head_ps, head_grads, lr);
      grads.zero_all();
      head_grads.zero_all();
    }

    res.log.push_back({epoch, loss_sum / balanced_train.size(), lr,
                       static_cast<double>(correct) / balanced_train.size(), now_ms() - t0});
  }

  res.encoder.provenance = "afe_pretrained";
  nlohmann::json meta{{"stage", "afe"},
                      {"epochs", cfg.epochs},
                      {"final_loss", res.log.empty() ? 0.0 : res.log.back().loss},
                      {"final_accuracy", res.log.empty() ? 0.0 : res.log.back().accuracy}};
  res.encoder.training_meta = meta.dump();
  res.consumed_clip_ids.assign(consumed.begin(), consumed.end());
  return res;
}

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  check(os.good(), "write_training_log: cannot open " + path.string());
  for (const auto& e : log) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"loss", e.loss},
                     {"lr", e.lr},
                     {"accuracy", e.accuracy},
                     {"wall_ms", e.wall_ms}};
    os << j.dump() << "\n";
  }
}

}  // namespace mpf::pretrain
