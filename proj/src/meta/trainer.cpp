#include "mpf/meta/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"
#include "mpf/backbone/checkpoint.hpp"
#include "mpf/core/tensor_io.hpp"

namespace mpf::meta {

using backbone::Backbone;
using backbone::BackboneTrace;
using backbone::ParamSet;
using data::FeatureSet;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::single: return "single";
    case Variant::parallel: return "P";
    case Variant::cascade: return "C";
  }
  return "?";
}

Variant variant_from_name(const std::string& s) {
  if (s == "single") return Variant::single;
  if (s == "P" || s == "parallel") return Variant::parallel;
  if (s == "C" || s == "cascade") return Variant::cascade;
  fail("unknown fusion variant: " + s);
}

void FusionSpec::validate() const {
  if (variant == Variant::parallel) {
    check(gamma >= 0.0 && gamma <= 1.0, "fusion: gamma must be in [0,1]");
    check(afe.has_value(), "fusion: variant P needs both encoders");
    check(gfe.cfg.output_mode == backbone::OutputMode::embedding &&
              afe->cfg.output_mode == backbone::OutputMode::embedding,
          "fusion: variant P encoders must be in embedding mode");
  } else if (variant == Variant::cascade) {
    check(afe.has_value(), "fusion: variant C needs the adapted AFE");
    check(gfe.cfg.output_mode == backbone::OutputMode::feature_map,
          "fusion: variant C GFE must be in feature_map mode");
    check(afe->cfg.in_channels == 2 * gfe.cfg.in_channels,
          "fusion: variant C needs the channel-adapted AFE");
    check(proj_w.rank() == 2 && static_cast<int>(proj_w.dim(0)) == gfe.cfg.in_channels &&
              static_cast<int>(proj_w.dim(1)) == gfe.cfg.inception_b.out_channels(),
          "fusion: projection dims mismatch");
  } else {
    check(gfe.cfg.output_mode == backbone::OutputMode::embedding,
          "fusion: single encoder must be in embedding mode");
  }
}

backbone::Backbone<float> adapt_afe_for_cascade(const backbone::Backbone<float>& afe,
                                                int extra_channels) {
  check(afe.cfg.in_channels == 5,
        "adapt_afe_for_cascade: encoder already adapted (expects 5 input channels)");
  check(extra_channels >= 0, "adapt_afe_for_cascade: extra_channels must be >= 0");
  if (extra_channels == 0) return afe;

  backbone::BackboneConfig cfg = afe.cfg;
  cfg.in_channels += extra_channels;
  backbone::Backbone<float> out = backbone::Backbone<float>::build(cfg);
  out.provenance = afe.provenance;
  out.training_meta = afe.training_meta;

  for (const auto& name : out.params.names()) {
    auto& dst = out.params.at(name);
    if (name == "stem.weight") {
      const auto& src = afe.params.at(name);
      const int co = src.dim(0), ci = src.dim(1);
      const size_t taps = static_cast<size_t>(src.dim(2)) * src.dim(3) * src.dim(4);
      for (int o = 0; o < co; ++o)
        for (size_t k = 0; k < taps; ++k) {
          float mean = 0.0f;
          for (int c = 0; c < ci; ++c) {
            const float v = src[(static_cast<size_t>(o) * ci + c) * taps + k];
            dst[(static_cast<size_t>(o) * (ci + extra_channels) + c) * taps + k] = v;
            mean += v;
          }
          mean /= static_cast<float>(ci);
          for (int c = ci; c < ci + extra_channels; ++c)
            dst[(static_cast<size_t>(o) * (ci + extra_channels) + c) * taps + k] = mean;
        }
    } else if (name == "stand.mean" || name == "stand.std") {
      const auto& src = afe.params.at(name);
      for (int c = 0; c < afe.cfg.in_channels; ++c) dst[c] = src[c];
      for (int c = afe.cfg.in_channels; c < cfg.in_channels; ++c)
        dst[c] = name == "stand.std" ? 1.0f : 0.0f;
    } else {
      dst = afe.params.at(name);
    }
  }
  return out;
}

namespace {

// One episode flattened: support samples first, then queries.
struct EpisodeBatch {
  std::vector<size_t> pool_idx;
  std::vector<int> pos_class;  // 0..way-1
  int n_support = 0, n_query = 0, way = 0;

  static EpisodeBatch from(const Episode& ep) {
    EpisodeBatch b;
    b.way = ep.way;
    for (int k = 0; k < ep.way; ++k)
      for (size_t i : ep.support[k]) {
        b.pool_idx.push_back(i);
        b.pos_class.push_back(k);
      }
    b.n_support = static_cast<int>(b.pool_idx.size());
    for (int k = 0; k < ep.way; ++k)
      for (size_t i : ep.query[k]) {
        b.pool_idx.push_back(i);
        b.pos_class.push_back(k);
      }
    b.n_query = static_cast<int>(b.pool_idx.size()) - b.n_support;
    return b;
  }
};

struct EpisodeGrads {
  // per-sample embedding grads, aligned with EpisodeBatch order; one entry
  // per encoder stream in play
  std::vector<TensorF> main;
  std::vector<TensorF> aux;
};

// Scores an embedded episode and back-propagates to per-sample embedding
// grads (scaled). Returns (loss, accuracy).
std::pair<double, double> episode_scores_and_grads(
    const EpisodeBatch& b, const std::vector<TensorF>& emb_main,
    const std::vector<TensorF>* emb_aux, double gamma, float scale, EpisodeGrads* grads) {
  const int way = b.way;
  std::vector<TensorF> sup_main(emb_main.begin(), emb_main.begin() + b.n_support);
  std::vector<int> sup_class(b.pos_class.begin(), b.pos_class.begin() + b.n_support);
  const auto protos_main = compute_prototypes(sup_main, sup_class, way);
  std::vector<TensorF> protos_aux;
  if (emb_aux) {
    std::vector<TensorF> sup_aux(emb_aux->begin(), emb_aux->begin() + b.n_support);
    protos_aux = compute_prototypes(sup_aux, sup_class, way);
  }

  std::vector<std::vector<float>> scores(b.n_query);
  std::vector<int> labels(b.n_query);
  for (int q = 0; q < b.n_query; ++q) {
    const int i = b.n_support + q;
    labels[q] = b.pos_class[i];
    scores[q].resize(way);
    for (int k = 0; k < way; ++k) {
      float s = cosine_similarity(emb_main[i], protos_main[k]);
      if (emb_aux)
        s += static_cast<float>(gamma) * cosine_similarity((*emb_aux)[i], protos_aux[k]);
      scores[q][k] = s;
    }
  }

  std::vector<std::vector<float>> dscores;
  const float loss =
      episode_loss_from_scores(scores, labels, grads ? &dscores : nullptr);

  int correct = 0;
  for (int q = 0; q < b.n_query; ++q) {
    int arg = 0;
    for (int k = 1; k < way; ++k)
      if (scores[q][k] > scores[q][arg]) arg = k;
    correct += arg == labels[q] ? 1 : 0;
  }

  if (grads) {
    const uint32_t dim = emb_main[0].dim(0);
    grads->main.assign(emb_main.size(), TensorF({dim}));
    std::vector<TensorF> gproto_main(way, TensorF({dim}));
    std::vector<TensorF> gproto_aux;
    if (emb_aux) {
      const uint32_t dim_a = (*emb_aux)[0].dim(0);
      grads->aux.assign(emb_aux->size(), TensorF({dim_a}));
      gproto_aux.assign(way, TensorF({dim_a}));
    }

    for (int q = 0; q < b.n_query; ++q) {
      const int i = b.n_support + q;
      for (int k = 0; k < way; ++k) {
        const float g = scale * dscores[q][k];
        if (g == 0.0f) continue;
        cosine_similarity_backward(emb_main[i], protos_main[k], g, grads->main[i],
                                   gproto_main[k]);
        if (emb_aux)
          cosine_similarity_backward((*emb_aux)[i], protos_aux[k],
                                     static_cast<float>(gamma) * g, grads->aux[i],
                                     gproto_aux[k]);
      }
    }

    // prototype mean distributes over its support samples
    std::vector<int> counts(way, 0);
    for (int s = 0; s < b.n_support; ++s) counts[b.pos_class[s]]++;
    for (int s = 0; s < b.n_support; ++s) {
      const int k = b.pos_class[s];
      const float inv = 1.0f / static_cast<float>(counts[k]);
      kernels::axpy(inv, gproto_main[k].data(), grads->main[s].data(), gproto_main[k].size());
      if (emb_aux)
        kernels::axpy(inv, gproto_aux[k].data(), grads->aux[s].data(), gproto_aux[k].size());
    }
  }
  return {loss, static_cast<double>(correct) / std::max(1, b.n_query)};
}

bool any_nonzero(const TensorF& t) {
  for (size_t i = 0; i < t.size(); ++i)
    if (t[i] != 0.0f) return true;
  return false;
}

}  // namespace

QueryEmbedding embed_sample(const FusionSpec& model, const TensorF& feature) {
  QueryEmbedding q;
  switch (model.variant) {
    case Variant::single:
      q.main = model.gfe.forward(feature, nullptr);
      break;
    case Variant::parallel:
      q.main = model.gfe.forward(feature, nullptr);
      q.aux = model.afe->forward(feature, nullptr);
      break;
    case Variant::cascade:
      q.main = cascade_forward<float>(model.gfe, *model.afe, model.proj_w, model.proj_b,
                                      feature, nullptr);
      break;
  }
  return q;
}

MetaResult train_mpfnet(const FeatureSet& pool, FusionSpec init, const MetaConfig& cfg) {
  init.validate();
  if (!cfg.fold_subject.empty())
    for (size_t i = 0; i < pool.size(); ++i)
      check(pool.subject_ids[i] != cfg.fold_subject,
            "train_mpfnet: held-out subject '" + cfg.fold_subject +
                "' present in the meta-training pool (clip " + pool.clip_ids[i] + ")");

  MetaResult res{std::move(init), {}, {}};
  FusionSpec& model = res.model;
  const bool has_aux = model.variant == Variant::parallel;
  const bool is_cascade = model.variant == Variant::cascade;

  pretrain::Sgd<float> opt_g(model.gfe.params, cfg.momentum, cfg.weight_decay);
  ParamSet<float> g_gfe = ParamSet<float>::zeros_like(model.gfe.params);
  std::optional<pretrain::Sgd<float>> opt_a;
  std::optional<ParamSet<float>> g_afe;
  if (model.afe) {
    opt_a.emplace(model.afe->params, cfg.momentum, cfg.weight_decay);
    g_afe = ParamSet<float>::zeros_like(model.afe->params);
  }
  TensorF g_proj_w, g_proj_b;
  TensorF vel_proj_w, vel_proj_b;
  if (is_cascade) {
    g_proj_w = TensorF(model.proj_w.dims());
    g_proj_b = TensorF(model.proj_b.dims());
    vel_proj_w = TensorF(model.proj_w.dims());
    vel_proj_b = TensorF(model.proj_b.dims());
  }

  std::set<std::string> consumed;
  const float scale = 1.0f / static_cast<float>(cfg.episodes_per_batch);

  for (int batch = 0; batch < cfg.batches; ++batch) {
    double batch_loss = 0.0;
    double batch_acc = 0.0;

    for (int e = 0; e < cfg.episodes_per_batch; ++e) {
      Episode ep = sample_episode(pool, cfg.way, cfg.shot, cfg.query,
                                  mix_seed(cfg.seed, 0xe915, batch, e));
      EpisodeBatch b = EpisodeBatch::from(ep);
      for (size_t i : b.pool_idx) consumed.insert(pool.clip_ids[i]);

      // pass 1: embeddings
      std::vector<TensorF> emb_main(b.pool_idx.size());
      std::vector<TensorF> emb_aux;
      if (has_aux) emb_aux.resize(b.pool_idx.size());
      for (size_t i = 0; i < b.pool_idx.size(); ++i) {
        const TensorF& x = *pool.features[b.pool_idx[i]];
        if (is_cascade)
          emb_main[i] = cascade_forward<float>(model.gfe, *model.afe, model.proj_w,
                                               model.proj_b, x, nullptr);
        else
          emb_main[i] = model.gfe.forward(x, nullptr);
        if (has_aux) emb_aux[i] = model.afe->forward(x, nullptr);
      }

      EpisodeGrads grads;
      auto [loss, acc] = episode_scores_and_grads(b, emb_main, has_aux ? &emb_aux : nullptr,
                                                  model.gamma, scale, &grads);
      check(std::isfinite(loss), "train_mpfnet: loss diverged at batch " +
                                     std::to_string(batch));
      batch_loss += loss / cfg.episodes_per_batch;
      batch_acc += acc / cfg.episodes_per_batch;
      if (cfg.freeze_encoders) continue;

      // pass 2: backprop per sample
      for (size_t i = 0; i < b.pool_idx.size(); ++i) {
        const TensorF& x = *pool.features[b.pool_idx[i]];
        if (any_nonzero(grads.main[i])) {
          if (is_cascade) {
            CascadeTrace<float> tr;
            cascade_forward<float>(model.gfe, *model.afe, model.proj_w, model.proj_b, x, &tr);
            cascade_backward<float>(model.gfe, *model.afe, model.proj_w, grads.main[i], tr,
                                    g_gfe, *g_afe, g_proj_w, g_proj_b);
          } else {
            BackboneTrace<float> tr;
            model.gfe.forward(x, &tr);
            model.gfe.backward(grads.main[i], tr, g_gfe);
          }
        }
        if (has_aux && any_nonzero(grads.aux[i])) {
          BackboneTrace<float> tr;
          model.afe->forward(x, &tr);
          model.afe->backward(grads.aux[i], tr, *g_afe);
        }
      }
    }

    if (!cfg.freeze_encoders) {
      const double lr = cfg.lr.at(batch);
      opt_g.step(model.gfe.params, g_gfe, lr);
      g_gfe.zero_all();
      if (model.afe) {
        opt_a->step(model.afe->params, *g_afe, lr);
        g_afe->zero_all();
      }
      if (is_cascade) {
        const float m = static_cast<float>(cfg.momentum);
        const float flr = static_cast<float>(lr * cfg.projection_lr_scale);
        for (size_t i = 0; i < g_proj_w.size(); ++i) {
          vel_proj_w[i] = m * vel_proj_w[i] + g_proj_w[i];
          model.proj_w[i] -= flr * vel_proj_w[i];
        }
        for (size_t i = 0; i < g_proj_b.size(); ++i) {
          vel_proj_b[i] = m * vel_proj_b[i] + g_proj_b[i];
          model.proj_b[i] -= flr * vel_proj_b[i];
        }
        g_proj_w.fill(0.0f);
        g_proj_b.fill(0.0f);
      }
    }

    res.log.push_back({batch, batch_loss, batch_acc});
  }

  res.consumed_clip_ids.assign(consumed.begin(), consumed.end());
  return res;
}

double evaluate_episodes(const FusionSpec& model, const FeatureSet& pool, int n_episodes,
                         int way, int shot, int query_per_class, uint64_t seed) {
  double acc = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    Episode ep = sample_episode(pool, way, shot, query_per_class, mix_seed(seed, 0xe7a1, e));
    EpisodeBatch b = EpisodeBatch::from(ep);
    std::vector<TensorF> emb_main(b.pool_idx.size());
    std::vector<TensorF> emb_aux;
    const bool has_aux = model.variant == Variant::parallel;
    if (has_aux) emb_aux.resize(b.pool_idx.size());
    for (size_t i = 0; i < b.pool_idx.size(); ++i) {
      QueryEmbedding q = embed_sample(model, *pool.features[b.pool_idx[i]]);
      emb_main[i] = std::move(q.main);
      if (has_aux) emb_aux[i] = std::move(*q.aux);
    }
    auto [loss, a] = episode_scores_and_grads(b, emb_main, has_aux ? &emb_aux : nullptr,
                                              model.gamma, 1.0f, nullptr);
    (void)loss;
    acc += a / n_episodes;
  }
  return acc;
}

FusionScorer::FusionScorer(const FusionSpec& model, const FeatureSet& pool,
                           const std::vector<std::vector<size_t>>& support_by_class)
    : model_(&model), gamma_(model.gamma) {
  const bool has_aux = model.variant == Variant::parallel;
  for (const auto& members : support_by_class) {
    check(!members.empty(), "fusion scorer: empty support class");
    std::vector<TensorF> main_embs, aux_embs;
    for (size_t idx : members) {
      QueryEmbedding q = embed_sample(model, *pool.features[idx]);
      main_embs.push_back(std::move(q.main));
      if (has_aux) aux_embs.push_back(std::move(*q.aux));
    }
    std::vector<int> zeros(main_embs.size(), 0);
    protos_main_.push_back(compute_prototypes(main_embs, zeros, 1)[0]);
    if (has_aux) protos_aux_.push_back(compute_prototypes(aux_embs, zeros, 1)[0]);
  }
}

std::vector<double> FusionScorer::score(const QueryEmbedding& q) const {
  std::vector<double> out(protos_main_.size());
  for (size_t k = 0; k < protos_main_.size(); ++k) {
    double s = cosine_similarity(q.main, protos_main_[k]);
    if (model_->variant == Variant::parallel)
      s += gamma_ * cosine_similarity(*q.aux, protos_aux_[k]);
    out[k] = s;
  }
  return out;
}

void save_fusion(const FusionSpec& spec, const std::filesystem::path& dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  nlohmann::json j{{"variant", variant_name(spec.variant)}, {"gamma", spec.gamma}};
  std::ofstream os(dir / "fusion.json");
  check(os.good(), "save_fusion: cannot write under " + dir.string());
  os << j.dump(2) << "\n";
  backbone::save_checkpoint(spec.gfe, dir / "gfe");
  if (spec.afe) backbone::save_checkpoint(*spec.afe, dir / "afe");
  if (spec.variant == Variant::cascade) {
    write_tensor(spec.proj_w, dir / "projection.mef");
    write_tensor(spec.proj_b, dir / "projection_bias.mef");
  }
}

FusionSpec load_fusion(const std::filesystem::path& dir) {
  std::ifstream is(dir / "fusion.json");
  check(is.good(), "load_fusion: missing fusion.json in " + dir.string());
  nlohmann::json j = nlohmann::json::parse(is);
  FusionSpec spec;
  spec.variant = variant_from_name(j.at("variant").get<std::string>());
  spec.gamma = j.at("gamma").get<double>();
  spec.gfe = backbone::load_checkpoint(dir / "gfe");
  if (spec.variant != Variant::single)
    spec.afe = backbone::load_checkpoint(dir / "afe");
  if (spec.variant == Variant::cascade) {
    spec.proj_w = read_tensor(dir / "projection.mef");
    spec.proj_b = read_tensor(dir / "projection_bias.mef");
  }
  spec.validate();
  return spec;
}

}  // namespace mpf::meta
