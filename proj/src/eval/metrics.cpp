#include "mpf/eval/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace mpf::eval {

ConfusionMatrix ConfusionMatrix::zero(const std::vector<std::string>& classes) {
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(classes.size(), std::vector<int64_t>(classes.size(), 0));
  return cm;
}

void ConfusionMatrix::add(int true_cls, int pred_cls, int64_t n) {
  check(true_cls >= 0 && true_cls < static_cast<int>(classes.size()) && pred_cls >= 0 &&
            pred_cls < static_cast<int>(classes.size()),
        "confusion matrix: class index out of range");
  counts[true_cls][pred_cls] += n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  check(classes == o.classes, "confusion matrix: class list mismatch");
  for (size_t i = 0; i < counts.size(); ++i)
    for (size_t j = 0; j < counts.size(); ++j) counts[i][j] += o.counts[i][j];
  return *this;
}

int64_t ConfusionMatrix::row_sum(int c) const {
  int64_t s = 0;
  for (int64_t v : counts[c]) s += v;
  return s;
}

int64_t ConfusionMatrix::total() const {
  int64_t s = 0;
  for (size_t c = 0; c < counts.size(); ++c) s += row_sum(static_cast<int>(c));
  return s;
}

ConfusionMatrix confusion_from_predictions(
    const std::vector<std::string>& classes,
    const std::vector<std::pair<std::string, std::string>>& true_pred) {
  ConfusionMatrix cm = ConfusionMatrix::zero(classes);
  auto index = [&](const std::string& name) {
    for (size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == name) return static_cast<int>(i);
    fail("confusion_from_predictions: unknown label '" + name + "'");
  };
  for (const auto& [t, p] : true_pred) cm.add(index(t), index(p));
  return cm;
}

PerClassMetrics per_class_metrics(const ConfusionMatrix& cm) {
  const size_t n = cm.classes.size();
  check(n > 0, "per_class_metrics: empty matrix");
  PerClassMetrics m;
  m.recall.assign(n, 0.0);
  m.f1.assign(n, 0.0);
  m.defined.assign(n, true);
  for (size_t c = 0; c < n; ++c) {
    const int64_t tp = cm.counts[c][c];
    const int64_t nc = cm.row_sum(static_cast<int>(c));
    int64_t fp = 0;
    for (size_t r = 0; r < n; ++r)
      if (r != c) fp += cm.counts[r][c];
    const int64_t fn = nc - tp;
    if (nc == 0) {
      m.defined[c] = false;
      std::fprintf(stderr, "per_class_metrics: class '%s' has no samples, excluded\n",
                   cm.classes[c].c_str());
      continue;
    }
    m.recall[c] = static_cast<double>(tp) / static_cast<double>(nc);
    const int64_t denom = 2 * tp + fp + fn;
    m.f1[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return m;
}

std::pair<double, double> uf1_uar(const ConfusionMatrix& cm) {
  const PerClassMetrics m = per_class_metrics(cm);
  double uf1 = 0, uar = 0;
  int defined = 0;
  for (size_t c = 0; c < cm.classes.size(); ++c) {
    if (!m.defined[c]) continue;
    uf1 += m.f1[c];
    uar += m.recall[c];
    ++defined;
  }
  check(defined > 0, "uf1_uar: no class has samples");
  return {uf1 / defined, uar / defined};
}

double accuracy(const ConfusionMatrix& cm) {
  const int64_t total = cm.total();
  check(total > 0, "accuracy: empty matrix");
  int64_t tp = 0;
  for (size_t c = 0; c < cm.classes.size(); ++c) tp += cm.counts[c][c];
  return static_cast<double>(tp) / static_cast<double>(total);
}

double per_class_recall_std(const ConfusionMatrix& cm) {
  const PerClassMetrics m = per_class_metrics(cm);
  std::vector<double> r;
  for (size_t c = 0; c < cm.classes.size(); ++c)
    if (m.defined[c]) r.push_back(m.recall[c]);
  check(!r.empty(), "per_class_recall_std: no defined class");
  double mean = 0;
  for (double v : r) mean += v;
  mean /= r.size();
  double var = 0;
  for (double v : r) var += (v - mean) * (v - mean);
  return std::sqrt(var / r.size());
}

}  // namespace mpf::eval
