#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpf/core/error.hpp"

namespace mpf::eval {

struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<int64_t>> counts;  // rows = true, cols = predicted

  static ConfusionMatrix zero(const std::vector<std::string>& classes);
  void add(int true_cls, int pred_cls, int64_t n = 1);
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  int64_t row_sum(int c) const;
  int64_t total() const;
};

ConfusionMatrix confusion_from_predictions(
    const std::vector<std::string>& classes,
    const std::vector<std::pair<std::string, std::string>>& true_pred);

struct PerClassMetrics {
  std::vector<double> recall;   // Acc_c = TP_c / N_c
  std::vector<double> f1;       // 2 TP / (2 TP + FP + FN)
  std::vector<bool> defined;    // false when N_c = 0 (excluded with a warning)
};

PerClassMetrics per_class_metrics(const ConfusionMatrix& cm);

// Unweighted means over the defined classes.
std::pair<double, double> uf1_uar(const ConfusionMatrix& cm);

double accuracy(const ConfusionMatrix& cm);

// Population standard deviation of the per-class recalls (defined classes).
double per_class_recall_std(const ConfusionMatrix& cm);

}  // namespace mpf::eval
