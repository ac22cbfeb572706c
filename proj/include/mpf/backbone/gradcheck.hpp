#pragma once

#include <functional>

#include "mpf/backbone/network.hpp"

namespace mpf::backbone {

struct GradCheckResult {
  double max_rel_error = 0.0;
  size_t checked = 0;
};

// loss_fn maps the network output to (loss, dLoss/dOutput).
using LossFn =
    std::function<std::pair<double, Tensor<double>>(const Tensor<double>&)>;

// Central finite differences on randomly sampled trainable parameters
// against the analytic backward pass, at double precision.
inline GradCheckResult gradient_check(Backbone<double>& net, const Tensor<double>& input,
                                      const LossFn& loss_fn, double eps = 1e-3,
                                      int n_samples = 50, uint64_t seed = 1234) {
  check(net.params.total_elements() <= 200000,
        "gradient_check: instance too large for finite differencing");

  BackboneTrace<double> tr;
  Tensor<double> out = net.forward(input, &tr);
  auto [loss0, gout] = loss_fn(out);
  check(std::isfinite(loss0), "gradient_check: non-finite loss");
  ParamSet<double> grads = ParamSet<double>::zeros_like(net.params);
  net.backward(gout, tr, grads);

  std::vector<std::pair<std::string, size_t>> slots;
  for (const auto& name : net.params.names()) {
    if (!param_trainable(name)) continue;
    for (size_t i = 0; i < net.params.at(name).size(); ++i) slots.emplace_back(name, i);
  }
  Rng rng(seed);
  rng.shuffle(slots);
  const size_t n = std::min<size_t>(n_samples, slots.size());

  GradCheckResult res;
  for (size_t k = 0; k < n; ++k) {
    const auto& [name, idx] = slots[k];
    double& w = net.params.at(name)[idx];
    const double keep = w;
    w = keep + eps;
    const double lp = loss_fn(net.forward(input, nullptr)).first;
    w = keep - eps;
    const double lm = loss_fn(net.forward(input, nullptr)).first;
    w = keep;
    const double fd = (lp - lm) / (2.0 * eps);
    const double an = grads.at(name)[idx];
    ++res.checked;
    if (std::fabs(fd) < 1e-10 && std::fabs(an) < 1e-10) continue;  // both zero
    const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
    res.max_rel_error = std::max(res.max_rel_error, std::fabs(fd - an) / denom);
  }
  return res;
}

}  // namespace mpf::backbone
