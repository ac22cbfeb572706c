#pragma once

#include <cmath>

#include "mpf/backbone/params.hpp"

namespace mpf::pretrain {

struct LrSchedule {
  double initial = 0.01;
  double decay_factor = 1.0;
  int decay_every = 0;  // epochs; 0 = constant

  double at(int epoch) const {
    if (decay_every <= 0 || decay_factor == 1.0) return initial;
    return initial * std::pow(decay_factor, epoch / decay_every);
  }
};

// SGD with momentum and coupled weight decay: v = m*v + (g + wd*w), w -= lr*v.
// Standardization statistics never move.
template <typename T>
class Sgd {
 public:
  double momentum = 0.9;
  double weight_decay = 5e-4;

  explicit Sgd(const backbone::ParamSet<T>& like, double momentum_ = 0.9, double wd = 5e-4)
      : momentum(momentum_), weight_decay(wd), vel_(backbone::ParamSet<T>::zeros_like(like)) {}

  void step(backbone::ParamSet<T>& params, const backbone::ParamSet<T>& grads, double lr) {
    for (const auto& name : params.names()) {
      if (!backbone::param_trainable(name)) continue;
      auto& w = params.at(name);
      const auto& g = grads.at(name);
      auto& v = vel_.at(name);
      const T m = static_cast<T>(momentum);
      const T wd = static_cast<T>(weight_decay);
      const T step_lr = static_cast<T>(lr);
      for (size_t i = 0; i < w.size(); ++i) {
        v[i] = m * v[i] + g[i] + wd * w[i];
        w[i] -= step_lr * v[i];
      }
    }
  }

 private:
  backbone::ParamSet<T> vel_;
};

}  // namespace mpf::pretrain
