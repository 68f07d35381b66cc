#pragma once

#include <cmath>
#include <vector>

#include "clrep/nn/layers.hpp"

namespace clrep::nn {

// SGD with momentum and decoupled-from-BN weight decay (decay only touches
// params flagged decay=true, i.e. conv/linear weights).
template <typename S>
class Sgd {
 public:
  Sgd(ParamList<S> params, double momentum, double weight_decay)
      : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    for (const auto& p : params_)
      velocity_.push_back(p.trainable ? Mat<S>::Zero(p.value->rows(), p.value->cols()) : Mat<S>());
  }

  void zero_grad() {
    for (auto& p : params_)
      if (p.trainable) p.grad->setZero();
  }

  void step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.trainable) continue;
      Mat<S>& v = velocity_[i];
      if (p.decay && weight_decay_ != 0.0)
        v = static_cast<S>(momentum_) * v + *p.grad + static_cast<S>(weight_decay_) * *p.value;
      else
        v = static_cast<S>(momentum_) * v + *p.grad;
      *p.value -= static_cast<S>(lr) * v;
    }
  }

  const ParamList<S>& params() const { return params_; }

 private:
  ParamList<S> params_;
  double momentum_;
  double weight_decay_;
  std::vector<Mat<S>> velocity_;
};

// Cosine decay to zero over the task's step budget.
inline double cosine_lr(double base_lr, long step, long total_steps) {
  if (total_steps <= 0) return base_lr;
  const double t = static_cast<double>(std::min(step, total_steps)) / static_cast<double>(total_steps);
  return 0.5 * base_lr * (1.0 + std::cos(3.14159265358979323846 * t));
}

}  // namespace clrep::nn
