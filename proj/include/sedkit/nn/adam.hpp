#pragma once

// Adam with bias correction. Moment buffers are keyed by position in the
// ParamSet, which has deterministic order; only trainable entries with a
// populated gradient are updated.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/nn/params.hpp"

namespace sedkit {

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamSet& params, double lr) {
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(params.items()[i].tensor->data.size(), 0.0);
        v_[i].assign(params.items()[i].tensor->data.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw ConfigError("adam: parameter set changed size");

    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& it = params.items()[i];
      if (!it.trainable || !it.tensor->has_grad()) continue;
      auto& m = m_[i];
      auto& v = v_[i];
      auto& data = it.tensor->data;
      const auto& grad = it.tensor->grad;
      for (std::size_t k = 0; k < data.size(); ++k) {
        const double g = grad[k];
        if (!std::isfinite(g))
          throw NumericalError("adam: non-finite gradient in " + it.name + " at element " + std::to_string(k));
        m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
        v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
        data[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
      }
    }
  }

  std::int64_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Exponential ramp to lr_max over the first ramp_steps iterations, then
// multiplicative decay per step. Both branches give lr_max at the junction.
inline double lr_schedule(std::int64_t step, double lr_max = 1e-3, std::int64_t ramp_steps = 12500,
                          double decay = 0.99995) {
  if (step < 0) throw InvalidInput("lr_schedule: negative step");
  if (step <= ramp_steps) {
    const double x = static_cast<double>(step) / static_cast<double>(ramp_steps);
    return lr_max * std::exp(-5.0 * (1.0 - x) * (1.0 - x));
  }
  return lr_max * std::pow(decay, static_cast<double>(step - ramp_steps));
}

}  // namespace sedkit
