#pragma once

// Central finite-difference gradient checker. The loss is the sum of the
// op's output; analytic gradients come from backward with an all-ones
// upstream gradient. Relative error is |analytic - numeric| / max(1, |a|).

#include <cmath>
#include <functional>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

// forward: runs the op and returns its output (must be re-runnable and
// deterministic, e.g. by reseeding any internal rng per call).
// backward: given dLoss/dOutput, populates .grad on every tensor in wrt.
inline double check_gradients(const std::function<Tensor()>& forward,
                              const std::function<void(const Tensor&)>& backward,
                              const std::vector<Tensor*>& wrt, double h = 1e-5) {
  Tensor out = forward();
  if (!out.all_finite()) throw NumericalError("gradient check: non-finite forward output");

  for (Tensor* t : wrt) {
    t->ensure_grad();
    t->zero_grad();
  }
  Tensor ones(out.shape);
  std::fill(ones.data.begin(), ones.data.end(), 1.0);
  backward(ones);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(wrt.size());
  for (Tensor* t : wrt) analytic.push_back(t->grad);

  const auto loss = [&forward]() {
    const Tensor y = forward();
    double acc = 0.0;
    for (double v : y.data) acc += v;
    return acc;
  };

  double max_err = 0.0;
  for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
    Tensor* t = wrt[ti];
    for (std::size_t i = 0; i < t->data.size(); ++i) {
      const double saved = t->data[i];
      t->data[i] = saved + h;
      const double up = loss();
      t->data[i] = saved - h;
      const double down = loss();
      t->data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[ti][i];
      if (!std::isfinite(numeric) || !std::isfinite(a)) throw NumericalError("gradient check: non-finite gradient");
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace sedkit
