#pragma once

// The four-part mean-teacher loss: clip-level BCE on the weak subset,
// frame-level BCE on the strong subset, and clip- plus frame-level MSE
// consistency between student and teacher over the whole batch. The
// classification terms carry weight one, the consistency terms share one
// configurable weight. Each BCE/MSE term is the mean over its own elements.

#include <cmath>
#include <cstdint>

#include "sedkit/batch.hpp"
#include "sedkit/crnn.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

constexpr double kProbEps = 1e-7;

struct LossParts {
  double bce_clip = 0.0;
  double bce_frame = 0.0;
  double mse_clip = 0.0;
  double mse_frame = 0.0;
  double consistency_weight = 2.0;

  double total() const { return bce_clip + bce_frame + consistency_weight * (mse_clip + mse_frame); }
};

namespace detail {

inline double clamp_prob(double p) { return std::min(1.0 - kProbEps, std::max(kProbEps, p)); }

inline double bce(double p, double y) {
  const double q = clamp_prob(p);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

inline double bce_grad(double p, double y) {
  const double q = clamp_prob(p);
  return (q - y) / (q * (1.0 - q));
}

}  // namespace detail

// Computes the loss parts; when d_frame/d_clip are non-null they receive
// the gradients with respect to the student outputs. The teacher output is
// a constant here (no gradient flows into it).
inline LossParts compute_loss(const CrnnModel::Output& student, const CrnnModel::Output& teacher,
                              const LabeledBatch& batch, double consistency_weight = 2.0,
                              Tensor* d_frame = nullptr, Tensor* d_clip = nullptr) {
  const std::int64_t B = student.clip_probs.dim(0);
  const std::int64_t C = student.clip_probs.dim(1);
  const std::int64_t To = student.frame_probs.dim(1);
  student.frame_probs.require_shape(Shape{B, To, C}, "compute_loss frame probs");
  teacher.clip_probs.require_shape(Shape{B, C}, "compute_loss teacher clip probs");
  teacher.frame_probs.require_shape(Shape{B, To, C}, "compute_loss teacher frame probs");

  LossParts parts;
  parts.consistency_weight = consistency_weight;
  if (d_frame) *d_frame = Tensor(student.frame_probs.shape);
  if (d_clip) *d_clip = Tensor(student.clip_probs.shape);

  // Clip-level BCE over the weak subset.
  const std::int64_t W = static_cast<std::int64_t>(batch.weak_idx.size());
  if (W > 0) {
    batch.weak_labels.require_shape(Shape{W, C}, "compute_loss weak labels");
    const double n = static_cast<double>(W * C);
    for (std::int64_t i = 0; i < W; ++i) {
      const std::int64_t b = batch.weak_idx[static_cast<std::size_t>(i)];
      for (std::int64_t c = 0; c < C; ++c) {
        const double p = student.clip_probs(b, c);
        const double y = batch.weak_labels(i, c);
        parts.bce_clip += detail::bce(p, y) / n;
        if (d_clip) (*d_clip)(b, c) += detail::bce_grad(p, y) / n;
      }
    }
  }

  // Frame-level BCE over the strong subset.
  const std::int64_t S = static_cast<std::int64_t>(batch.strong_idx.size());
  if (S > 0) {
    batch.strong_labels.require_shape(Shape{S, To, C}, "compute_loss strong labels");
    const double n = static_cast<double>(S * To * C);
    for (std::int64_t i = 0; i < S; ++i) {
      const std::int64_t b = batch.strong_idx[static_cast<std::size_t>(i)];
      for (std::int64_t t = 0; t < To; ++t)
        for (std::int64_t c = 0; c < C; ++c) {
          const double p = student.frame_probs(b, t, c);
          const double y = batch.strong_labels(i, t, c);
          parts.bce_frame += detail::bce(p, y) / n;
          if (d_frame) (*d_frame)(b, t, c) += detail::bce_grad(p, y) / n;
        }
    }
  }

  // Consistency costs over every batch element.
  {
    const double n_clip = static_cast<double>(B * C);
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t c = 0; c < C; ++c) {
        const double diff = student.clip_probs(b, c) - teacher.clip_probs(b, c);
        parts.mse_clip += diff * diff / n_clip;
        if (d_clip) (*d_clip)(b, c) += consistency_weight * 2.0 * diff / n_clip;
      }
    const double n_frame = static_cast<double>(B * To * C);
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t t = 0; t < To; ++t)
        for (std::int64_t c = 0; c < C; ++c) {
          const double diff = student.frame_probs(b, t, c) - teacher.frame_probs(b, t, c);
          parts.mse_frame += diff * diff / n_frame;
          if (d_frame) (*d_frame)(b, t, c) += consistency_weight * 2.0 * diff / n_frame;
        }
  }

  if (!std::isfinite(parts.total())) throw NumericalError("compute_loss: non-finite loss");
  return parts;
}

}  // namespace sedkit
