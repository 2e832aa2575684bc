#pragma once

// Spectrogram augmentation: one time mask plus one frequency mask per map,
// and batch-level mixup with within-subset pairing so weak, strong and
// unlabeled examples never mix across annotation kinds.

#include <cstdint>
#include <numeric>
#include <vector>

#include "sedkit/batch.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/rng.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

struct MaskDraw {
  std::int64_t t_start = 0, t_len = 0;
  std::int64_t f_start = 0, f_len = 0;
};

// Zeroes one random time stripe (length uniform in 0..time_max) and one
// random frequency stripe (0..freq_max) of a [T, F] map, in place.
inline MaskDraw time_freq_mask(Tensor& map, std::int64_t time_max, std::int64_t freq_max, Rng& rng) {
  if (map.ndim() != 2) throw ShapeError("time_freq_mask: expected [T,F], got " + shape_str(map.shape));
  const std::int64_t T = map.dim(0), F = map.dim(1);
  if (time_max > T || freq_max > F) throw InvalidInput("time_freq_mask: mask maximum exceeds extent");

  MaskDraw draw;
  draw.t_len = rng.uniform_int(time_max + 1);
  draw.t_start = rng.uniform_int(T - draw.t_len + 1);
  draw.f_len = rng.uniform_int(freq_max + 1);
  draw.f_start = rng.uniform_int(F - draw.f_len + 1);

  for (std::int64_t t = draw.t_start; t < draw.t_start + draw.t_len; ++t)
    for (std::int64_t f = 0; f < F; ++f) map(t, f) = 0.0;
  for (std::int64_t f = draw.f_start; f < draw.f_start + draw.f_len; ++f)
    for (std::int64_t t = 0; t < T; ++t) map(t, f) = 0.0;
  return draw;
}

namespace detail {

inline void mix_rows(Tensor& t, const Tensor& original, std::int64_t rows_dim0, std::int64_t row_a,
                     std::int64_t row_b, double lambda) {
  const std::int64_t stride = t.numel() / rows_dim0;
  for (std::int64_t k = 0; k < stride; ++k)
    t.data[static_cast<std::size_t>(row_a * stride + k)] =
        lambda * original.data[static_cast<std::size_t>(row_a * stride + k)] +
        (1.0 - lambda) * original.data[static_cast<std::size_t>(row_b * stride + k)];
}

}  // namespace detail

// Deterministic core: mixes features for every subset and labels for the
// two supervised ones, pairing element i with element perm[i] of the same
// subset. Perms index into the subset, not the batch.
inline void apply_mixup(LabeledBatch& batch, double lambda, const std::vector<std::int64_t>& weak_perm,
                        const std::vector<std::int64_t>& strong_perm,
                        const std::vector<std::int64_t>& unlabeled_perm) {
  const Tensor features = batch.features;
  const Tensor weak = batch.weak_labels;
  const Tensor strong = batch.strong_labels;
  const std::int64_t B = batch.size();

  const auto mix_subset = [&](const std::vector<std::int64_t>& subset, const std::vector<std::int64_t>& perm) {
    if (subset.size() != perm.size()) throw ShapeError("mixup: permutation size mismatch");
    for (std::size_t i = 0; i < subset.size(); ++i)
      detail::mix_rows(batch.features, features, B, subset[i], subset[static_cast<std::size_t>(perm[i])], lambda);
  };
  mix_subset(batch.weak_idx, weak_perm);
  mix_subset(batch.strong_idx, strong_perm);
  mix_subset(batch.unlabeled_idx, unlabeled_perm);

  for (std::size_t i = 0; i < weak_perm.size(); ++i)
    detail::mix_rows(batch.weak_labels, weak, batch.weak_labels.dim(0), static_cast<std::int64_t>(i),
                     weak_perm[i], lambda);
  for (std::size_t i = 0; i < strong_perm.size(); ++i)
    detail::mix_rows(batch.strong_labels, strong, batch.strong_labels.dim(0), static_cast<std::int64_t>(i),
                     strong_perm[i], lambda);
}

inline std::vector<std::int64_t> random_permutation(std::int64_t n, Rng& rng) {
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::int64_t i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)],
                                                     perm[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  return perm;
}

// Batch-level mixup: applied with the given probability, lambda drawn from
// Beta(alpha, alpha). Returns whether it fired.
inline bool mixup(LabeledBatch& batch, Rng& rng, double prob = 0.5, double alpha = 0.2) {
  if (!rng.bernoulli(prob)) return false;
  const double lambda = rng.beta(alpha, alpha);
  const auto weak_perm = random_permutation(static_cast<std::int64_t>(batch.weak_idx.size()), rng);
  const auto strong_perm = random_permutation(static_cast<std::int64_t>(batch.strong_idx.size()), rng);
  const auto unlabeled_perm = random_permutation(static_cast<std::int64_t>(batch.unlabeled_idx.size()), rng);
  apply_mixup(batch, lambda, weak_perm, strong_perm, unlabeled_perm);
  return true;
}

}  // namespace sedkit
