#pragma once

// Training batch: stacked features with the weak/strong/unlabeled split and
// the label tensors for the two supervised subsets. Strong labels live on
// the model's output grid.

#include <cstdint>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/events.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

struct LabeledBatch {
  Tensor features;       // [B, 1, T, F]
  Tensor weak_labels;    // [W, C] binary (soft after mixup)
  Tensor strong_labels;  // [S, T', C] in [0, 1]
  std::vector<std::int64_t> weak_idx;       // rows of features, in order
  std::vector<std::int64_t> strong_idx;
  std::vector<std::int64_t> unlabeled_idx;

  std::int64_t size() const { return features.ndim() == 4 ? features.dim(0) : 0; }
};

// A frame is positive exactly when its span [j*d, (j+1)*d) overlaps an
// annotated event of that class; events shorter than a frame still mark one.
inline Tensor rasterize_events(const std::vector<TimedEvent>& events, const std::vector<std::string>& classes,
                               std::int64_t out_frames, double frame_duration) {
  Tensor grid(Shape{out_frames, static_cast<std::int64_t>(classes.size())});
  for (const auto& ev : events) {
    std::int64_t cls = -1;
    for (std::size_t c = 0; c < classes.size(); ++c)
      if (classes[c] == ev.label) {
        cls = static_cast<std::int64_t>(c);
        break;
      }
    if (cls < 0) throw DataError("rasterize: unknown class " + ev.label);
    const auto first = static_cast<std::int64_t>(std::floor(ev.onset / frame_duration));
    for (std::int64_t j = std::max<std::int64_t>(0, first); j < out_frames; ++j) {
      const double span_start = static_cast<double>(j) * frame_duration;
      if (span_start >= ev.offset) break;
      if (span_start + frame_duration > ev.onset) grid(j, cls) = 1.0;
    }
  }
  return grid;
}

}  // namespace sedkit
