#pragma once

// Frame probabilities to event lists: thresholding, per-class binary median
// filtering (zero-padded), and run merging with a gap tolerance. Gaps of
// exactly the tolerance stay split.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/events.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

struct PredictionMatrix {
  Tensor probs;                 // [T', C] in [0,1]
  double frame_duration = 0.0;  // seconds per output frame
  double clip_length = 0.0;     // seconds
  std::string clip_id;
};

inline std::vector<std::uint8_t> binarize_column(const Tensor& probs, std::int64_t cls, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("binarize: threshold must be in (0,1)");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(probs.dim(0)));
  for (std::int64_t t = 0; t < probs.dim(0); ++t) out[static_cast<std::size_t>(t)] = probs(t, cls) >= tau ? 1 : 0;
  return out;
}

// Median of a centered odd window over a binary signal, zero padding at both
// ends: output is 1 iff the window holds a strict majority of ones.
inline std::vector<std::uint8_t> median_filter(const std::vector<std::uint8_t>& column, int window = 7) {
  if (window < 1 || window % 2 == 0) throw ConfigError("median_filter: window must be odd");
  const auto n = static_cast<std::int64_t>(column.size());
  const int half = window / 2;
  std::vector<std::uint8_t> out(column.size());
  for (std::int64_t i = 0; i < n; ++i) {
    int ones = 0;
    for (int k = -half; k <= half; ++k) {
      const std::int64_t j = i + k;
      if (j >= 0 && j < n && column[static_cast<std::size_t>(j)]) ++ones;
    }
    out[static_cast<std::size_t>(i)] = ones > window / 2 ? 1 : 0;
  }
  return out;
}

// Maximal runs of ones become events [start*d, (end+1)*d]; events separated
// by less than gap_tol are merged; offsets are clipped to the clip length.
inline std::vector<TimedEvent> frames_to_events(const std::vector<std::uint8_t>& column, double frame_duration,
                                                const std::string& label, double clip_length,
                                                double gap_tol = 0.2) {
  if (!(frame_duration > 0.0)) throw InvalidInput("frames_to_events: frame_duration must be positive");
  std::vector<TimedEvent> events;
  const auto n = static_cast<std::int64_t>(column.size());
  std::int64_t i = 0;
  while (i < n) {
    if (!column[static_cast<std::size_t>(i)]) {
      ++i;
      continue;
    }
    std::int64_t j = i;
    while (j + 1 < n && column[static_cast<std::size_t>(j + 1)]) ++j;
    const double onset = static_cast<double>(i) * frame_duration;
    const double offset = static_cast<double>(j + 1) * frame_duration;
    if (!events.empty() && onset - events.back().offset < gap_tol) {
      events.back().offset = offset;
    } else {
      events.push_back(TimedEvent{onset, offset, label});
    }
    i = j + 1;
  }
  for (auto& ev : events) ev.offset = std::min(ev.offset, clip_length);
  std::erase_if(events, [](const TimedEvent& ev) { return !(ev.onset < ev.offset); });
  return events;
}

// Full decode of one clip: for each threshold, binarize, median filter per
// class, and merge runs into events. Keyed by threshold.
inline std::map<double, std::vector<TimedEvent>> decode(const PredictionMatrix& pred,
                                                        const std::vector<std::string>& class_names,
                                                        const std::vector<double>& thresholds,
                                                        int median_window = 7, double gap_tol = 0.2) {
  if (thresholds.empty()) throw InvalidInput("decode: no thresholds");
  if (static_cast<std::size_t>(pred.probs.dim(1)) != class_names.size())
    throw ShapeError("decode: class count mismatch");
  std::map<double, std::vector<TimedEvent>> out;
  for (const double tau : thresholds) {
    std::vector<TimedEvent> events;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      const auto binary = binarize_column(pred.probs, static_cast<std::int64_t>(c), tau);
      const auto filtered = median_filter(binary, median_window);
      auto evs = frames_to_events(filtered, pred.frame_duration, class_names[c], pred.clip_length, gap_tol);
      events.insert(events.end(), evs.begin(), evs.end());
    }
    sort_events(events);
    out[tau] = std::move(events);
  }
  return out;
}

}  // namespace sedkit
