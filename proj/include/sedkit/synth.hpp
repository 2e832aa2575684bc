#pragma once

// Synthetic desk-scale corpus: band-limited tone bursts over white noise,
// one fixed tone frequency per class so classes occupy disjoint mel
// regions. Writes WAVE files plus manifests, ground truth and durations;
// byte-identical output for a fixed seed.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sedkit/dsp.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/events.hpp"
#include "sedkit/manifest.hpp"
#include "sedkit/psds.hpp"
#include "sedkit/rng.hpp"
#include "sedkit/wave.hpp"

namespace sedkit {

struct SynthSpec {
  std::uint64_t seed = 0;
  int n_weak = 20;
  int n_strong = 20;
  int n_unlabeled = 40;
  double clip_seconds = 10.0;
  int n_classes = 2;
  int min_events = 1;
  int max_events = 3;
  double min_event_seconds = 0.8;
  double max_event_seconds = 2.5;
  double snr_db_min = 12.0;
  double snr_db_max = 24.0;
  // When positive, event onsets and durations snap to this grid so labels
  // align with a model's output frames (used by the desk-scale runs).
  double event_grid_seconds = 0.0;
  int sample_rate = 22050;

  void validate() const {
    if (n_weak < 0 || n_strong < 0 || n_unlabeled < 0) throw InvalidInput("synth: negative clip count");
    if (n_classes < 1 || n_classes > 10) throw InvalidInput("synth: need 1..10 classes");
    if (!(clip_seconds > 0.5)) throw InvalidInput("synth: clips must be longer than 0.5 s");
    if (min_events < 1 || max_events < min_events) throw InvalidInput("synth: bad event count range");
    if (!(min_event_seconds > 0.05) || max_event_seconds < min_event_seconds)
      throw InvalidInput("synth: bad event duration range");
    if (max_event_seconds > clip_seconds) throw InvalidInput("synth: events longer than the clip");
    if (sample_rate < 8000) throw InvalidInput("synth: sample rate too low");
  }
};

inline std::vector<std::string> synth_class_names(int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("band" + std::to_string(i));
  return names;
}

// Ten log-spaced tone slots between 300 Hz and 4.8 kHz; class k always uses
// slot k so any subset stays spectrally disjoint.
inline double synth_class_freq(int k) { return 300.0 * std::pow(16.0, static_cast<double>(k) / 9.0); }

struct SynthOutput {
  DatasetManifest manifest;
  GroundTruth groundtruth;
};

namespace detail {

struct SynthClip {
  Waveform audio;
  std::vector<TimedEvent> events;
};

inline SynthClip synth_clip(const SynthSpec& spec, Rng rng, const std::vector<std::string>& classes) {
  SynthClip clip;
  clip.audio.sample_rate = spec.sample_rate;
  const auto n = static_cast<std::int64_t>(std::llround(spec.clip_seconds * spec.sample_rate));
  clip.audio.samples.assign(static_cast<std::size_t>(n), 0.0);

  const double tone_amp = 0.25;
  const double snr_db = rng.uniform(spec.snr_db_min, spec.snr_db_max);
  const double noise_sigma = tone_amp / std::pow(10.0, snr_db / 20.0);
  for (auto& s : clip.audio.samples) s = noise_sigma * rng.normal();

  const int n_events =
      spec.min_events + static_cast<int>(rng.uniform_int(spec.max_events - spec.min_events + 1));
  for (int e = 0; e < n_events; ++e) {
    const int cls = static_cast<int>(rng.uniform_int(spec.n_classes));
    double dur = rng.uniform(spec.min_event_seconds, spec.max_event_seconds);
    const double grid = spec.event_grid_seconds;
    if (grid > 0.0) dur = std::max(std::ceil(spec.min_event_seconds / grid), std::round(dur / grid)) * grid;
    if (dur > spec.clip_seconds) continue;

    // Keep same-class events apart so ground truth stays disjoint per class.
    double onset = -1.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      double candidate = rng.uniform(0.0, spec.clip_seconds - dur);
      if (grid > 0.0) candidate = std::floor(candidate / grid) * grid;
      bool clashes = false;
      for (const auto& other : clip.events)
        if (other.label == classes[static_cast<std::size_t>(cls)] && candidate < other.offset + 0.3 &&
            other.onset < candidate + dur + 0.3)
          clashes = true;
      if (!clashes) {
        onset = candidate;
        break;
      }
    }
    if (onset < 0.0) continue;

    const double freq = synth_class_freq(cls);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const auto i0 = static_cast<std::int64_t>(std::llround(onset * spec.sample_rate));
    const auto i1 = std::min<std::int64_t>(n, static_cast<std::int64_t>(std::llround((onset + dur) * spec.sample_rate)));
    const double ramp = 0.01 * spec.sample_rate;  // 10 ms fade
    for (std::int64_t i = i0; i < i1; ++i) {
      const double edge = std::min({1.0, (i - i0) / ramp, (i1 - 1 - i) / ramp});
      clip.audio.samples[static_cast<std::size_t>(i)] +=
          tone_amp * std::max(0.0, edge) * std::sin(2.0 * M_PI * freq * (i - i0) / spec.sample_rate + phase);
    }
    clip.events.push_back(TimedEvent{onset, onset + dur, classes[static_cast<std::size_t>(cls)]});
  }
  sort_events(clip.events);
  return clip;
}

}  // namespace detail

inline SynthOutput synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wavs");

  SynthOutput out;
  out.manifest.classes = synth_class_names(spec.n_classes);

  Rng base(spec.seed);
  std::uint64_t clip_counter = 0;

  const auto emit = [&](const std::string& name) {
    auto clip = detail::synth_clip(spec, base.fork(100 + clip_counter++), out.manifest.classes);
    const std::string rel = "wavs/" + name + ".wav";
    write_wave_pcm16((fs::path(out_dir) / rel).string(), clip.audio);
    out.groundtruth.clip_durations[name] = clip.audio.duration_seconds();
    auto& gt_events = out.groundtruth.events[name];
    gt_events = clip.events;
    return std::pair{rel, clip.events};
  };

  char buf[32];
  for (int i = 0; i < spec.n_weak; ++i) {
    std::snprintf(buf, sizeof buf, "weak_%03d", i);
    auto [rel, events] = emit(buf);
    WeakRow row;
    row.path = rel;
    for (const auto& ev : events)
      if (std::find(row.labels.begin(), row.labels.end(), ev.label) == row.labels.end())
        row.labels.push_back(ev.label);
    std::sort(row.labels.begin(), row.labels.end());
    out.manifest.weak.push_back(std::move(row));
  }
  for (int i = 0; i < spec.n_strong; ++i) {
    std::snprintf(buf, sizeof buf, "strong_%03d", i);
    auto [rel, events] = emit(buf);
    for (const auto& ev : events) out.manifest.strong.push_back(StrongRow{rel, ev.onset, ev.offset, ev.label});
  }
  for (int i = 0; i < spec.n_unlabeled; ++i) {
    std::snprintf(buf, sizeof buf, "unlab_%03d", i);
    auto [rel, events] = emit(buf);
    out.manifest.unlabeled.push_back(rel);
  }

  save_manifest(out_dir, out.manifest);
  write_events_tsv((fs::path(out_dir) / "groundtruth.tsv").string(), out.groundtruth.events);
  write_durations_tsv((fs::path(out_dir) / "durations.tsv").string(), out.groundtruth.clip_durations);
  return out;
}

}  // namespace sedkit
