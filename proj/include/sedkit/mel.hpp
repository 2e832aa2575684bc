#pragma once

// Log-mel spectrogram extraction: centered STFT (Hann window, reflection
// padding) followed by an area-normalized triangular mel filterbank and a
// floored log.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sedkit/dsp.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/features.hpp"

namespace sedkit {

constexpr int kSampleRate = 22050;
constexpr int kFftSize = 2048;
constexpr int kHopSamples = 363;
constexpr int kMelBins = 128;
constexpr double kLogFloor = 1e-10;

namespace detail {

// Slaney-style mel scale: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
  if (hz < 1000.0) return hz * 3.0 / 200.0;
  return 15.0 + 27.0 * std::log(hz / 1000.0) / std::log(6.4);
}
inline double mel_to_hz(double mel) {
  if (mel < 15.0) return mel * 200.0 / 3.0;
  return 1000.0 * std::exp(std::log(6.4) * (mel - 15.0) / 27.0);
}

// Mirror an arbitrary index into [0, len) without repeating edge samples.
inline std::int64_t reflect_index(std::int64_t i, std::int64_t len) {
  if (len == 1) return 0;
  const std::int64_t period = 2 * (len - 1);
  std::int64_t m = i % period;
  if (m < 0) m += period;
  return m < len ? m : period - m;
}

}  // namespace detail

// Triangular filterbank over [0, sample_rate/2], n_mels filters, each row
// scaled by 2 / (width in Hz). Rows are indexed [mel, fft_bin].
inline std::vector<std::vector<double>> mel_filterbank(int n_mels = kMelBins, int n_fft = kFftSize,
                                                       int sample_rate = kSampleRate) {
  const int n_bins = n_fft / 2 + 1;
  const double mel_max = detail::hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (int m = 0; m < n_mels + 2; ++m)
    edges[static_cast<std::size_t>(m)] = detail::mel_to_hz(mel_max * m / (n_mels + 1));

  std::vector<std::vector<double>> bank(static_cast<std::size_t>(n_mels),
                                        std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    const double norm = 2.0 / (hi - lo);
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > lo && f < hi) w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      bank[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = w * norm;
    }
  }
  return bank;
}

// Pre-standardization log-mel map. T == floor(len/hop) + 1 under centered
// framing; requires at least one hop of audio at 22050 Hz.
inline SpectralMap log_mel(const Waveform& w, const std::string& clip_id = "", int n_fft = kFftSize,
                           int hop = kHopSamples, int n_mels = kMelBins) {
  if (w.sample_rate != kSampleRate)
    throw InvalidInput("log_mel: expected " + std::to_string(kSampleRate) + " Hz input");
  const auto len = static_cast<std::int64_t>(w.samples.size());
  if (len < hop) throw InvalidInput("log_mel: clip shorter than one hop");

  const std::int64_t frames = len / hop + 1;
  const auto bank = mel_filterbank(n_mels, n_fft, w.sample_rate);

  // Periodic Hann window.
  std::vector<double> window(static_cast<std::size_t>(n_fft));
  for (int i = 0; i < n_fft; ++i)
    window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n_fft);

  SpectralMap map;
  map.clip_id = clip_id;
  map.n_mels = n_mels;
  map.hop_seconds = static_cast<double>(hop) / w.sample_rate;
  map.duration_seconds = w.duration_seconds();
  map.values = Tensor({frames, static_cast<std::int64_t>(n_mels)});

  std::vector<double> frame(static_cast<std::size_t>(n_fft));
  for (std::int64_t t = 0; t < frames; ++t) {
    const std::int64_t start = t * hop - n_fft / 2;  // centered framing
    for (int i = 0; i < n_fft; ++i) {
      const std::int64_t src = detail::reflect_index(start + i, len);
      frame[static_cast<std::size_t>(i)] = w.samples[static_cast<std::size_t>(src)] * window[static_cast<std::size_t>(i)];
    }
    const std::vector<double> power = power_spectrum(frame);
    for (int m = 0; m < n_mels; ++m) {
      double energy = 0.0;
      const auto& row = bank[static_cast<std::size_t>(m)];
      for (std::size_t k = 0; k < power.size(); ++k) energy += row[k] * power[k];
      map.values(t, m) = std::log(energy + kLogFloor);
    }
  }
  return map;
}

}  // namespace sedkit
