#pragma once

// Waveform-level DSP: peak normalization, windowed-sinc resampling and a
// radix-2 FFT used by the spectrogram code and by tests.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "sedkit/errors.hpp"
#include "sedkit/wave.hpp"

namespace sedkit {

// Scales so that max |sample| == 1. Silent input is returned unchanged.
inline Waveform peak_normalize(const Waveform& w) {
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return w;
  Waveform out = w;
  for (double& v : out.samples) v /= peak;
  return out;
}

namespace detail {

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace detail

// Windowed-sinc resampler. Output sample n is taken at input position
// n * in_rate / out_rate; the kernel is a Hann-windowed sinc with its
// cutoff lowered on downsampling to suppress aliasing.
inline Waveform resample(const Waveform& w, int target_rate, int half_width = 32) {
  if (w.samples.empty()) throw InvalidInput("resample: empty waveform");
  if (w.sample_rate <= 0 || target_rate <= 0) throw InvalidInput("resample: rates must be positive");
  if (w.sample_rate == target_rate) return w;

  const double ratio = static_cast<double>(target_rate) / w.sample_rate;
  const double cutoff = std::min(1.0, ratio);  // fraction of input Nyquist
  const std::int64_t in_len = static_cast<std::int64_t>(w.samples.size());
  const std::int64_t out_len = std::llround(static_cast<double>(in_len) * ratio);
  const double taps = half_width / cutoff;

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(out_len));

  for (std::int64_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const std::int64_t j0 = static_cast<std::int64_t>(std::ceil(t - taps));
    const std::int64_t j1 = static_cast<std::int64_t>(std::floor(t + taps));
    double acc = 0.0;
    for (std::int64_t j = std::max<std::int64_t>(j0, 0); j <= std::min(j1, in_len - 1); ++j) {
      const double d = t - static_cast<double>(j);
      const double win = 0.5 * (1.0 + std::cos(M_PI * d / taps));
      acc += w.samples[static_cast<std::size_t>(j)] * cutoff * detail::sinc(cutoff * d) * win;
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

// In-place iterative radix-2 complex FFT; n must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw InvalidInput("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Power spectrum of a real frame: |FFT|^2 for bins 0..n/2.
inline std::vector<double> power_spectrum(const std::vector<double>& frame) {
  std::vector<std::complex<double>> buf(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  fft(buf);
  std::vector<double> power(frame.size() / 2 + 1);
  for (std::size_t i = 0; i < power.size(); ++i) power[i] = std::norm(buf[i]);
  return power;
}

}  // namespace sedkit
