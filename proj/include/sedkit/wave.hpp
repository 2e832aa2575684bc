#pragma once

// Minimal RIFF/WAVE support: reads 16-bit PCM and 32-bit IEEE float files
// (multichannel is averaged down to mono), writes 16-bit PCM mono.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sedkit/binio.hpp"
#include "sedkit/errors.hpp"

namespace sedkit {

struct Waveform {
  std::vector<double> samples;  // nominal range [-1, 1]
  int sample_rate = 0;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

inline Waveform read_wave(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);

  binio::expect_tag(is, "RIFF");
  binio::read_le<std::uint32_t>(is);  // chunk size, unused
  binio::expect_tag(is, "WAVE");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> payload;

  // Walk chunks; anything other than fmt/data (LIST, fact, ...) is skipped.
  while (is) {
    char id[4];
    is.read(id, 4);
    if (!is) break;
    auto size = binio::read_le<std::uint32_t>(is);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = binio::read_le<std::uint16_t>(is);
      channels = binio::read_le<std::uint16_t>(is);
      rate = binio::read_le<std::uint32_t>(is);
      binio::read_le<std::uint32_t>(is);  // byte rate
      binio::read_le<std::uint16_t>(is);  // block align
      bits = binio::read_le<std::uint16_t>(is);
      if (size > 16) is.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      payload.resize(size);
      is.read(payload.data(), size);
      if (!is) throw IoError("truncated data chunk in " + path);
      if (size % 2 == 1) is.seekg(1, std::ios::cur);
      break;
    } else {
      is.seekg(size + (size % 2), std::ios::cur);
    }
  }

  if (!have_fmt) throw IoError("missing fmt chunk in " + path);
  if (payload.empty()) throw IoError("missing data chunk in " + path);
  if (channels == 0 || rate == 0) throw IoError("degenerate fmt chunk in " + path);

  std::vector<double> mono;
  if (format == 1 && bits == 16) {
    const std::size_t frames = payload.size() / (2u * channels);
    mono.resize(frames);
    const auto* p = reinterpret_cast<const std::int16_t*>(payload.data());
    for (std::size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (unsigned c = 0; c < channels; ++c) acc += static_cast<double>(p[i * channels + c]);
      mono[i] = acc / (32768.0 * channels);
    }
  } else if (format == 3 && bits == 32) {
    const std::size_t frames = payload.size() / (4u * channels);
    mono.resize(frames);
    const auto* p = reinterpret_cast<const float*>(payload.data());
    for (std::size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (unsigned c = 0; c < channels; ++c) acc += static_cast<double>(p[i * channels + c]);
      mono[i] = acc / channels;
    }
  } else {
    throw IoError("unsupported WAVE encoding in " + path + " (need PCM16 or float32)");
  }

  for (double v : mono)
    if (!std::isfinite(v)) throw InvalidInput("non-finite sample in " + path);

  return Waveform{std::move(mono), static_cast<int>(rate)};
}

inline void write_wave_pcm16(const std::string& path, const Waveform& w) {
  if (w.sample_rate <= 0) throw InvalidInput("sample_rate must be positive");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);

  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  binio::write_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  binio::write_le<std::uint32_t>(os, 16);
  binio::write_le<std::uint16_t>(os, 1);  // PCM
  binio::write_le<std::uint16_t>(os, 1);  // mono
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate));
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  binio::write_le<std::uint16_t>(os, 2);
  binio::write_le<std::uint16_t>(os, 16);
  os.write("data", 4);
  binio::write_le<std::uint32_t>(os, data_bytes);
  for (double v : w.samples) {
    const double clamped = std::clamp(v, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lrint(clamped * 32767.0));
    binio::write_le<std::int16_t>(os, q);
  }
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace sedkit
