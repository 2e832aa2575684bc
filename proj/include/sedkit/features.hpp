#pragma once

// Spectral feature containers: the standardized log-mel map, per-bin
// statistics, and the on-disk cache for both. Cache files round-trip
// bit-exactly (raw IEEE doubles, little endian).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sedkit/binio.hpp"
#include "sedkit/errors.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

struct SpectralMap {
  Tensor values;  // [T, n_mels], log-mel energies (z-scores once standardized)
  int n_mels = 128;
  double hop_seconds = 0.0;
  double duration_seconds = 0.0;
  std::string clip_id;

  std::int64_t frames() const { return values.ndim() == 2 ? values.dim(0) : 0; }
};

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> std;
};

// Population mean/std per frequency bin over every frame of the corpus.
// Bins with std below 1e-8 get std 1 so constant bins standardize to zero.
inline FeatureStats fit_stats(const std::vector<SpectralMap>& maps) {
  if (maps.empty()) throw InvalidInput("fit_stats: empty corpus");
  const std::int64_t bins = maps.front().values.dim(1);
  std::vector<double> sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> sumsq(static_cast<std::size_t>(bins), 0.0);
  std::int64_t frames = 0;
  for (const auto& m : maps) {
    if (m.values.dim(1) != bins) throw ShapeError("fit_stats: inconsistent bin count");
    for (std::int64_t t = 0; t < m.frames(); ++t)
      for (std::int64_t f = 0; f < bins; ++f) {
        const double v = m.values(t, f);
        sum[static_cast<std::size_t>(f)] += v;
        sumsq[static_cast<std::size_t>(f)] += v * v;
      }
    frames += m.frames();
  }
  FeatureStats stats;
  stats.mean.resize(static_cast<std::size_t>(bins));
  stats.std.resize(static_cast<std::size_t>(bins));
  for (std::int64_t f = 0; f < bins; ++f) {
    const auto i = static_cast<std::size_t>(f);
    const double mean = sum[i] / static_cast<double>(frames);
    const double var = std::max(0.0, sumsq[i] / static_cast<double>(frames) - mean * mean);
    const double sd = std::sqrt(var);
    stats.mean[i] = mean;
    stats.std[i] = sd < 1e-8 ? 1.0 : sd;
  }
  return stats;
}

inline SpectralMap apply_stats(const SpectralMap& map, const FeatureStats& stats) {
  if (static_cast<std::size_t>(map.values.dim(1)) != stats.mean.size())
    throw ShapeError("apply_stats: bin count mismatch");
  SpectralMap out = map;
  const std::int64_t bins = map.values.dim(1);
  for (std::int64_t t = 0; t < map.frames(); ++t)
    for (std::int64_t f = 0; f < bins; ++f) {
      const auto i = static_cast<std::size_t>(f);
      out.values(t, f) = (map.values(t, f) - stats.mean[i]) / stats.std[i];
    }
  return out;
}

inline void save_features(const std::string& path, const SpectralMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("SEDF", 4);
  binio::write_le<std::uint32_t>(os, 1);
  binio::write_string(os, map.clip_id);
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.frames()));
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.values.dim(1)));
  binio::write_le<double>(os, map.hop_seconds);
  binio::write_le<double>(os, map.duration_seconds);
  for (double v : map.values.data) binio::write_le<double>(os, v);
  if (!os) throw IoError("failed writing " + path);
}

inline SpectralMap load_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  binio::expect_tag(is, "SEDF");
  if (binio::read_le<std::uint32_t>(is) != 1) throw IoError("unsupported feature cache version in " + path);
  SpectralMap map;
  map.clip_id = binio::read_string(is);
  const auto t = binio::read_le<std::uint32_t>(is);
  const auto f = binio::read_le<std::uint32_t>(is);
  map.hop_seconds = binio::read_le<double>(is);
  map.duration_seconds = binio::read_le<double>(is);
  map.n_mels = static_cast<int>(f);
  map.values = Tensor({static_cast<std::int64_t>(t), static_cast<std::int64_t>(f)});
  for (double& v : map.values.data) v = binio::read_le<double>(is);
  return map;
}

inline void save_stats(const std::string& path, const FeatureStats& stats) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("SEDS", 4);
  binio::write_le<std::uint32_t>(os, 1);
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(stats.mean.size()));
  for (double v : stats.mean) binio::write_le<double>(os, v);
  for (double v : stats.std) binio::write_le<double>(os, v);
  if (!os) throw IoError("failed writing " + path);
}

inline FeatureStats load_stats(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  binio::expect_tag(is, "SEDS");
  if (binio::read_le<std::uint32_t>(is) != 1) throw IoError("unsupported stats version in " + path);
  const auto n = binio::read_le<std::uint32_t>(is);
  FeatureStats stats;
  stats.mean.resize(n);
  stats.std.resize(n);
  for (double& v : stats.mean) v = binio::read_le<double>(is);
  for (double& v : stats.std) v = binio::read_le<double>(is);
  return stats;
}

}  // namespace sedkit
