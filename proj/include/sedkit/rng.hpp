#pragma once

// Seeded random source with self-contained distributions. The standard
// library only pins down the engines, not the distributions, so uniform,
// normal and beta draws are implemented here to keep sampled values
// identical across compilers.

#include <cmath>
#include <cstdint>
#include <random>

namespace sedkit {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  // Independent stream derived from this generator's seed and a stream id.
  Rng fork(std::uint64_t stream) const {
    return Rng(detail::splitmix64(seed_ ^ (0x632be59bd9b4e019ULL * (stream + 1))));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
  std::int64_t uniform_int(std::int64_t n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return static_cast<std::int64_t>(v % un);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the second draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Beta(a, b) for shape parameters in (0, 1] via Johnk's method.
  double beta(double a, double b) {
    for (;;) {
      const double u = uniform();
      const double v = uniform();
      if (u <= 0.0 || v <= 0.0) continue;
      const double x = std::pow(u, 1.0 / a);
      const double y = std::pow(v, 1.0 / b);
      const double s = x + y;
      if (s <= 1.0 && s > 0.0) return x / s;
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sedkit
