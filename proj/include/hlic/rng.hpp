#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <random>

namespace hlic {

// Deterministic random source. All draws are derived from mt19937_64 with
// explicit bit manipulation, so streams are reproducible across platforms
// and standard-library versions (std::*_distribution is implementation
// defined and must not be used anywhere in the library).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(angle);
    has_cached_ = true;
    return r * std::cos(angle);
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Deterministically derive an independent child stream.
  Rng fork(uint64_t stream) {
    const uint64_t s = engine_() ^ (0x9e3779b97f4a7c15ull * (stream + 1));
    return Rng(s);
  }

  void save(std::ostream& os) const;
  void load(std::istream& is);

  bool operator==(const Rng& other) const {
    return engine_ == other.engine_ && has_cached_ == other.has_cached_ &&
           cached_ == other.cached_;
  }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace hlic
