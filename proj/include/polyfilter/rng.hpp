#pragma once

// Seeded, splittable 64-bit generator. Every sampler in the library takes an
// explicit seed, so independent trials (and threads) get disjoint streams.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace polyfilter {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// splitmix64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return detail::mix64(state_);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1]
  double next_double_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // uniform in [lo, hi)
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // standard normal, Box-Muller; the second deviate of each pair is cached
  double next_gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = next_double_pos();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // -1.0 or +1.0
  double next_sign() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  // uniform index in [0, n)
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Derives an independent stream id from (seed, purpose, index). Purpose tags
// keep the generation / contamination / reference / evaluation draws of one
// trial decorrelated.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t purpose,
                                   std::uint64_t index = 0) {
  std::uint64_t h = detail::mix64(seed + 0x9e3779b97f4a7c15ULL);
  h = detail::mix64(h ^ (purpose * 0xd6e8feb86659fd93ULL));
  h = detail::mix64(h ^ (index * 0xa3b195354a39b70dULL));
  return h;
}

namespace stream {
inline constexpr std::uint64_t kGenerate = 1;
inline constexpr std::uint64_t kContaminate = 2;
inline constexpr std::uint64_t kReference = 3;
inline constexpr std::uint64_t kEvaluate = 4;
inline constexpr std::uint64_t kProbe = 5;
}  // namespace stream

}  // namespace polyfilter
