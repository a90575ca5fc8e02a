#pragma once

#include <cmath>
#include <cstdint>

namespace terravolt {

// Seeded counter-based generator (splitmix64). Hand-rolled so that streams
// are bit-reproducible across platforms and standard-library versions; the
// distributions in <random> carry no such guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  // Standard normal via Box-Muller; the spare of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent stream seed from a master seed and a stream index.
// Used by parallel workloads so each task gets its own generator and results
// do not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  Rng mix(master + stream * 0x9e3779b97f4a7c15ULL);
  return mix.next_u64();
}

}  // namespace terravolt
