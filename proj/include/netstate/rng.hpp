#pragma once

#include <cmath>
#include <cstdint>

namespace netstate {

// splitmix64 generator. Small, fast, and fully self-contained so that seeded
// runs reproduce bit-identically regardless of the standard library build
// (std::uniform_real_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; strictly positive draws keep multiplicative-update
  // iterates away from absorbing zeros.
  double uniform_pos() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). Lemire multiply-shift; n must be > 0.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via the polar method (the spare draw is discarded so the
  // generator state depends only on the number of calls).
  double normal() {
    for (;;) {
      const double u = uniform(-1.0, 1.0);
      const double v = uniform(-1.0, 1.0);
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

 private:
  std::uint64_t state_;
};

// Stable sub-stream derivation: one master seed governs every stage, each
// stage mixing in its own tag.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  Rng r(master ^ (stream * 0xD1B54A32D192ED03ULL + 0x8BB84B93962EACC9ULL));
  return r.next_u64();
}

}  // namespace netstate
