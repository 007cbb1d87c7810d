#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ffsv {

// Deterministic random source. std::mt19937_64 has a fixed sequence, but the
// standard distributions do not, so the mappings to doubles live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  // Box-Muller; draws two uniforms per call so the stream stays aligned.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t fork_seed() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ffsv
