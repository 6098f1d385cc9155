#ifndef LYAPLAB_RNG_HPP
#define LYAPLAB_RNG_HPP

#include <cstdint>
#include <random>

namespace lyaplab {

// Seedable, portable generator. mt19937_64 is fully specified by the
// standard, so streams are reproducible across platforms; we avoid
// std::uniform_real_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1) with 53 random bits.
  double next_double() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo,hi).
  double next_double(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Replicate r of a base seed; all parallel work derives its stream
  // this way so results do not depend on scheduling.
  static std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t r) {
    return seed ^ r;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace lyaplab

#endif
