#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cpnn {

// Folds a text label into a base seed so that independent random streams
// (generator vs. model init, concept 0 vs. concept 1, ...) can be derived
// from one root seed without overlapping.  FNV-1a over the label, then a
// splitmix64 finalizer to spread the bits.
std::uint64_t mix_seed(std::uint64_t base, std::string_view label);

// mt19937_64 wrapper with a portable uniform double.  The standard
// distributions are implementation-defined, so streams written with them
// would not be reproducible across library versions; the raw engine output
// is pinned by the standard, and the mapping below is our own.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on the open interval (0, 1): (k + 0.5) * 2^-53 with k drawn
  // from the top 53 bits.  Never returns an endpoint, and u < 0.5 has
  // probability exactly one half.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // true or false with equal probability
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cpnn
