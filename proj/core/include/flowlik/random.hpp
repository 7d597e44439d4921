#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "flowlik/types.hpp"

namespace flowlik {

/// Portable pseudorandom stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The transforms to doubles are implemented here rather than taken
/// from <random>, because the standard distributions are implementation-defined:
///   uniform()  = (next_u64() >> 11) * 2^-53, in [0, 1)
///   normal()   = Marsaglia polar method, spare value cached
///   below(n)   = rejection sampling on the top of the 64-bit range
/// Substreams are derived by mixing (seed, index) through splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for item `index` of a run seeded with `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double rademacher() { return (next_u64() >> 63) != 0 ? 1.0 : -1.0; }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t below(std::uint64_t n);

  Vector normal_vector(Index n);
  Vector rademacher_vector(Index n);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace flowlik
