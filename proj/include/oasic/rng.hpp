#pragma once

#include <cstdint>
#include <string_view>

namespace oasic {

/// SplitMix64 generator. Every stochastic step in the library draws from
/// this so results are bit-identical across platforms and standard
/// libraries (std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 bits of resolution.
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

/// Child seed for a named stage: mix64(master ^ fnv1a(stage)).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

/// Child seed for the index-th item of a stage.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

}  // namespace oasic
