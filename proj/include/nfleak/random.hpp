#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nfleak {

/// Name recorded in output metadata so runs can be reproduced elsewhere.
inline constexpr std::string_view kRngAlgorithm =
    "mt19937_64; seeds derived by splitmix64(master, stream, index); "
    "uniform = top 53 bits; normal = Box-Muller";

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent seed for (stream, index) from a master seed. Subsets
/// of trials reproduce without replaying earlier trials.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

/// Seeded generator with platform-independent uniform and normal variates
/// (the std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape);
  /// Beta(a, b) on [0, 1].
  double beta(double a, double b);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace streams {
// Fixed stream identifiers for derive_seed.
inline constexpr std::uint64_t kSensors = 1;
inline constexpr std::uint64_t kUe = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kPrior = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kShuffle = 6;
inline constexpr std::uint64_t kDataset = 7;
}  // namespace streams

}  // namespace nfleak
