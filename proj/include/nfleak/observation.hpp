#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "nfleak/leakage.hpp"

namespace nfleak {

/// Receiver noise n ~ CN(0, sigma2).
struct NoiseModel {
  double sigma2;  // watts
};

/// Noncentral chi-square with two degrees of freedom.
struct NoncentralChiSq2 {
  double rho;

  double mean() const { return 2.0 + rho; }
  double variance() const { return 4.0 + 4.0 * rho; }
};

/// One block of K x L power readings.
///
/// inst(k, t) = 2 p_k[t] / sigma2 is distributed as a noncentral chi-square
/// with 2 DoF and noncentrality 2 P_t beta_k g_k / sigma2. The factor 2 is what
/// makes that distributional claim hold for CN(0, sigma2) noise; with
/// p / sigma2 alone the variable is half a chi-square. mean_normalized keeps
/// the sample-mean statistic p_bar / sigma2 - 1, whose expectation is
/// P_t beta_k g_k / sigma2.
struct ObservationBlock {
  std::size_t k = 0;
  std::size_t l = 0;
  std::vector<double> inst;             // row-major, k rows of l snapshots
  std::vector<double> mean_normalized;  // length k
  std::uint64_t seed = 0;

  double at(std::size_t sensor, std::size_t snapshot) const { return inst[sensor * l + snapshot]; }
};

/// rho = 2 p_t beta_k g_k / sigma2. Throws std::domain_error for sigma2 <= 0.
double noncentrality(double p_t, double beta_k, double g_k, double sigma2);

/// Draws L snapshots per sensor. Deterministic given seed. Throws
/// std::domain_error when l < 1 or sigma2 <= 0.
ObservationBlock sample_block(const LeakagePattern& pattern, const NoiseModel& noise,
                              std::size_t l, std::uint64_t seed);

/// Mean statistic only; same random stream and result as
/// sample_block(...).mean_normalized without storing the K x L samples.
std::vector<double> sample_mean_normalized(const LeakagePattern& pattern, const NoiseModel& noise,
                                           std::size_t l, std::uint64_t seed);

/// log f(z; rho) = -log 2 - (rho + z) / 2 + log I0(sqrt(rho z)).
double loglik(double z, const NoncentralChiSq2& dist);

/// d/drho log f(z; rho) = -1/2 + (1/2) sqrt(z / rho) R2(sqrt(rho z)).
/// Undefined at rho = 0 (throws std::domain_error).
double score(double z, const NoncentralChiSq2& dist);

/// Writes rows "trial,sensor,snapshot,z" for the instantaneous samples of each
/// block; blocks[i] is trial i. No header is written.
void write_block_rows(std::ostream& os, std::span<const ObservationBlock> blocks);

}  // namespace nfleak
