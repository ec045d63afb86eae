#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nfleak/geometry.hpp"
#include "nfleak/leakage.hpp"

namespace nfleak {

/// Uniform lattice over (d, phi) with inclusive endpoints on both axes.
struct GridSpec {
  std::size_t n_d = 100;
  std::size_t n_phi = 180;
  double d_min = 2.0;
  double d_max = 12.0;
  double phi_min = 0.0;
  double phi_max = 0.0;

  /// Throws std::domain_error for fewer than 2 samples per axis or a
  /// degenerate range.
  void validate() const;
  double d_at(std::size_t i) const;
  double phi_at(std::size_t j) const;
  double cell_d() const { return (d_max - d_min) / static_cast<double>(n_d - 1); }
  double cell_phi() const { return (phi_max - phi_min) / static_cast<double>(n_phi - 1); }
};

struct EstimateResult {
  UeLocation psi_hat;
  double objective = 0.0;  // residual sum of squares
  std::size_t i = 0;       // distance index
  std::size_t j = 0;       // angle index
};

/// (P_t beta_k g_k(psi) / sigma2)_k, the expectation of mean_normalized.
std::vector<double> model_vector(const ArrayGeometry& geom, const SensorSet& sensors,
                                 const UeLocation& psi, double p_t, double sigma2,
                                 LeakageBackend backend);

/// Precomputed beta_k g_k(psi) over every lattice point for one sensor set, so
/// repeated estimates at any (P_t, sigma2) cost O(grid * K).
class GridModel {
 public:
  GridModel(const ArrayGeometry& geom, SensorSet sensors, const GridSpec& grid,
            LeakageBackend backend);

  /// Least-squares lattice fit. Ties resolve to the smallest (i, j).
  /// Throws std::invalid_argument when z.size() differs from the sensor count.
  EstimateResult estimate(std::span<const double> z, double p_t, double sigma2) const;

  /// ||z - model(i, j)||^2.
  double objective(std::span<const double> z, double p_t, double sigma2, std::size_t i,
                   std::size_t j) const;

  const GridSpec& grid() const { return grid_; }
  const SensorSet& sensors() const { return sensors_; }
  LeakageBackend backend() const { return backend_; }

 private:
  GridSpec grid_;
  SensorSet sensors_;
  LeakageBackend backend_;
  std::vector<double> table_;  // [(i * n_phi + j) * K + k] = beta_k g_k
};

EstimateResult grid_search(std::span<const double> z, const GridSpec& grid,
                           const ArrayGeometry& geom, const SensorSet& sensors, double p_t,
                           double sigma2, LeakageBackend backend);

}  // namespace nfleak
