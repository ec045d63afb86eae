#include "nfleak/estimators.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nfleak {

void GridSpec::validate() const {
  if (n_d < 2 || n_phi < 2) throw std::domain_error("GridSpec: need at least 2 samples per axis");
  if (!(d_min < d_max) || !(phi_min < phi_max)) {
    throw std::domain_error("GridSpec: degenerate search range");
  }
  if (!(d_min > 0.0)) throw std::domain_error("GridSpec: distances must be positive");
}

double GridSpec::d_at(std::size_t i) const {
  return i + 1 == n_d ? d_max : d_min + static_cast<double>(i) * cell_d();
}

double GridSpec::phi_at(std::size_t j) const {
  return j + 1 == n_phi ? phi_max : phi_min + static_cast<double>(j) * cell_phi();
}

std::vector<double> model_vector(const ArrayGeometry& geom, const SensorSet& sensors,
                                 const UeLocation& psi, double p_t, double sigma2,
                                 LeakageBackend backend) {
  if (!(sigma2 > 0.0)) throw std::domain_error("model_vector: sigma2 must be positive");
  std::vector<double> out;
  out.reserve(sensors.size());
  for (const auto& s : sensors) {
    out.push_back(p_t * pathloss(s.d, geom.wavelength()) *
                  leakage_gain(backend, geom, psi, s.theta) / sigma2);
  }
  return out;
}

GridModel::GridModel(const ArrayGeometry& geom, SensorSet sensors, const GridSpec& grid,
                     LeakageBackend backend)
    : grid_(grid), sensors_(std::move(sensors)), backend_(backend) {
  grid_.validate();
  if (sensors_.empty()) throw std::domain_error("GridModel: need at least one sensor");
  const std::size_t k = sensors_.size();
  std::vector<double> beta(k);
  for (std::size_t s = 0; s < k; ++s) beta[s] = pathloss(sensors_[s].d, geom.wavelength());
  table_.resize(grid_.n_d * grid_.n_phi * k);
  for (std::size_t i = 0; i < grid_.n_d; ++i) {
    for (std::size_t j = 0; j < grid_.n_phi; ++j) {
      const UeLocation psi{grid_.d_at(i), grid_.phi_at(j)};
      double* row = &table_[(i * grid_.n_phi + j) * k];
      for (std::size_t s = 0; s < k; ++s) {
        row[s] = beta[s] * leakage_gain(backend_, geom, psi, sensors_[s].theta);
      }
    }
  }
}

double GridModel::objective(std::span<const double> z, double p_t, double sigma2, std::size_t i,
                            std::size_t j) const {
  const std::size_t k = sensors_.size();
  const double scale = p_t / sigma2;
  const double* row = &table_[(i * grid_.n_phi + j) * k];
  double acc = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    const double r = z[s] - scale * row[s];
    acc += r * r;
  }
  return acc;
}

EstimateResult GridModel::estimate(std::span<const double> z, double p_t, double sigma2) const {
  if (z.size() != sensors_.size()) {
    throw std::invalid_argument("GridModel::estimate: measurement count does not match sensors");
  }
  if (!(sigma2 > 0.0)) throw std::domain_error("GridModel::estimate: sigma2 must be positive");
  EstimateResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_.n_d; ++i) {
    for (std::size_t j = 0; j < grid_.n_phi; ++j) {
      const double obj = objective(z, p_t, sigma2, i, j);
      if (obj < best.objective) {
        best.objective = obj;
        best.i = i;
        best.j = j;
      }
    }
  }
  if (!std::isfinite(best.objective)) {
    throw std::domain_error("GridModel::estimate: objective is not finite");
  }
  best.psi_hat = {grid_.d_at(best.i), grid_.phi_at(best.j)};
  return best;
}

EstimateResult grid_search(std::span<const double> z, const GridSpec& grid,
                           const ArrayGeometry& geom, const SensorSet& sensors, double p_t,
                           double sigma2, LeakageBackend backend) {
  if (sensors.empty()) throw std::domain_error("grid_search: need at least one sensor");
  return GridModel(geom, sensors, grid, backend).estimate(z, p_t, sigma2);
}

}  // namespace nfleak
