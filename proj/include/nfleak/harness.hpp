#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nfleak/deepsets.hpp"
#include "nfleak/estimators.hpp"
#include "nfleak/fisher.hpp"
#include "nfleak/geometry.hpp"
#include "nfleak/leakage.hpp"

namespace nfleak {

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

/// Sensors are placed uniformly in range and angle.
struct SensorRule {
  double d_min = 100.0;
  double d_max = 150.0;
  double theta_min = 0.0;
  double theta_max = std::numbers::pi;
};

/// Simulation scenario; defaults reproduce the LoS reference setup
/// (15 GHz, N = 100 at half-wavelength spacing, UE in [2, 12] m x [pi/6, 5pi/6],
/// sensors at 100-150 m, P_t = 23 dBm).
struct Scenario {
  double carrier_hz = 15e9;
  std::size_t n_elements = 100;
  double spacing = 0.0;  // meters; 0 selects half-wavelength

  double ue_d_min = 2.0;
  double ue_d_max = 12.0;
  double ue_phi_min = std::numbers::pi / 6.0;
  double ue_phi_max = 5.0 * std::numbers::pi / 6.0;

  SensorRule sensors;
  std::size_t k = 40;
  std::size_t l = 50;
  double p_t_dbm = 23.0;
  double sigma2_dbm = -85.0;

  double prior_alpha = 2.0;
  double prior_beta = 2.0;
  PriorCurvatureMode curvature_mode = PriorCurvatureMode::ClosedForm;
  std::optional<double> prior_curvature_override;

  LeakageBackend data_backend = LeakageBackend::Exact;   // simulated measurements
  LeakageBackend model_backend = LeakageBackend::Exact;  // grid-search model vector
  LeakageBackend fim_backend = LeakageBackend::Fresnel;  // gradients inside the bound

  std::uint64_t seed = 1;

  ArrayGeometry geometry() const;
  double wavelength() const;
  double p_t() const { return dbm_to_watts(p_t_dbm); }
  double sigma2() const { return dbm_to_watts(sigma2_dbm); }
  BetaPrior prior() const { return {prior_alpha, prior_beta, ue_d_min, ue_d_max}; }
  LabelBox box() const { return {ue_d_min, ue_d_max, ue_phi_min, ue_phi_max}; }
  double prior_curvature() const;
};

/// Throws std::invalid_argument when the UE range leaves [d_B, d_F/8], a
/// sensor range reaches inside d_F, alpha or beta <= 1, or a count/power is
/// not positive.
void validate(const Scenario& s);

/// Deterministic per seed.
SensorSet sample_sensor_set(const SensorRule& rule, std::size_t k, std::uint64_t seed);

/// One focal point drawn from the prior: d from the scaled Beta, phi uniform.
UeLocation sample_prior_location(const Scenario& s, Rng& rng);

struct BcrlbSweepSpec {
  std::vector<std::size_t> ks{20, 40};
  std::vector<std::size_t> ls{1, 50};
  std::vector<double> sigma2_dbm{-65.0, -70.0, -75.0, -80.0, -85.0};
  std::size_t n_realizations = 1000;
};

struct BcrlbRow {
  std::size_t k = 0;
  std::size_t l = 0;
  double sigma2_dbm = 0.0;
  BcrlbResult result;
  std::uint64_t seed = 0;
};

/// Bound per grid point, averaging the likelihood information over joint
/// draws of a sensor geometry and a prior focal point. Realization r uses the
/// first K sensors of one K_max-sensor draw, so rows share random numbers
/// across K, L and noise level. Rows are ordered by (K, L, sigma2) as given.
std::vector<BcrlbRow> run_bcrlb_sweep(const Scenario& base, const BcrlbSweepSpec& spec);

/// Training profile used when the MSE sweep includes the learned estimator.
struct DeepSetsProfile {
  std::size_t width = 64;
  std::size_t n_train = 5000;
  std::size_t n_val = 1500;
  TrainConfig train;
  bool two_heads = true;

  static DeepSetsProfile reduced();
  static DeepSetsProfile full();
};

struct MseSweepSpec {
  std::vector<std::size_t> ks{20, 40};
  std::vector<std::size_t> ls{1, 50};
  std::vector<double> sigma2_dbm{-65.0, -70.0, -75.0, -80.0, -85.0};
  std::size_t n_sensor_sets = 5;
  std::size_t trials_per_set = 200;
  std::size_t grid_n_d = 100;
  std::size_t grid_n_phi = 180;
  bool grid_search = true;
  bool deepsets = false;
  DeepSetsProfile profile = DeepSetsProfile::reduced();
};

struct SweepRow {
  std::size_t k = 0;
  std::size_t l = 0;
  double sigma2_dbm = 0.0;
  std::string method;
  double mse_d = 0.0;
  double mse_phi = 0.0;
  double bound_d = 0.0;
  double bound_phi = 0.0;
  std::size_t n_trials = 0;
  std::size_t n_failed = 0;
  std::uint64_t seed = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

struct TrialRow {
  std::size_t k = 0;
  std::size_t l = 0;
  double sigma2_dbm = 0.0;
  std::string method;
  std::size_t sensor_set = 0;
  std::size_t trial = 0;  // index within the configuration
  double d_true = 0.0;
  double phi_true = 0.0;
  double d_hat = 0.0;
  double phi_hat = 0.0;
  double objective = 0.0;  // NaN for methods without one
};

/// Monte Carlo MSE of each requested estimator at every (K, L, sigma2), joined
/// with the bound computed from the same sensor sets and focal points.
/// Focal points are drawn from the prior; sensor sets, focal points and noise
/// are shared across (L, sigma2) for a given K. Estimator exceptions count as
/// failed trials.
SweepResult run_mse_sweep(const Scenario& base, const MseSweepSpec& spec,
                          std::vector<TrialRow>* trials = nullptr);

/// Dataset recipe for one sensor set of a scenario.
DatasetSpec dataset_spec(const Scenario& s, const SensorSet& sensors);

}  // namespace nfleak
