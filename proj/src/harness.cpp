#include "nfleak/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "nfleak/observation.hpp"

namespace nfleak {

namespace {

std::uint64_t trial_index(std::size_t set, std::size_t trial) {
  return (static_cast<std::uint64_t>(set) << 32) | static_cast<std::uint64_t>(trial);
}

// Per-sensor quantities that do not depend on the noise level.
struct SensorTerms {
  double beta;
  double gain;
  LeakageGradient grad;
};

std::vector<SensorTerms> sensor_terms(const ArrayGeometry& geom, const UeLocation& psi,
                                      const SensorSet& sensors, LeakageBackend backend) {
  std::vector<SensorTerms> out;
  out.reserve(sensors.size());
  for (const auto& s : sensors) {
    out.push_back({pathloss(s.d, geom.wavelength()), leakage_gain(backend, geom, psi, s.theta),
                   leakage_gradient(backend, geom, psi, s.theta)});
  }
  return out;
}

// Single-snapshot information of one sensor.
Fim2 sensor_fim(const SensorTerms& t, double p_t, double sigma2) {
  const double rho = noncentrality(p_t, t.beta, t.gain, sigma2);
  if (!(rho > 0.0)) return {};
  const double w = std::pow(2.0 * p_t / sigma2, 2) * fisher_info_rho(rho) * t.beta * t.beta;
  return {w * t.grad.d_d * t.grad.d_d, w * t.grad.d_d * t.grad.d_phi,
          w * t.grad.d_phi * t.grad.d_phi};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid scenario: " + what);
}

}  // namespace

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watts_to_dbm(double watts) {
  if (!(watts > 0.0)) throw std::domain_error("watts_to_dbm: power must be positive");
  return 10.0 * std::log10(watts) + 30.0;
}

double Scenario::wavelength() const { return wavelength_from_frequency(carrier_hz); }

ArrayGeometry Scenario::geometry() const {
  const double lambda = wavelength();
  return ArrayGeometry(n_elements, spacing > 0.0 ? spacing : 0.5 * lambda, lambda);
}

double Scenario::prior_curvature() const {
  if (prior_curvature_override) return *prior_curvature_override;
  return nfleak::prior_curvature(prior(), curvature_mode);
}

void validate(const Scenario& s) {
  require(std::isfinite(s.carrier_hz) && s.carrier_hz > 0.0, "carrier frequency must be positive");
  require(s.n_elements >= 2, "array needs at least 2 elements");
  require(s.spacing >= 0.0, "spacing must be positive (or 0 for half-wavelength)");
  require(std::isfinite(s.p_t_dbm), "transmit power must be finite");
  require(std::isfinite(s.sigma2_dbm), "noise power must be finite");
  require(s.k >= 1, "need at least one sensor");
  require(s.l >= 1, "need at least one snapshot");
  const ArrayGeometry geom = s.geometry();
  const double d_b = geom.bjornson_distance();
  const double d_f = geom.rayleigh_distance();
  require(s.ue_d_min < s.ue_d_max, "UE range is empty");
  require(s.ue_d_min >= d_b * (1.0 - 1e-12),
          "UE range starts below the Bjornson distance " + std::to_string(d_b) + " m");
  require(s.ue_d_max <= d_f / 8.0 * (1.0 + 1e-12),
          "UE range ends beyond d_F/8 = " + std::to_string(d_f / 8.0) + " m");
  require(s.ue_phi_min < s.ue_phi_max && s.ue_phi_min > 0.0 && s.ue_phi_max < std::numbers::pi,
          "UE azimuth range must lie inside (0, pi)");
  require(s.sensors.d_min <= s.sensors.d_max, "sensor range is empty");
  require(s.sensors.d_min >= d_f,
          "sensor range starts inside the Rayleigh distance " + std::to_string(d_f) + " m");
  require(s.sensors.theta_min <= s.sensors.theta_max, "sensor angle range is empty");
  require(s.prior_alpha > 1.0 && s.prior_beta > 1.0, "prior alpha and beta must exceed 1");
  if (s.prior_curvature_override) {
    require(*s.prior_curvature_override > 0.0, "prior curvature override must be positive");
  }
}

SensorSet sample_sensor_set(const SensorRule& rule, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw std::domain_error("sample_sensor_set: need at least one sensor");
  Rng rng(seed);
  SensorSet out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double d = rng.uniform(rule.d_min, rule.d_max);
    const double theta = rng.uniform(rule.theta_min, rule.theta_max);
    out.push_back({d, theta});
  }
  return out;
}

UeLocation sample_prior_location(const Scenario& s, Rng& rng) {
  const double d = s.prior().sample(rng);
  const double phi = rng.uniform(s.ue_phi_min, s.ue_phi_max);
  return {d, phi};
}

std::vector<BcrlbRow> run_bcrlb_sweep(const Scenario& base, const BcrlbSweepSpec& spec) {
  validate(base);
  if (spec.ks.empty() || spec.ls.empty() || spec.sigma2_dbm.empty()) {
    throw std::invalid_argument("run_bcrlb_sweep: empty sweep grid");
  }
  if (spec.n_realizations < 1) throw std::invalid_argument("run_bcrlb_sweep: no realizations");
  const ArrayGeometry geom = base.geometry();
  const std::size_t k_max = *std::max_element(spec.ks.begin(), spec.ks.end());
  const double p_t = base.p_t();
  const std::size_t n_sigma = spec.sigma2_dbm.size();

  // acc[ki * n_sigma + si] accumulates the single-snapshot information.
  std::vector<Fim2Accumulator> acc(spec.ks.size() * n_sigma);
  for (std::size_t r = 0; r < spec.n_realizations; ++r) {
    const SensorSet sensors =
        sample_sensor_set(base.sensors, k_max, derive_seed(base.seed, streams::kSensors, r));
    Rng ue_rng(derive_seed(base.seed, streams::kUe, r));
    const UeLocation psi = sample_prior_location(base, ue_rng);
    const auto terms = sensor_terms(geom, psi, sensors, base.fim_backend);
    for (std::size_t si = 0; si < n_sigma; ++si) {
      const double sigma2 = dbm_to_watts(spec.sigma2_dbm[si]);
      std::vector<Fim2> prefix(k_max + 1);
      for (std::size_t k = 0; k < k_max; ++k) {
        prefix[k + 1] = prefix[k];
        prefix[k + 1] += sensor_fim(terms[k], p_t, sigma2);
      }
      for (std::size_t ki = 0; ki < spec.ks.size(); ++ki) {
        acc[ki * n_sigma + si].add(prefix[spec.ks[ki]]);
      }
    }
  }

  const double j_prior = base.prior_curvature();
  std::vector<BcrlbRow> rows;
  for (std::size_t ki = 0; ki < spec.ks.size(); ++ki) {
    for (std::size_t l : spec.ls) {
      for (std::size_t si = 0; si < n_sigma; ++si) {
        BcrlbRow row;
        row.k = spec.ks[ki];
        row.l = l;
        row.sigma2_dbm = spec.sigma2_dbm[si];
        row.seed = base.seed;
        const Fim2 mean = acc[ki * n_sigma + si].mean() * static_cast<double>(l);
        row.result = bcrlb_from_information(mean, j_prior, spec.n_realizations);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

DeepSetsProfile DeepSetsProfile::reduced() {
  DeepSetsProfile p;
  p.width = 64;
  p.n_train = 5000;
  p.n_val = 1500;
  p.train.max_epochs = 150;
  p.train.patience = 20;
  return p;
}

DeepSetsProfile DeepSetsProfile::full() {
  DeepSetsProfile p;
  p.width = 256;
  p.n_train = 35000;
  p.n_val = 15000;
  p.train.max_epochs = 500;
  p.train.patience = 20;
  return p;
}

DatasetSpec dataset_spec(const Scenario& s, const SensorSet& sensors) {
  return {s.geometry(), sensors, s.box(), s.p_t(), s.sigma2(), s.l, s.data_backend};
}

SweepResult run_mse_sweep(const Scenario& base, const MseSweepSpec& spec,
                          std::vector<TrialRow>* trials) {
  validate(base);
  if (!spec.grid_search && !spec.deepsets) {
    throw std::invalid_argument("run_mse_sweep: no estimator selected");
  }
  if (spec.ks.empty() || spec.ls.empty() || spec.sigma2_dbm.empty()) {
    throw std::invalid_argument("run_mse_sweep: empty sweep grid");
  }
  if (spec.n_sensor_sets < 1 || spec.trials_per_set < 1) {
    throw std::invalid_argument("run_mse_sweep: need at least one sensor set and trial");
  }
  const ArrayGeometry geom = base.geometry();
  const double p_t = base.p_t();
  const double j_prior = base.prior_curvature();
  GridSpec grid;
  grid.n_d = spec.grid_n_d;
  grid.n_phi = spec.grid_n_phi;
  grid.d_min = base.ue_d_min;
  grid.d_max = base.ue_d_max;
  grid.phi_min = base.ue_phi_min;
  grid.phi_max = base.ue_phi_max;

  SweepResult result;
  for (std::size_t k : spec.ks) {
    struct SetState {
      SensorSet sensors;
      std::optional<GridModel> model;
      std::vector<UeLocation> psi;
      std::vector<LeakagePattern> patterns;
      std::vector<std::vector<SensorTerms>> terms;
    };
    std::vector<SetState> sets(spec.n_sensor_sets);
    for (std::size_t s = 0; s < spec.n_sensor_sets; ++s) {
      auto& st = sets[s];
      st.sensors = sample_sensor_set(base.sensors, k, derive_seed(base.seed, streams::kSensors, s));
      if (spec.grid_search) st.model.emplace(geom, st.sensors, grid, base.model_backend);
      for (std::size_t t = 0; t < spec.trials_per_set; ++t) {
        Rng rng(derive_seed(base.seed, streams::kUe, trial_index(s, t)));
        const UeLocation psi = sample_prior_location(base, rng);
        st.psi.push_back(psi);
        st.patterns.push_back(leakage_pattern(base.data_backend, geom, psi, st.sensors, p_t));
        st.terms.push_back(sensor_terms(geom, psi, st.sensors, base.fim_backend));
      }
    }

    for (std::size_t l : spec.ls) {
      for (std::size_t si = 0; si < spec.sigma2_dbm.size(); ++si) {
        const double sigma2_dbm = spec.sigma2_dbm[si];
        const double sigma2 = dbm_to_watts(sigma2_dbm);
        const NoiseModel noise{sigma2};

        Fim2Accumulator info;
        std::vector<std::vector<std::vector<double>>> z(spec.n_sensor_sets);
        for (std::size_t s = 0; s < spec.n_sensor_sets; ++s) {
          for (std::size_t t = 0; t < spec.trials_per_set; ++t) {
            z[s].push_back(sample_mean_normalized(
                sets[s].patterns[t], noise, l,
                derive_seed(base.seed, streams::kNoise, trial_index(s, t))));
            Fim2 f;
            for (const auto& term : sets[s].terms[t]) f += sensor_fim(term, p_t, sigma2);
            info.add(f * static_cast<double>(l));
          }
        }
        const BcrlbResult bound = bcrlb_from_information(info.mean(), j_prior, info.count());

        auto make_row = [&](const std::string& method) {
          SweepRow row;
          row.k = k;
          row.l = l;
          row.sigma2_dbm = sigma2_dbm;
          row.method = method;
          row.bound_d = bound.bound_d;
          row.bound_phi = bound.bound_phi;
          row.seed = base.seed;
          return row;
        };
        auto record = [&](SweepRow& row, std::size_t s, std::size_t t, const UeLocation& est,
                          double objective) {
          const auto& truth = sets[s].psi[t];
          row.mse_d += (est.d - truth.d) * (est.d - truth.d);
          row.mse_phi += (est.phi - truth.phi) * (est.phi - truth.phi);
          ++row.n_trials;
          if (trials) {
            trials->push_back({k, l, sigma2_dbm, row.method, s, t, truth.d, truth.phi, est.d,
                               est.phi, objective});
          }
        };
        auto finish = [&](SweepRow& row) {
          if (row.n_trials > 0) {
            row.mse_d /= static_cast<double>(row.n_trials);
            row.mse_phi /= static_cast<double>(row.n_trials);
          } else {
            row.mse_d = row.mse_phi = std::numeric_limits<double>::quiet_NaN();
          }
          result.rows.push_back(row);
        };

        if (spec.grid_search) {
          SweepRow row = make_row("grid_search");
          for (std::size_t s = 0; s < spec.n_sensor_sets; ++s) {
            for (std::size_t t = 0; t < spec.trials_per_set; ++t) {
              try {
                const auto est = sets[s].model->estimate(z[s][t], p_t, sigma2);
                record(row, s, t, est.psi_hat, est.objective);
              } catch (const std::exception&) {
                ++row.n_failed;
              }
            }
          }
          finish(row);
        }

        if (spec.deepsets) {
          SweepRow row = make_row("deepsets");
          for (std::size_t s = 0; s < spec.n_sensor_sets; ++s) {
            Scenario sc = base;
            sc.k = k;
            sc.l = l;
            sc.sigma2_dbm = sigma2_dbm;
            const std::uint64_t config_id = ((k * 1000 + l) * 1000 + si) * 1000 + s;
            const std::uint64_t ds_seed = derive_seed(base.seed, streams::kDataset, config_id);
            std::vector<SetSample> test;
            for (std::size_t t = 0; t < spec.trials_per_set; ++t) {
              SetSample sample{{}, sets[s].psi[t]};
              for (std::size_t i = 0; i < k; ++i) {
                sample.elements.push_back({z[s][t][i], sets[s].sensors[i].d, sets[s].sensors[i].theta});
              }
              test.push_back(std::move(sample));
            }
            try {
              const auto data =
                  make_dataset(dataset_spec(sc, sets[s].sensors), spec.profile.n_train,
                               spec.profile.n_val, 0, ds_seed);
              Architecture arch = Architecture::with_width(spec.profile.width);
              arch.two_heads = spec.profile.two_heads;
              TrainConfig tc = spec.profile.train;
              tc.seed = ds_seed;
              const auto fit = train(data.train, data.val, arch, sc.box(), tc);
              const auto pred = fit.model.predict(test);
              for (std::size_t t = 0; t < spec.trials_per_set; ++t) {
                record(row, s, t, pred[t], std::numeric_limits<double>::quiet_NaN());
              }
            } catch (const std::exception&) {
              row.n_failed += spec.trials_per_set;
            }
          }
          finish(row);
        }
      }
    }
  }
  return result;
}

}  // namespace nfleak
