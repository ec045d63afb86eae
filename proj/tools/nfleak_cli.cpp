// nfleak: bound sweeps, estimation, dataset generation, training and
// evaluation for power-leakage localization.
//
// Every subcommand reads an optional TOML config (`--config file`, keys under
// a [subcommand] table) with flags taking precedence, and writes its results
// next to a JSON sidecar (<out>.json) and a replayable config (<out>.toml).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfleak/errors.hpp"
#include "nfleak/harness.hpp"
#include "nfleak/io.hpp"
#include "nfleak/observation.hpp"
#include "nfleak/random.hpp"

namespace {

using nlohmann::json;
using namespace nfleak;

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

std::string toml_value(const json& v) {
  if (v.is_array()) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + toml_value(v[i]);
    return s + "]";
  }
  return v.dump();
}

// Options bound to one subcommand, remembered in declaration order so the
// resolved configuration can be written back out.
class Command {
 public:
  Command(CLI::App& app, const std::string& name, const std::string& desc)
      : name_(name), app_(app.add_subcommand(name, desc)) {
    app_->fallthrough();
  }

  CLI::App* app() const { return app_; }
  const std::string& name() const { return name_; }

  template <class T>
  CLI::Option* bind(const std::string& key, T& var, const std::string& desc) {
    emit_.push_back({key, [&var] { return json(var); }});
    return app_->add_option("--" + key, var, desc)->capture_default_str();
  }

  template <class T>
  CLI::Option* bind_list(const std::string& key, std::vector<T>& var, const std::string& desc) {
    emit_.push_back({key, [&var] { return json(var); }});
    return app_->add_option("--" + key, var, desc)->delimiter(',')->capture_default_str();
  }

  CLI::Option* bind_flag(const std::string& key, bool& var, const std::string& desc) {
    emit_.push_back({key, [&var] { return json(var); }});
    return app_->add_flag("--" + key, var, desc);
  }

  json resolved() const {
    json j = json::object();
    for (const auto& [k, f] : emit_) j[k] = f();
    return j;
  }

  std::string toml() const {
    std::string s = "[" + name_ + "]\n";
    for (const auto& [k, f] : emit_) s += k + " = " + toml_value(f()) + "\n";
    return s;
  }

 private:
  std::string name_;
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<json()>>> emit_;
};

// Scenario fields shared by every subcommand, in configuration units.
struct ScenarioOptions {
  Scenario s;
  double carrier_ghz = 15.0;
  std::string curvature = "closed-form";
  double curvature_value = 0.0;
  std::string data_backend = "exact";
  std::string model_backend = "exact";
  std::string fim_backend = "fresnel";

  void bind(Command& c) {
    c.bind("seed", s.seed, "Master seed");
    c.bind("carrier-ghz", carrier_ghz, "Carrier frequency f_c [GHz]");
    c.bind("n-elements", s.n_elements, "Array elements N");
    c.bind("spacing-m", s.spacing, "Element spacing [m]; 0 selects lambda/2");
    c.bind("ue-d-min", s.ue_d_min, "UE range lower limit [m]");
    c.bind("ue-d-max", s.ue_d_max, "UE range upper limit [m]");
    c.bind("ue-phi-min", s.ue_phi_min, "UE azimuth lower limit [rad]");
    c.bind("ue-phi-max", s.ue_phi_max, "UE azimuth upper limit [rad]");
    c.bind("sensor-d-min", s.sensors.d_min, "Sensor range lower limit [m]");
    c.bind("sensor-d-max", s.sensors.d_max, "Sensor range upper limit [m]");
    c.bind("sensor-theta-min", s.sensors.theta_min, "Sensor angle lower limit [rad]");
    c.bind("sensor-theta-max", s.sensors.theta_max, "Sensor angle upper limit [rad]");
    c.bind("pt-dbm", s.p_t_dbm, "Transmit power P_t [dBm]");
    c.bind("alpha", s.prior_alpha, "Beta prior alpha");
    c.bind("beta", s.prior_beta, "Beta prior beta");
    c.bind("prior-curvature", curvature, "closed-form or quadrature")
        ->check(CLI::IsMember({"closed-form", "quadrature"}));
    c.bind("prior-curvature-value", curvature_value,
           "Fixed prior curvature [1/m^2]; 0 derives it from alpha and beta");
    const auto backends = CLI::IsMember({"exact", "fresnel"});
    c.bind("data-backend", data_backend, "Leakage model for simulated data")->check(backends);
    c.bind("model-backend", model_backend, "Leakage model inside grid search")->check(backends);
    c.bind("fim-backend", fim_backend, "Leakage model inside the bound")->check(backends);
  }

  Scenario resolve() const {
    Scenario out = s;
    out.carrier_hz = carrier_ghz * 1e9;
    out.curvature_mode =
        curvature == "quadrature" ? PriorCurvatureMode::Quadrature : PriorCurvatureMode::ClosedForm;
    if (curvature_value < 0.0) throw std::invalid_argument("prior-curvature-value must be >= 0");
    if (curvature_value > 0.0) out.prior_curvature_override = curvature_value;
    out.data_backend = parse_backend(data_backend);
    out.model_backend = parse_backend(model_backend);
    out.fim_backend = parse_backend(fim_backend);
    return out;
  }
};

json rng_metadata(std::uint64_t seed) {
  return {{"master_seed", seed},
          {"algorithm", std::string(kRngAlgorithm)},
          {"derivation", "seed(stream, index) = splitmix64 chain over (master, stream, index)"},
          {"streams",
           {{"sensors", streams::kSensors},
            {"ue", streams::kUe},
            {"noise", streams::kNoise},
            {"prior", streams::kPrior},
            {"init", streams::kInit},
            {"shuffle", streams::kShuffle},
            {"dataset", streams::kDataset}}}};
}

json scenario_metadata(const Scenario& s) {
  const auto geom = s.geometry();
  return {{"carrier_hz", s.carrier_hz},
          {"wavelength_m", geom.wavelength()},
          {"n_elements", geom.n_elements()},
          {"spacing_m", geom.spacing()},
          {"rayleigh_distance_m", geom.rayleigh_distance()},
          {"bjornson_distance_m", geom.bjornson_distance()},
          {"p_t_w", s.p_t()},
          {"prior_curvature", s.prior_curvature()},
          {"data_backend", to_string(s.data_backend)},
          {"model_backend", to_string(s.model_backend)},
          {"fim_backend", to_string(s.fim_backend)}};
}

// Sidecar and replay config go first; the primary output is written last so
// its presence implies a complete run.
void write_metadata(const Command& c, const Scenario& s, const std::string& out,
                    json extra = json::object()) {
  json side = {{"command", c.name()},
               {"config", c.resolved()},
               {"rng", rng_metadata(s.seed)},
               {"scenario", scenario_metadata(s)},
               {"output", out}};
  for (auto& [k, v] : extra.items()) side[k] = v;
  io::write_file_atomic(io::sidecar_path(out), side.dump(2) + "\n");
  io::write_file_atomic(out + ".toml", c.toml());
}

void write_outputs(const Command& c, const Scenario& s, const std::string& out,
                   const std::string& content, json extra = json::object()) {
  write_metadata(c, s, out, std::move(extra));
  io::write_file_atomic(out, content);
}

void require_nonempty(const std::string& value, const std::string& flag) {
  if (value.empty()) throw std::invalid_argument("--" + flag + " is required");
}

SensorSet scenario_sensors(const Scenario& s, std::size_t k, std::size_t set_index,
                           const std::string& sensors_path) {
  if (!sensors_path.empty()) {
    SensorSet loaded = io::read_sensors_json(sensors_path);
    if (k != 0 && loaded.size() != k) {
      throw std::invalid_argument("sensor file has " + std::to_string(loaded.size()) +
                                  " sensors but K = " + std::to_string(k));
    }
    return loaded;
  }
  return sample_sensor_set(s.sensors, k, derive_seed(s.seed, streams::kSensors, set_index));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field leakage localization toolkit"};
  app.set_config("--config", "", "TOML config; keys live under a [subcommand] table");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  // bcrlb
  Command bcrlb_cmd(app, "bcrlb", "Bayesian CRLB sweep over K, L and noise power");
  ScenarioOptions bcrlb_sc;
  BcrlbSweepSpec bcrlb_spec;
  bcrlb_spec.ks = {20, 40};
  std::string bcrlb_out = "bcrlb.csv";
  bcrlb_sc.bind(bcrlb_cmd);
  bcrlb_cmd.bind_list("K", bcrlb_spec.ks, "Sensor counts");
  bcrlb_cmd.bind_list("L", bcrlb_spec.ls, "Snapshot counts");
  bcrlb_cmd.bind_list("sigma2-dbm", bcrlb_spec.sigma2_dbm, "Noise powers [dBm]");
  bcrlb_cmd.bind("realizations", bcrlb_spec.n_realizations, "Geometry and prior draws");
  bcrlb_cmd.bind("out", bcrlb_out, "Output CSV");

  // estimate
  Command est_cmd(app, "estimate", "Grid-search estimate from one measurement file");
  ScenarioOptions est_sc;
  std::string est_meas;
  std::string est_sensors;
  std::string est_out;
  double est_sigma2 = -85.0;
  std::size_t est_nd = 100;
  std::size_t est_nphi = 180;
  est_sc.bind(est_cmd);
  est_cmd.bind("measurements", est_meas, "CSV sensor_id,d_k_m,theta_k_rad,z_mean");
  est_cmd.bind("sensors", est_sensors, "Sensor JSON; sensor_id indexes its list");
  est_cmd.bind("sigma2-dbm", est_sigma2, "Noise power [dBm]");
  est_cmd.bind("grid-nd", est_nd, "Distance samples");
  est_cmd.bind("grid-nphi", est_nphi, "Angle samples");
  est_cmd.bind("out", est_out, "Optional output CSV; the estimate is always printed");

  // dataset
  Command ds_cmd(app, "dataset", "Simulate a training set for one sensor geometry");
  ScenarioOptions ds_sc;
  std::size_t ds_k = 40;
  std::size_t ds_l = 50;
  double ds_sigma2 = -85.0;
  std::size_t ds_ntrain = 35000;
  std::size_t ds_nval = 15000;
  std::size_t ds_ntest = 1000;
  std::size_t ds_set = 0;
  std::string ds_sensors;
  std::string ds_out = "dataset.csv";
  ds_sc.bind(ds_cmd);
  ds_cmd.bind("K", ds_k, "Sensors");
  ds_cmd.bind("L", ds_l, "Snapshots");
  ds_cmd.bind("sigma2-dbm", ds_sigma2, "Noise power [dBm]");
  ds_cmd.bind("n-train", ds_ntrain, "Training samples");
  ds_cmd.bind("n-val", ds_nval, "Validation samples");
  ds_cmd.bind("n-test", ds_ntest, "Test samples");
  ds_cmd.bind("sensor-set", ds_set, "Index of the sampled sensor geometry");
  ds_cmd.bind("sensors", ds_sensors, "Sensor JSON overriding the sampled geometry");
  ds_cmd.bind("out", ds_out, "Output CSV");

  // train
  Command tr_cmd(app, "train", "Fit a DeepSets model to a dataset file");
  ScenarioOptions tr_sc;
  std::string tr_data;
  std::string tr_out = "model.json";
  std::size_t tr_width = 256;
  bool tr_single = false;
  TrainConfig tr_cfg;
  tr_sc.bind(tr_cmd);
  tr_cmd.bind("data", tr_data, "Dataset CSV (with its .json sidecar)");
  tr_cmd.bind("width", tr_width, "Encoder width");
  tr_cmd.bind_flag("single-head", tr_single, "One 2-output decoder instead of two heads");
  tr_cmd.bind("lr", tr_cfg.learning_rate, "Adam learning rate");
  tr_cmd.bind("batch-size", tr_cfg.batch_size, "Minibatch size");
  tr_cmd.bind("max-epochs", tr_cfg.max_epochs, "Epoch limit");
  tr_cmd.bind("patience", tr_cfg.patience, "Early stopping patience");
  tr_cmd.bind("out", tr_out, "Checkpoint path");

  // evaluate
  Command ev_cmd(app, "evaluate", "Monte Carlo MSE sweep joined with the bound");
  ScenarioOptions ev_sc;
  MseSweepSpec ev_spec;
  std::vector<std::string> ev_methods{"grid_search"};
  std::string ev_profile = "reduced";
  std::size_t ev_width = 0;
  std::size_t ev_epochs = 0;
  std::size_t ev_ntrain = 0;
  std::size_t ev_nval = 0;
  bool ev_single = false;
  std::string ev_out = "sweep.csv";
  std::string ev_trials_out;
  ev_sc.bind(ev_cmd);
  ev_cmd.bind_list("K", ev_spec.ks, "Sensor counts");
  ev_cmd.bind_list("L", ev_spec.ls, "Snapshot counts");
  ev_cmd.bind_list("sigma2-dbm", ev_spec.sigma2_dbm, "Noise powers [dBm]");
  ev_cmd.bind("sensor-sets", ev_spec.n_sensor_sets, "Independent sensor geometries per K");
  ev_cmd.bind("trials", ev_spec.trials_per_set, "Trials per sensor geometry");
  ev_cmd.bind("grid-nd", ev_spec.grid_n_d, "Distance samples");
  ev_cmd.bind("grid-nphi", ev_spec.grid_n_phi, "Angle samples");
  ev_cmd.bind_list("methods", ev_methods, "grid_search and/or deepsets")
      ->check(CLI::IsMember({"grid_search", "deepsets"}));
  ev_cmd.bind("profile", ev_profile, "DeepSets profile: reduced or full")
      ->check(CLI::IsMember({"reduced", "full"}));
  ev_cmd.bind("width", ev_width, "Override profile width (0 keeps it)");
  ev_cmd.bind("max-epochs", ev_epochs, "Override profile epoch limit (0 keeps it)");
  ev_cmd.bind("n-train", ev_ntrain, "Override profile training size (0 keeps it)");
  ev_cmd.bind("n-val", ev_nval, "Override profile validation size (0 keeps it)");
  ev_cmd.bind_flag("single-head", ev_single, "One 2-output decoder instead of two heads");
  ev_cmd.bind("out", ev_out, "Output CSV");
  ev_cmd.bind("trials-out", ev_trials_out, "Optional per-trial CSV");

  // leakmap
  Command lm_cmd(app, "leakmap", "Leakage g(theta) for one focal point, both backends");
  ScenarioOptions lm_sc;
  double lm_d = 6.0;
  double lm_phi = 1.0471975511965976;
  std::size_t lm_points = 1801;
  double lm_theta_min = 0.0;
  double lm_theta_max = 3.141592653589793;
  std::string lm_out = "leakmap.csv";
  lm_sc.bind(lm_cmd);
  lm_cmd.bind("d", lm_d, "Focal distance [m]");
  lm_cmd.bind("phi", lm_phi, "Focal azimuth [rad]");
  lm_cmd.bind("points", lm_points, "Samples in theta (inclusive endpoints)");
  lm_cmd.bind("theta-min", lm_theta_min, "First angle [rad]");
  lm_cmd.bind("theta-max", lm_theta_max, "Last angle [rad]");
  lm_cmd.bind("out", lm_out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (bcrlb_cmd.app()->parsed()) {
      const Scenario s = bcrlb_sc.resolve();
      const auto rows = run_bcrlb_sweep(s, bcrlb_spec);
      write_outputs(bcrlb_cmd, s, bcrlb_out, io::bcrlb_csv(rows),
                    {{"prior_curvature_inverse_m2", 1.0 / s.prior_curvature()}});
    } else if (est_cmd.app()->parsed()) {
      require_nonempty(est_meas, "measurements");
      Scenario s = est_sc.resolve();
      s.sigma2_dbm = est_sigma2;
      validate(s);
      io::Measurements m = io::read_measurements_csv(est_meas);
      SensorSet sensors = m.sensors;
      if (!est_sensors.empty()) {
        const SensorSet listed = io::read_sensors_json(est_sensors);
        for (std::size_t i = 0; i < m.z.size(); ++i) {
          const auto id = m.sensor_ids[i];
          if (id < 0 || static_cast<std::size_t>(id) >= listed.size()) {
            throw std::invalid_argument("sensor_id " + std::to_string(id) +
                                        " not in the sensor file");
          }
          const auto& ref = listed[id];
          if (std::abs(ref.d - m.sensors[i].d) > 1e-9 ||
              std::abs(ref.theta - m.sensors[i].theta) > 1e-9) {
            throw std::invalid_argument("sensor_id " + std::to_string(id) +
                                        " disagrees with the sensor file");
          }
          sensors[i] = ref;
        }
      }
      GridSpec grid;
      grid.n_d = est_nd;
      grid.n_phi = est_nphi;
      grid.d_min = s.ue_d_min;
      grid.d_max = s.ue_d_max;
      grid.phi_min = s.ue_phi_min;
      grid.phi_max = s.ue_phi_max;
      const auto r = grid_search(m.z, grid, s.geometry(), sensors, s.p_t(), s.sigma2(),
                                 s.model_backend);
      std::cout << io::format_double(r.psi_hat.d) << ' ' << io::format_double(r.psi_hat.phi)
                << '\n';
      if (!est_out.empty()) {
        const std::string csv = "d_hat_m,phi_hat_rad,objective,i,j\n" +
                                io::format_double(r.psi_hat.d) + ',' +
                                io::format_double(r.psi_hat.phi) + ',' +
                                io::format_double(r.objective) + ',' + std::to_string(r.i) + ',' +
                                std::to_string(r.j) + '\n';
        write_outputs(est_cmd, s, est_out, csv);
      }
    } else if (ds_cmd.app()->parsed()) {
      Scenario s = ds_sc.resolve();
      s.k = ds_k;
      s.l = ds_l;
      s.sigma2_dbm = ds_sigma2;
      validate(s);
      const SensorSet sensors = scenario_sensors(s, ds_k, ds_set, ds_sensors);
      const std::uint64_t seed = derive_seed(s.seed, streams::kDataset, ds_set);
      const auto data = make_dataset(dataset_spec(s, sensors), ds_ntrain, ds_nval, ds_ntest, seed);
      json meta = {{"command", "dataset"},
                   {"config", ds_cmd.resolved()},
                   {"rng", rng_metadata(s.seed)},
                   {"dataset_seed", seed},
                   {"scenario", scenario_metadata(s)},
                   {"box", {s.ue_d_min, s.ue_d_max, s.ue_phi_min, s.ue_phi_max}},
                   {"K", ds_k},
                   {"L", ds_l},
                   {"sigma2_dbm", ds_sigma2}};
      io::write_file_atomic(ds_out + ".toml", ds_cmd.toml());
      io::write_dataset(ds_out, data, sensors, meta);
    } else if (tr_cmd.app()->parsed()) {
      require_nonempty(tr_data, "data");
      const Scenario s = tr_sc.resolve();
      const auto file = io::read_dataset(tr_data);
      const auto& box_j = file.meta.at("box");
      const LabelBox box{box_j[0].get<double>(), box_j[1].get<double>(), box_j[2].get<double>(),
                         box_j[3].get<double>()};
      Architecture arch = Architecture::with_width(tr_width);
      arch.two_heads = !tr_single;
      TrainConfig cfg = tr_cfg;
      cfg.seed = s.seed;
      const auto fit = train(file.data.train, file.data.val, arch, box, cfg);
      std::ostringstream hist;
      hist << "epoch,train_loss,val_loss\n";
      for (std::size_t e = 0; e < fit.history.train_loss.size(); ++e) {
        hist << e << ',' << io::format_double(fit.history.train_loss[e]) << ','
             << io::format_double(fit.history.val_loss[e]) << '\n';
      }
      json extra = {{"history", tr_out + ".history.csv"},
                    {"best_epoch", fit.history.best_epoch},
                    {"best_val_loss", fit.history.best_val_loss},
                    {"stopped_early", fit.history.stopped_early}};
      if (!file.data.test.empty()) {
        const auto mse = evaluate_mse(fit.model, file.data.test);
        extra["test_mse_d_m2"] = mse.d;
        extra["test_mse_phi_rad2"] = mse.phi;
      }
      io::write_file_atomic(tr_out + ".history.csv", hist.str());
      write_metadata(tr_cmd, s, tr_out, extra);
      save_checkpoint(fit.model, tr_out);
    } else if (ev_cmd.app()->parsed()) {
      const Scenario s = ev_sc.resolve();
      MseSweepSpec spec = ev_spec;
      spec.grid_search = false;
      spec.deepsets = false;
      for (const auto& m : ev_methods) {
        (m == "deepsets" ? spec.deepsets : spec.grid_search) = true;
      }
      spec.profile = ev_profile == "full" ? DeepSetsProfile::full() : DeepSetsProfile::reduced();
      if (ev_width) spec.profile.width = ev_width;
      if (ev_epochs) spec.profile.train.max_epochs = ev_epochs;
      if (ev_ntrain) spec.profile.n_train = ev_ntrain;
      if (ev_nval) spec.profile.n_val = ev_nval;
      spec.profile.two_heads = !ev_single;
      std::vector<TrialRow> trials;
      const auto result = run_mse_sweep(s, spec, ev_trials_out.empty() ? nullptr : &trials);
      if (!ev_trials_out.empty()) io::write_file_atomic(ev_trials_out, io::trials_csv(trials));
      write_outputs(ev_cmd, s, ev_out, io::sweep_csv(result),
                    {{"deepsets_profile",
                      {{"width", spec.profile.width},
                       {"n_train", spec.profile.n_train},
                       {"n_val", spec.profile.n_val},
                       {"max_epochs", spec.profile.train.max_epochs},
                       {"patience", spec.profile.train.patience},
                       {"two_heads", spec.profile.two_heads}}}});
    } else if (lm_cmd.app()->parsed()) {
      const Scenario s = lm_sc.resolve();
      validate(s);
      if (lm_points < 2) throw std::invalid_argument("--points must be at least 2");
      const auto geom = s.geometry();
      const UeLocation ue{lm_d, lm_phi};
      std::ostringstream os;
      os << "theta_rad,g_exact,g_fresnel\n";
      for (std::size_t i = 0; i < lm_points; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(lm_points - 1);
        const double theta = lm_theta_min + t * (lm_theta_max - lm_theta_min);
        os << io::format_double(theta) << ','
           << io::format_double(leakage_gain(LeakageBackend::Exact, geom, ue, theta)) << ','
           << io::format_double(leakage_gain(LeakageBackend::Fresnel, geom, ue, theta)) << '\n';
      }
      write_outputs(lm_cmd, s, lm_out, os.str());
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return 0;
}
