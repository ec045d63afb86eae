#include "nfleak/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nfleak::io {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": not a number: '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument(where + ": trailing characters in '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& where) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument(where + ": not an integer: '" + s + "'");
  }
  return v;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, p);
}

std::string bcrlb_csv(std::span<const BcrlbRow> rows) {
  std::ostringstream os;
  os << "K,L,sigma2_dbm,bound_d_m2,bound_phi_rad2,n_prior_samples,seed\n";
  for (const auto& r : rows) {
    os << r.k << ',' << r.l << ',' << format_double(r.sigma2_dbm) << ','
       << format_double(r.result.bound_d) << ',' << format_double(r.result.bound_phi) << ','
       << r.result.n_prior_samples << ',' << r.seed << '\n';
  }
  return os.str();
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "K,L,sigma2_dbm,method,mse_d_m2,mse_phi_rad2,bound_d_m2,bound_phi_rad2,n_trials,seed,"
        "n_failed\n";
  for (const auto& r : result.rows) {
    os << r.k << ',' << r.l << ',' << format_double(r.sigma2_dbm) << ',' << r.method << ','
       << format_double(r.mse_d) << ',' << format_double(r.mse_phi) << ','
       << format_double(r.bound_d) << ',' << format_double(r.bound_phi) << ',' << r.n_trials
       << ',' << r.seed << ',' << r.n_failed << '\n';
  }
  return os.str();
}

std::string trials_csv(std::span<const TrialRow> rows) {
  std::ostringstream os;
  os << "K,L,sigma2_dbm,method,sensor_set,trial,d_true,phi_true,d_hat,phi_hat,objective\n";
  for (const auto& r : rows) {
    os << r.k << ',' << r.l << ',' << format_double(r.sigma2_dbm) << ',' << r.method << ','
       << r.sensor_set << ',' << r.trial << ',' << format_double(r.d_true) << ','
       << format_double(r.phi_true) << ',' << format_double(r.d_hat) << ','
       << format_double(r.phi_hat) << ',' << format_double(r.objective) << '\n';
  }
  return os.str();
}

Measurements parse_measurements_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  Measurements m;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_fields(line);
    if (!header) {
      if (f != std::vector<std::string>{"sensor_id", "d_k_m", "theta_k_rad", "z_mean"}) {
        throw std::invalid_argument(
            "measurements: expected header sensor_id,d_k_m,theta_k_rad,z_mean");
      }
      header = true;
      continue;
    }
    const std::string where = "measurements line " + std::to_string(line_no);
    if (f.size() != 4) throw std::invalid_argument(where + ": expected 4 fields");
    m.sensor_ids.push_back(parse_int(f[0], where));
    m.sensors.push_back({parse_double(f[1], where), parse_double(f[2], where)});
    m.z.push_back(parse_double(f[3], where));
  }
  if (m.z.empty()) throw std::invalid_argument("measurements: no rows");
  return m;
}

Measurements read_measurements_csv(const std::string& path) {
  return parse_measurements_csv(read_file(path));
}

std::string measurements_csv(const Measurements& m) {
  std::ostringstream os;
  os << "sensor_id,d_k_m,theta_k_rad,z_mean\n";
  for (std::size_t i = 0; i < m.z.size(); ++i) {
    os << m.sensor_ids[i] << ',' << format_double(m.sensors[i].d) << ','
       << format_double(m.sensors[i].theta) << ',' << format_double(m.z[i]) << '\n';
  }
  return os.str();
}

nlohmann::json sensors_to_json(const SensorSet& sensors) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : sensors) arr.push_back({{"d", s.d}, {"theta", s.theta}});
  return {{"sensors", arr}};
}

SensorSet sensors_from_json(const nlohmann::json& j) {
  const nlohmann::json& arr = j.is_array() ? j : j.at("sensors");
  if (!arr.is_array() || arr.empty()) throw std::invalid_argument("sensors: expected a nonempty list");
  SensorSet out;
  for (const auto& e : arr) out.push_back({e.at("d").get<double>(), e.at("theta").get<double>()});
  return out;
}

SensorSet read_sensors_json(const std::string& path) {
  try {
    return sensors_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("sensors file " + path + ": " + e.what());
  }
}

std::string sidecar_path(const std::string& path) { return path + ".json"; }

void write_dataset(const std::string& csv_path, const SetDataset& data, const SensorSet& sensors,
                   const nlohmann::json& meta) {
  std::ostringstream os;
  os << "trial,sensor,snapshot,z\n";
  std::vector<double> d;
  std::vector<double> phi;
  std::size_t trial = 0;
  for (const auto* part : {&data.train, &data.val, &data.test}) {
    for (const auto& s : *part) {
      if (s.elements.size() != sensors.size()) {
        throw std::invalid_argument("write_dataset: sample size does not match sensor set");
      }
      for (std::size_t k = 0; k < s.elements.size(); ++k) {
        os << trial << ',' << k << ",-1," << format_double(s.elements[k].z) << '\n';
      }
      d.push_back(s.label.d);
      phi.push_back(s.label.phi);
      ++trial;
    }
  }
  nlohmann::json side = meta;
  side["sensors"] = sensors_to_json(sensors)["sensors"];
  side["splits"] = {{"train", data.train.size()}, {"val", data.val.size()}, {"test", data.test.size()}};
  side["labels"] = {{"d", d}, {"phi", phi}};
  side["statistic"] = "mean_normalized";
  // Sidecar first: a CSV without its sidecar is unreadable anyway.
  write_file_atomic(sidecar_path(csv_path), side.dump(1) + "\n");
  write_file_atomic(csv_path, os.str());
}

DatasetFile read_dataset(const std::string& csv_path) {
  DatasetFile out;
  try {
    out.meta = nlohmann::json::parse(read_file(sidecar_path(csv_path)));
    out.sensors = sensors_from_json(out.meta.at("sensors"));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("dataset sidecar: " + std::string(e.what()));
  }
  const auto& splits = out.meta.at("splits");
  const std::size_t n_train = splits.at("train").get<std::size_t>();
  const std::size_t n_val = splits.at("val").get<std::size_t>();
  const std::size_t n_test = splits.at("test").get<std::size_t>();
  const auto d = out.meta.at("labels").at("d").get<std::vector<double>>();
  const auto phi = out.meta.at("labels").at("phi").get<std::vector<double>>();
  const std::size_t n = n_train + n_val + n_test;
  const std::size_t k = out.sensors.size();
  if (d.size() != n || phi.size() != n) throw std::invalid_argument("dataset: label count mismatch");

  std::vector<SetSample> all(n);
  for (std::size_t t = 0; t < n; ++t) {
    all[t].label = {d[t], phi[t]};
    all[t].elements.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      all[t].elements[i] = {std::nan(""), out.sensors[i].d, out.sensors[i].theta};
    }
  }
  std::istringstream is(read_file(csv_path));
  std::string line;
  std::getline(is, line);
  if (split_fields(line) != std::vector<std::string>{"trial", "sensor", "snapshot", "z"}) {
    throw std::invalid_argument("dataset: expected header trial,sensor,snapshot,z");
  }
  std::size_t line_no = 1;
  std::size_t seen = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    const std::string where = "dataset line " + std::to_string(line_no);
    if (f.size() != 4) throw std::invalid_argument(where + ": expected 4 fields");
    const auto t = parse_int(f[0], where);
    const auto s = parse_int(f[1], where);
    if (parse_int(f[2], where) != -1) continue;  // instantaneous rows are not used here
    if (t < 0 || static_cast<std::size_t>(t) >= n || s < 0 || static_cast<std::size_t>(s) >= k) {
      throw std::invalid_argument(where + ": index out of range");
    }
    all[t].elements[s].z = parse_double(f[3], where);
    ++seen;
  }
  if (seen != n * k) throw std::invalid_argument("dataset: missing mean-statistic rows");
  out.data.train.assign(all.begin(), all.begin() + n_train);
  out.data.val.assign(all.begin() + n_train, all.begin() + n_train + n_val);
  out.data.test.assign(all.begin() + n_train + n_val, all.end());
  return out;
}

}  // namespace nfleak::io
