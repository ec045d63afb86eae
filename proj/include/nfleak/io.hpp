#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfleak/deepsets.hpp"
#include "nfleak/geometry.hpp"
#include "nfleak/harness.hpp"

namespace nfleak::io {

/// Writes to path + ".tmp" and renames over path, so readers never see a
/// partial file.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Shortest round-trip decimal form.
std::string format_double(double x);

std::string bcrlb_csv(std::span<const BcrlbRow> rows);
std::string sweep_csv(const SweepResult& result);
std::string trials_csv(std::span<const TrialRow> rows);

/// Measurement file for single-shot estimation:
/// sensor_id,d_k_m,theta_k_rad,z_mean
struct Measurements {
  std::vector<long long> sensor_ids;
  SensorSet sensors;
  std::vector<double> z;
};
Measurements parse_measurements_csv(const std::string& text);
Measurements read_measurements_csv(const std::string& path);
std::string measurements_csv(const Measurements& m);

nlohmann::json sensors_to_json(const SensorSet& sensors);
/// Accepts {"sensors": [{"d": .., "theta": ..}, ...]} or the bare array.
SensorSet sensors_from_json(const nlohmann::json& j);
SensorSet read_sensors_json(const std::string& path);

/// Training data on disk: a CSV "trial,sensor,snapshot,z" carrying the mean
/// statistic of every (trial, sensor) with snapshot = -1, plus a JSON sidecar
/// with the sensor geometry, labels, split sizes and scenario metadata.
struct DatasetFile {
  SetDataset data;
  SensorSet sensors;
  nlohmann::json meta;
};
void write_dataset(const std::string& csv_path, const SetDataset& data, const SensorSet& sensors,
                   const nlohmann::json& meta);
DatasetFile read_dataset(const std::string& csv_path);

std::string sidecar_path(const std::string& path);

}  // namespace nfleak::io
