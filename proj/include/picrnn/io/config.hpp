#pragma once

#include "picrnn/fv_simulator.hpp"
#include "picrnn/network.hpp"
#include "picrnn/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace picrnn::io {

/// Malformed configuration; `pointer` is the JSON pointer of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message), pointer_(pointer) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

/// Everything a case file describes, converted to SI.
struct CaseConfig {
  ReservoirModel model;
  ControlSchedule schedule;
  SolverConfig solver;
  Architecture arch;
  TrainConfig train;
  int extrapolate_steps = 0;
  /// Snapshot times (days) used in error reports.
  std::vector<double> report_days;
  nlohmann::json source;
};

/// Parses a case document. Relative file references resolve against base_dir.
CaseConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
CaseConfig load_config(const std::filesystem::path& path);

/// Reads a "value"/"unit" quantity (or a bare SI number) at `pointer`.
double parse_quantity(const nlohmann::json& node, const std::string& pointer);

TrainConfig parse_train_config(const nlohmann::json& node, const std::string& pointer);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const Architecture& arch);
Architecture parse_architecture(const nlohmann::json& node, const std::string& pointer,
                                Architecture base);

/// Applies PICRNN_SEED if set.
void apply_environment(TrainConfig& cfg);
/// Prefixes a relative output path with PICRNN_OUTPUT_DIR if set.
std::filesystem::path output_path(const std::filesystem::path& path);

}  // namespace picrnn::io
