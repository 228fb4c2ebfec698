#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "shrinkdetect/detectors.hpp"

namespace shrinkdetect::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitRuntime = 2,
  kExitComparison = 3,
};

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::invalid_argument(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct GridSpec {
  double start = 0.01;
  double stop = 1.10;
  double step = 0.01;

  /// start, start + step, ... up to stop (inclusive, with rounding slack).
  std::vector<double> values() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct RunConfig {
  DetectorSpec detector;
  std::optional<double> target_arl;
  std::optional<double> fixed_threshold;
  std::vector<MeanVector> scenarios;  // post-change means, change at time 1
  std::uint64_t replications = 500;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> null_cap;
  std::uint64_t delay_cap = 10000;
  double rel_tol = 0.02;
  std::string out_dir = "out";
  GridSpec grid;
  std::vector<double> sweep_thresholds{100.0, 300.0, 500.0};

  /// Checks cross-field consistency. Throws ConfigError.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses a config document. Missing keys keep their defaults; scalar
/// `omega` / `mu_known` values are broadcast to all p streams.
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& config);

RunConfig load_config(const std::string& path);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shrinkdetect::cli
