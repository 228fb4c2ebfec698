#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shrinkdetect/detectors.hpp"
#include "shrinkdetect/montecarlo.hpp"
#include "shrinkdetect/report.hpp"

namespace shrinkdetect {

enum class Scale { desk, full };

std::string to_string(Scale scale);
Scale scale_from_string(const std::string& name);

/// Band width used when judging a reproduced table: 3 se at desk scale, 2 at full.
double k_se_for(Scale scale);

struct ReproduceOptions {
  Scale scale = Scale::desk;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> replications;              // delay runs per cell
  std::optional<std::uint64_t> calibration_replications;  // null runs per ARL evaluation
  double rel_tol = 0.02;
  std::vector<std::string> rows;     // empty: all rows
  std::vector<std::string> columns;  // empty: all columns
  std::optional<std::vector<double>> c_grid;  // grid for the simulated-optimal-c row
  McOptions mc;
};

/// Detector for one named row of a published table. Rows whose c depends on
/// the column (c_oracle, c_opt_sim) take it through `c`.
DetectorSpec table_row_detector(TableId table, const std::string& row, double c = 1.0);

/// Fixed threshold of a row that is not recalibrated (Table 5), else nullopt.
std::optional<double> table_row_threshold(TableId table, const std::string& row);

inline constexpr double kTableTargetArl = 500.0;

/// Runs the selected rows and columns of a table's scenario grid: each row's
/// detector is calibrated to A = 500 (or uses the published threshold for
/// Table 5) and its delay estimated at every selected column.
ExperimentReport reproduce_table(TableId table, const ReproduceOptions& options);

}  // namespace shrinkdetect
