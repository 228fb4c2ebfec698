#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "shrinkdetect/montecarlo.hpp"

namespace shrinkdetect {

enum class TableId { T1, T2, T3, T4, T5 };

std::string to_string(TableId id);
TableId table_id_from_string(const std::string& name);

// ---------------------------------------------------------------------------
// Published reference values

/// One published cell. `se` is absent where the source table prints only a
/// mean; `c_value` holds the shrinkage factor printed in parentheses above
/// the delay in the data-driven-c rows.
struct ReferenceCell {
  std::string row;
  std::string column;
  double mean = 0.0;
  std::optional<double> se;
  std::optional<double> c_value;
};

/// Column of a reference table: a post-change mean vector, plus a short label.
struct ReferenceColumn {
  std::string label;
  MeanVector mu;
};

struct ReferenceTable {
  TableId id = TableId::T1;
  std::string title;
  std::vector<std::string> rows;
  std::vector<ReferenceColumn> columns;
  std::vector<ReferenceCell> cells;

  const ReferenceCell* find(const std::string& row, const std::string& column) const;
  const ReferenceColumn& column(const std::string& label) const;
};

const ReferenceTable& reference_table(TableId id);

/// "(0.41,0.39,0.34)" style label for a mean vector.
std::string mean_label(const MeanVector& mu);

// ---------------------------------------------------------------------------
// Experiment results

struct ReportCell {
  std::string row;
  std::string column;
  McEstimate estimate;
  std::optional<double> threshold;
  std::optional<double> c_value;
};

struct CalibrationRecord {
  std::string row;
  double c = 0.0;
  CalibrationResult result;
};

struct ExperimentReport {
  std::string experiment;
  std::optional<TableId> table;
  std::uint64_t seed = 0;
  std::uint64_t replications = 0;
  std::string artifact_version;
  double wall_seconds = 0.0;
  nlohmann::json scenarios = nlohmann::json::array();
  std::vector<ReportCell> cells;
  std::vector<CalibrationRecord> calibrations;
};

std::string artifact_version();

// ---------------------------------------------------------------------------
// Comparison

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CellVerdict {
  std::string row;
  std::string column;
  double sim_mean = 0.0;
  double sim_se = 0.0;
  double ref_mean = 0.0;
  std::optional<double> ref_se;
  double deviation = 0.0;
  double allowed = 0.0;
  bool pass = false;
};

struct Comparison {
  std::vector<CellVerdict> cells;
  std::size_t passed = 0;
  std::size_t failed = 0;

  bool all_passed() const { return failed == 0; }
};

/// |sim - ref| <= k_se sqrt(se_sim^2 + se_ref^2).
bool within_band(double sim_mean, double sim_se, double ref_mean, double ref_se, double k_se);

/// Compares every report cell against the reference cell with the same row
/// and column. Reference cells without a published se are judged by relative
/// error: |sim - ref| <= rel_tol_without_se * ref. Throws ShapeMismatch when a
/// report cell has no reference counterpart.
Comparison compare_to_reference(const ExperimentReport& report, const ReferenceTable& ref,
                                double k_se = 3.0, double rel_tol_without_se = 0.10);

// ---------------------------------------------------------------------------
// CSV / JSON output

using CsvValue = std::variant<std::string, double, std::uint64_t>;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvValue>> rows;
};

/// Six significant digits.
std::string format_real(double v);

/// Writes UTF-8 CSV with a header row. Fields containing commas or quotes
/// are quoted. Throws std::runtime_error naming the path on I/O failure.
void emit_csv(const CsvTable& table, const std::filesystem::path& path);

/// Reads a file written by emit_csv back as strings.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

/// Columns: row, column, mean, se, sd, replications, censored_fraction,
/// threshold, c.
CsvTable report_csv(const ExperimentReport& report);

/// Columns: c, B, arl_mean, arl_se, delay_mean, delay_se.
CsvTable fixed_sweep_csv(const std::vector<FixedThresholdRow>& rows);

/// Columns: c, B_calibrated, achieved_arl, se.
CsvTable calibration_sweep_csv(const std::vector<CSweepRow>& rows);

inline constexpr const char* kReportSchema = "shrinkdetect.report";
inline constexpr int kReportSchemaVersion = 1;

nlohmann::json report_json(const ExperimentReport& report);
nlohmann::json comparison_json(const Comparison& comparison);
nlohmann::json estimate_json(const McEstimate& e);
nlohmann::json calibration_json(const CalibrationResult& r);

void emit_json(const nlohmann::json& doc, const std::filesystem::path& path);

/// {experiment}_{table_id}_{seed}.{extension}; table_id is "none" when absent.
std::string report_file_name(const std::string& experiment, std::optional<TableId> table,
                             std::uint64_t seed, const std::string& extension);

}  // namespace shrinkdetect
