#include "shrinkdetect/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "shrinkdetect/serialization.hpp"

namespace shrinkdetect {

namespace {

constexpr double kGaussianOmega = 0.25;
constexpr double kPoissonOmega = 1.25;

bool selected(const std::vector<std::string>& filter, const std::string& name) {
  return filter.empty() || std::find(filter.begin(), filter.end(), name) != filter.end();
}

std::optional<double> parse_c_row(const std::string& row) {
  if (row.rfind("c=", 0) != 0) return std::nullopt;
  std::size_t used = 0;
  const double c = std::stod(row.substr(2), &used);
  if (used != row.size() - 2) throw std::invalid_argument("bad row label '" + row + "'");
  return c;
}

DetectorSpec srrs(ModelSpec model, EstimatorRule rule) {
  DetectorSpec s;
  s.kind = DetectorKind::srrs;
  s.model = std::move(model);
  s.rule = std::move(rule);
  return s;
}

std::vector<double> desk_c_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 22; ++i) grid.push_back(0.05 * i);
  return grid;
}

void note(const McOptions& mc, const std::string& line) {
  if (mc.progress) mc.progress(line);
}

}  // namespace

std::string to_string(Scale scale) { return scale == Scale::desk ? "desk" : "full"; }

Scale scale_from_string(const std::string& name) {
  if (name == "desk") return Scale::desk;
  if (name == "full") return Scale::full;
  throw std::invalid_argument("unknown scale '" + name + "' (expected desk or full)");
}

double k_se_for(Scale scale) { return scale == Scale::desk ? 3.0 : 2.0; }

DetectorSpec table_row_detector(TableId table, const std::string& row, double c) {
  const ModelSpec gauss = ModelSpec::gaussian(3);
  const ModelSpec pois = ModelSpec::poisson(1.0, 3);
  const MeanVector omega_g(3, kGaussianOmega);
  const MeanVector omega_p(3, kPoissonOmega);
  const auto unknown = [&] {
    return std::invalid_argument(to_string(table) + " has no row '" + row + "'");
  };

  switch (table) {
    case TableId::T1:
      if (auto fixed = parse_c_row(row)) return srrs(gauss, EstimatorRule::linear_shrink(*fixed, omega_g));
      if (row == "c_oracle" || row == "c_opt_sim") return srrs(gauss, EstimatorRule::linear_shrink(c, omega_g));
      if (row == "c_js") return srrs(gauss, EstimatorRule::js_adaptive(omega_g));
      throw unknown();
    case TableId::T2:
      if (row == "baseline") return srrs(gauss, EstimatorRule::mle());
      if (row == "soft") return srrs(gauss, EstimatorRule::soft_threshold(omega_g));
      if (row == "hard") return srrs(gauss, EstimatorRule::hard_threshold(omega_g));
      throw unknown();
    case TableId::T3:
      if (row == "baseline") return srrs(pois, EstimatorRule::mle());
      if (auto fixed = parse_c_row(row)) return srrs(pois, EstimatorRule::linear_shrink(*fixed, omega_p));
      throw unknown();
    case TableId::T4:
      if (row == "baseline") return srrs(pois, EstimatorRule::mle());
      if (row == "hard") return srrs(pois, EstimatorRule::hard_threshold(omega_p));
      throw unknown();
    case TableId::T5: {
      DetectorSpec s;
      s.model = ModelSpec::gaussian(100);
      if (row == "T_B") {
        s.kind = DetectorKind::recursive;
        s.rule = EstimatorRule::ewma(0.9, MeanVector(100, kGaussianOmega));
        return s;
      }
      if (row == "N_max" || row == "N_sum") {
        s.kind = row == "N_max" ? DetectorKind::cusum_max : DetectorKind::cusum_sum;
        s.mu_known = MeanVector(100, 0.5);
        return s;
      }
      throw unknown();
    }
  }
  throw unknown();
}

std::optional<double> table_row_threshold(TableId table, const std::string& row) {
  if (table != TableId::T5) return std::nullopt;
  if (row == "T_B") return 3190.1;
  if (row == "N_max") return 11.2;
  if (row == "N_sum") return 111.3;
  throw std::invalid_argument("T5 has no row '" + row + "'");
}

ExperimentReport reproduce_table(TableId table, const ReproduceOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const ReferenceTable& ref = reference_table(table);

  for (const std::string& r : options.rows) {
    if (std::find(ref.rows.begin(), ref.rows.end(), r) == ref.rows.end()) {
      throw std::invalid_argument(to_string(table) + " has no row '" + r + "'");
    }
  }
  for (const std::string& c : options.columns) ref.column(c);

  const bool desk = options.scale == Scale::desk;
  const std::uint64_t default_reps = table == TableId::T5 ? (desk ? 250 : 2500) : (desk ? 500 : 2500);
  const std::uint64_t reps = options.replications.value_or(default_reps);

  CalibrationOptions cal;
  cal.rel_tol = options.rel_tol;
  cal.replications = options.calibration_replications.value_or(desk ? 500 : 2500);
  cal.seed = options.seed;
  cal.mc = options.mc;
  const std::uint64_t delay_seed = options.seed + 1;

  ExperimentReport report;
  report.experiment = "reproduce";
  report.table = table;
  report.seed = options.seed;
  report.replications = reps;
  report.artifact_version = artifact_version();

  auto add_cell = [&](const std::string& row, const ReferenceColumn& col, const DetectorSpec& spec,
                      double threshold, std::optional<double> c_value) {
    ReportCell cell;
    cell.row = row;
    cell.column = col.label;
    cell.threshold = threshold;
    cell.c_value = c_value;
    cell.estimate =
        estimate_delay(spec, threshold, col.mu, reps, delay_seed, kDefaultDelayCap, options.mc);
    std::ostringstream line;
    line << to_string(table) << " " << row << " " << col.label << ": " << cell.estimate.mean
         << " +- " << cell.estimate.std_error;
    note(options.mc, line.str());
    report.scenarios.push_back({{"row", row},
                                {"column", col.label},
                                {"detector", spec},
                                {"threshold", threshold},
                                {"mu_post", col.mu}});
    report.cells.push_back(std::move(cell));
  };

  auto calibrate = [&](const std::string& row, const DetectorSpec& spec, double c) {
    note(options.mc, to_string(table) + " " + row + ": calibrating");
    CalibrationResult r = calibrate_threshold(spec, kTableTargetArl, cal);
    report.calibrations.push_back({row, c, r});
    return r.threshold_b;
  };

  for (const std::string& row : ref.rows) {
    if (!selected(options.rows, row)) continue;
    std::vector<const ReferenceColumn*> cols;
    for (const ReferenceColumn& col : ref.columns) {
      if (selected(options.columns, col.label)) cols.push_back(&col);
    }
    if (cols.empty()) continue;

    if (table == TableId::T1 && (row == "c_oracle" || row == "c_opt_sim")) {
      for (const ReferenceColumn* col : cols) {
        const MeanVector omega(3, kGaussianOmega);
        if (row == "c_oracle") {
          const double c = oracle_c_theoretical(col->mu, omega, kTableTargetArl, 3);
          const DetectorSpec spec = table_row_detector(table, row, c);
          add_cell(row, *col, spec, calibrate(row, spec, c), c);
        } else {
          const std::vector<double> grid =
              options.c_grid ? *options.c_grid : (desk ? desk_c_grid() : default_c_grid());
          const OptimalCResult best = optimal_c_simulation(table_row_detector(table, row, 1.0),
                                                           kTableTargetArl, col->mu, grid, reps, cal);
          for (const CSweepRow& r : best.table) report.calibrations.push_back({row, r.c, r.calibration});
          const DetectorSpec spec = table_row_detector(table, row, best.c_opt);
          const auto chosen = std::find_if(best.table.begin(), best.table.end(),
                                           [&](const CSweepRow& r) { return r.c == best.c_opt; });
          add_cell(row, *col, spec, chosen->calibration.threshold_b, best.c_opt);
        }
      }
      continue;
    }

    const DetectorSpec spec = table_row_detector(table, row);
    const std::optional<double> fixed = table_row_threshold(table, row);
    const double threshold = fixed ? *fixed : calibrate(row, spec, spec.rule.c);
    for (const ReferenceColumn* col : cols) add_cell(row, *col, spec, threshold, std::nullopt);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace shrinkdetect
