#include "shrinkdetect/report.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "shrinkdetect/serialization.hpp"

#ifndef SHRINKDETECT_VERSION
#define SHRINKDETECT_VERSION "0.1.0"
#endif

namespace shrinkdetect {

namespace {

struct Row {
  std::string label;
  std::vector<double> means;
  std::vector<double> ses;
  std::vector<double> c_values;  // empty unless the row prints a c per column
};

ReferenceTable build(TableId id, std::string title, std::vector<ReferenceColumn> columns,
                     const std::vector<Row>& rows) {
  ReferenceTable t;
  t.id = id;
  t.title = std::move(title);
  t.columns = std::move(columns);
  for (const Row& r : rows) {
    t.rows.push_back(r.label);
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      ReferenceCell cell;
      cell.row = r.label;
      cell.column = t.columns[j].label;
      cell.mean = r.means.at(j);
      if (!r.ses.empty()) cell.se = r.ses.at(j);
      if (!r.c_values.empty()) cell.c_value = r.c_values.at(j);
      t.cells.push_back(std::move(cell));
    }
  }
  return t;
}

std::vector<ReferenceColumn> mean_columns(const std::vector<MeanVector>& means) {
  std::vector<ReferenceColumn> out;
  for (const MeanVector& mu : means) out.push_back({mean_label(mu), mu});
  return out;
}

ReferenceTable table1() {
  return build(TableId::T1, "Detection delays of linear-shrinkage SRRS, Gaussian, p=3, omega=0.25, A=500",
               mean_columns({{0.41, 0.39, 0.34}, {0.58, 0.53, 0.39}, {0.65, 0.68, 0.79}, {1.0, 1.0, 1.0}}),
               {
                   {"c=1", {34.48, 20.84, 11.70, 6.76}, {0.39, 0.22, 0.11, 0.06}, {}},
                   {"c=0.9", {32.20, 19.84, 11.37, 6.65}, {0.36, 0.20, 0.11, 0.05}, {}},
                   {"c=0.5", {26.00, 17.33, 10.75, 6.69}, {0.25, 0.15, 0.08, 0.04}, {}},
                   {"c=0.1", {23.50, 17.31, 12.00, 8.31}, {0.18, 0.11, 0.06, 0.03}, {}},
                   {"c_oracle", {23.54, 16.89, 10.75, 6.58}, {0.18, 0.13, 0.08, 0.05},
                    {0.14, 0.32, 0.51, 0.68}},
                   {"c_opt_sim", {23.50, 16.86, 10.74, 6.57}, {0.18, 0.13, 0.08, 0.05},
                    {0.10, 0.29, 0.54, 0.75}},
                   {"c_js", {28.81, 18.88, 11.39, 6.79}, {0.29, 0.18, 0.10, 0.05}, {}},
               });
}

ReferenceTable table2() {
  return build(TableId::T2, "Detection delays of thresholding SRRS, Gaussian, p=3, omega=0.25, A=500",
               mean_columns({{1.0, 1.0, 0.0}, {0.75, 0.5, 0.0}, {0.75, 0.0, 0.0}, {0.5, 0.0, 0.0}}),
               {
                   {"baseline", {9.23, 19.68, 26.59, 53.51}, {0.08, 0.21, 0.29, 0.67}, {}},
                   {"soft", {9.51, 19.53, 24.16, 48.93}, {0.08, 0.19, 0.24, 0.57}, {}},
                   {"hard", {8.91, 18.13, 22.86, 43.12}, {0.08, 0.18, 0.23, 0.51}, {}},
               });
}

ReferenceTable table3() {
  return build(TableId::T3, "Consensus detection, Poisson, mu0=1, p=3, omega=1.25, A=500",
               mean_columns({{1.5, 1.5, 1.25}, {2.0, 1.5, 1.5}, {5.0, 1.25, 1.25}, {4.0, 4.0, 4.0}}),
               {
                   {"baseline", {33.86, 15.40, 4.01, 2.64}, {0.39, 0.16, 0.03, 0.01}, {}},
                   {"c=0.1", {22.42, 13.63, 4.90, 3.37}, {0.20, 0.09, 0.02, 0.01}, {}},
                   {"c=0.5", {24.37, 12.96, 3.60, 2.66}, {0.24, 0.12, 0.02, 0.01}, {}},
                   {"c=0.9", {31.47, 14.73, 3.62, 2.63}, {0.35, 0.15, 0.03, 0.01}, {}},
               });
}

ReferenceTable table4() {
  return build(TableId::T4, "Parallel detection, Poisson, mu0=1, p=3, omega=1.25, A=500",
               mean_columns({{1.5, 1.0, 1.0}, {1.5, 1.5, 1.0}, {2.0, 1.0, 1.0}, {2.0, 2.0, 1.0}}),
               {
                   {"baseline", {70.19, 37.83, 23.03, 12.64}, {0.88, 0.45, 0.26, 0.13}, {}},
                   {"hard", {46.66, 29.17, 17.45, 11.03}, {0.57, 0.34, 0.18, 0.11}, {}},
               });
}

ReferenceTable table5() {
  std::vector<ReferenceColumn> columns;
  for (double mu1 : {0.5, 1.0}) {
    for (std::size_t r : {5u, 10u, 20u}) {
      MeanVector mu(100, 0.0);
      std::fill_n(mu.begin(), r, mu1);
      std::ostringstream label;
      label << "mu1=" << mu1 << ",r=" << r;
      columns.push_back({label.str(), std::move(mu)});
    }
  }
  return build(TableId::T5, "Detection delays of three scalable schemes, Gaussian, p=100",
               std::move(columns),
               {
                   {"T_B", {96.4, 28.9, 13.2, 10.4, 6.7, 5.0}, {}, {}},
                   {"N_max", {52.8, 45.5, 40.1, 22.9, 20.9, 19.4}, {}, {}},
                   {"N_sum", {57.0, 33.9, 20.3, 26.0, 15.9, 9.8}, {}, {}},
               });
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string csv_text(const CsvValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return quote_csv(*s);
  if (const auto* d = std::get_if<double>(&v)) return format_real(*d);
  return std::to_string(std::get<std::uint64_t>(v));
}

CsvValue optional_real(const std::optional<double>& v) {
  return v ? CsvValue(*v) : CsvValue(std::string());
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing: " + std::strerror(errno));
  }
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace

std::string to_string(TableId id) {
  switch (id) {
    case TableId::T1: return "T1";
    case TableId::T2: return "T2";
    case TableId::T3: return "T3";
    case TableId::T4: return "T4";
    case TableId::T5: return "T5";
  }
  return "unknown";
}

TableId table_id_from_string(const std::string& name) {
  for (TableId id : {TableId::T1, TableId::T2, TableId::T3, TableId::T4, TableId::T5}) {
    if (to_string(id) == name) return id;
  }
  throw std::invalid_argument("unknown table id '" + name + "' (expected T1..T5)");
}

std::string mean_label(const MeanVector& mu) {
  std::string out = "(";
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (k) out += ',';
    out += format_real(mu[k]);
  }
  return out + ")";
}

const ReferenceCell* ReferenceTable::find(const std::string& row, const std::string& column) const {
  for (const ReferenceCell& c : cells) {
    if (c.row == row && c.column == column) return &c;
  }
  return nullptr;
}

const ReferenceColumn& ReferenceTable::column(const std::string& label) const {
  for (const ReferenceColumn& c : columns) {
    if (c.label == label) return c;
  }
  throw ShapeMismatch(to_string(id) + ": no column '" + label + "'");
}

const ReferenceTable& reference_table(TableId id) {
  static const std::map<TableId, ReferenceTable> tables = {
      {TableId::T1, table1()}, {TableId::T2, table2()}, {TableId::T3, table3()},
      {TableId::T4, table4()}, {TableId::T5, table5()},
  };
  return tables.at(id);
}

std::string artifact_version() { return SHRINKDETECT_VERSION; }

// ---------------------------------------------------------------------------

bool within_band(double sim_mean, double sim_se, double ref_mean, double ref_se, double k_se) {
  return std::abs(sim_mean - ref_mean) <= k_se * std::hypot(sim_se, ref_se);
}

Comparison compare_to_reference(const ExperimentReport& report, const ReferenceTable& ref,
                                double k_se, double rel_tol_without_se) {
  if (report.table && *report.table != ref.id) {
    throw ShapeMismatch("report is for " + to_string(*report.table) + ", reference is " +
                        to_string(ref.id));
  }
  Comparison out;
  for (const ReportCell& cell : report.cells) {
    const ReferenceCell* r = ref.find(cell.row, cell.column);
    if (!r) {
      throw ShapeMismatch(to_string(ref.id) + " has no cell (" + cell.row + ", " + cell.column + ")");
    }
    CellVerdict v;
    v.row = cell.row;
    v.column = cell.column;
    v.sim_mean = cell.estimate.mean;
    v.sim_se = cell.estimate.std_error;
    v.ref_mean = r->mean;
    v.ref_se = r->se;
    v.deviation = std::abs(v.sim_mean - v.ref_mean);
    v.allowed = r->se ? k_se * std::hypot(v.sim_se, *r->se) : rel_tol_without_se * std::abs(r->mean);
    v.pass = v.deviation <= v.allowed;
    (v.pass ? out.passed : out.failed) += 1;
    out.cells.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void emit_csv(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    out << (i ? "," : "") << quote_csv(table.header[i]);
  }
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw std::invalid_argument("emit_csv: row width " + std::to_string(row.size()) +
                                  " does not match header width " +
                                  std::to_string(table.header.size()));
    }
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_text(row[i]);
    out << '\n';
  }
  finish_write(out, path);
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "': " + std::strerror(errno));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        fields.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(std::move(cur));
    rows.push_back(std::move(fields));
  }
  return rows;
}

CsvTable report_csv(const ExperimentReport& report) {
  CsvTable t;
  t.header = {"row", "column", "mean", "se", "sd", "replications", "censored_fraction", "threshold", "c"};
  for (const ReportCell& c : report.cells) {
    t.rows.push_back({c.row, c.column, c.estimate.mean, c.estimate.std_error, c.estimate.sd,
                      c.estimate.replications, c.estimate.censored_fraction,
                      optional_real(c.threshold), optional_real(c.c_value)});
  }
  return t;
}

CsvTable fixed_sweep_csv(const std::vector<FixedThresholdRow>& rows) {
  CsvTable t;
  t.header = {"c", "B", "arl_mean", "arl_se", "delay_mean", "delay_se"};
  for (const FixedThresholdRow& r : rows) {
    t.rows.push_back({r.c, r.threshold, r.arl.mean, r.arl.std_error, r.delay.mean, r.delay.std_error});
  }
  return t;
}

CsvTable calibration_sweep_csv(const std::vector<CSweepRow>& rows) {
  CsvTable t;
  t.header = {"c", "B_calibrated", "achieved_arl", "se"};
  for (const CSweepRow& r : rows) {
    t.rows.push_back({r.c, r.calibration.threshold_b, r.calibration.achieved_arl.mean,
                      r.calibration.achieved_arl.std_error});
  }
  return t;
}

nlohmann::json estimate_json(const McEstimate& e) {
  return {{"mean", real_to_json(e.mean)},
          {"se", real_to_json(e.std_error)},
          {"sd", real_to_json(e.sd)},
          {"replications", e.replications},
          {"censored_fraction", e.censored_fraction},
          {"censored_flag", e.flagged()}};
}

nlohmann::json calibration_json(const CalibrationResult& r) {
  return {{"threshold", real_to_json(r.threshold_b)},
          {"achieved_arl", estimate_json(r.achieved_arl)},
          {"target_arl", r.target_a},
          {"evaluations", r.evaluations},
          {"bracket", {real_to_json(r.bracket.first), real_to_json(r.bracket.second)}},
          {"converged", r.converged}};
}

nlohmann::json report_json(const ExperimentReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const ReportCell& c : report.cells) {
    nlohmann::json cell = {{"row", c.row}, {"column", c.column}, {"estimate", estimate_json(c.estimate)}};
    cell["threshold"] = c.threshold ? real_to_json(*c.threshold) : nlohmann::json(nullptr);
    cell["c"] = c.c_value ? nlohmann::json(*c.c_value) : nlohmann::json(nullptr);
    cells.push_back(std::move(cell));
  }
  nlohmann::json calibrations = nlohmann::json::array();
  for (const CalibrationRecord& r : report.calibrations) {
    nlohmann::json rec = calibration_json(r.result);
    rec["row"] = r.row;
    rec["c"] = r.c;
    calibrations.push_back(std::move(rec));
  }
  return {{"schema", kReportSchema},
          {"schema_version", kReportSchemaVersion},
          {"experiment", report.experiment},
          {"table", report.table ? nlohmann::json(to_string(*report.table)) : nlohmann::json(nullptr)},
          {"metadata",
           {{"seed", report.seed},
            {"replications", report.replications},
            {"artifact_version", report.artifact_version},
            {"wall_seconds", report.wall_seconds}}},
          {"scenarios", report.scenarios},
          {"cells", std::move(cells)},
          {"calibrations", std::move(calibrations)}};
}

nlohmann::json comparison_json(const Comparison& comparison) {
  nlohmann::json cells = nlohmann::json::array();
  for (const CellVerdict& v : comparison.cells) {
    cells.push_back({{"row", v.row},
                     {"column", v.column},
                     {"sim_mean", v.sim_mean},
                     {"sim_se", v.sim_se},
                     {"ref_mean", v.ref_mean},
                     {"ref_se", v.ref_se ? nlohmann::json(*v.ref_se) : nlohmann::json(nullptr)},
                     {"deviation", v.deviation},
                     {"allowed", v.allowed},
                     {"pass", v.pass}});
  }
  return {{"passed", comparison.passed}, {"failed", comparison.failed}, {"cells", std::move(cells)}};
}

void emit_json(const nlohmann::json& doc, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << doc.dump(2) << '\n';
  finish_write(out, path);
}

std::string report_file_name(const std::string& experiment, std::optional<TableId> table,
                             std::uint64_t seed, const std::string& extension) {
  return experiment + "_" + (table ? to_string(*table) : std::string("none")) + "_" +
         std::to_string(seed) + "." + extension;
}

}  // namespace shrinkdetect
