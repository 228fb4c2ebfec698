#include "shrinkdetect/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include "shrinkdetect/experiments.hpp"
#include "shrinkdetect/montecarlo.hpp"
#include "shrinkdetect/report.hpp"
#include "shrinkdetect/serialization.hpp"

namespace shrinkdetect::cli {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config reading with field paths

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

std::string index_path(const std::string& parent, std::size_t i) {
  return parent + "[" + std::to_string(i) + "]";
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError(join(path, item.key()), "unknown field");
  }
}

double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number, got " + j.dump());
  return j.get<double>();
}

std::uint64_t read_count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    throw ConfigError(path, "expected a nonnegative integer, got " + j.dump());
  }
  return j.get<std::uint64_t>();
}

std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string, got " + j.dump());
  return j.get<std::string>();
}

bool read_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false, got " + j.dump());
  return j.get<bool>();
}

std::vector<double> read_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_number(j[i], index_path(path, i)));
  return out;
}

/// A number broadcasts to p entries; a nonempty array must already have p
/// entries. An empty array means "not set".
MeanVector read_stream_vector(const json& j, const std::string& path, std::size_t p) {
  if (j.is_number()) return MeanVector(p, j.get<double>());
  if (j.is_array() && j.empty()) return {};
  MeanVector v = read_numbers(j, path);
  if (v.size() != p) {
    throw ConfigError(path, "expected " + std::to_string(p) + " entries, got " + std::to_string(v.size()));
  }
  return v;
}

template <class F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

ModelSpec read_model(const json& j, const std::string& path) {
  reject_unknown(j, path, {"family", "mu0", "p"});
  ModelSpec m;
  if (!j.contains("family")) throw ConfigError(join(path, "family"), "missing");
  m.family = with_path(join(path, "family"),
                       [&] { return family_from_string(read_string(j["family"], join(path, "family"))); });
  if (!j.contains("p")) throw ConfigError(join(path, "p"), "missing");
  m.p = read_count(j["p"], join(path, "p"));
  m.mu0 = j.contains("mu0") ? read_number(j["mu0"], join(path, "mu0"))
                            : (m.family == Family::poisson ? 1.0 : 0.0);
  with_path(path, [&] {
    m.validate();
    return 0;
  });
  return m;
}

EstimatorRule read_rule(const json& j, const std::string& path, std::size_t p) {
  reject_unknown(j, path, {"kind", "c", "omega", "a", "b", "c0", "delta", "clamp_js"});
  EstimatorRule r;
  if (!j.contains("kind")) throw ConfigError(join(path, "kind"), "missing");
  r.kind = with_path(join(path, "kind"),
                     [&] { return rule_kind_from_string(read_string(j["kind"], join(path, "kind"))); });
  if (j.contains("c")) r.c = read_number(j["c"], join(path, "c"));
  if (j.contains("omega")) r.omega = read_stream_vector(j["omega"], join(path, "omega"), p);
  if (j.contains("a")) r.a = read_stream_vector(j["a"], join(path, "a"), p);
  if (j.contains("b")) r.b = read_number(j["b"], join(path, "b"));
  if (j.contains("c0")) r.c0 = read_number(j["c0"], join(path, "c0"));
  if (j.contains("delta")) r.delta = read_number(j["delta"], join(path, "delta"));
  if (j.contains("clamp_js")) r.clamp_js = read_bool(j["clamp_js"], join(path, "clamp_js"));
  return r;
}

DetectorSpec read_detector(const json& j, const std::string& path) {
  reject_unknown(j, path, {"kind", "model", "rule", "mu_known", "max_candidates", "overflow"});
  DetectorSpec s;
  if (!j.contains("kind")) throw ConfigError(join(path, "kind"), "missing");
  s.kind = with_path(join(path, "kind"),
                     [&] { return detector_kind_from_string(read_string(j["kind"], join(path, "kind"))); });
  if (!j.contains("model")) throw ConfigError(join(path, "model"), "missing");
  s.model = read_model(j["model"], join(path, "model"));
  if (j.contains("rule")) s.rule = read_rule(j["rule"], join(path, "rule"), s.model.p);
  if (j.contains("mu_known")) s.mu_known = read_stream_vector(j["mu_known"], join(path, "mu_known"), s.model.p);
  if (j.contains("max_candidates") && !j["max_candidates"].is_null()) {
    s.max_candidates = read_count(j["max_candidates"], join(path, "max_candidates"));
  }
  if (j.contains("overflow")) {
    const std::string o = read_string(j["overflow"], join(path, "overflow"));
    if (o == "error") s.overflow = OverflowPolicy::error;
    else if (o == "drop_oldest") s.overflow = OverflowPolicy::drop_oldest;
    else throw ConfigError(join(path, "overflow"), "expected 'error' or 'drop_oldest'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Output helpers

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> replications;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  std::optional<double> target_arl;
  std::optional<double> threshold;
  std::optional<double> rel_tol;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c, bool with_config) {
  if (with_config) {
    sub->add_option("--config", c.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--target-arl", c.target_arl, "Target ARL to false alarm (replaces fixed_threshold)");
    sub->add_option("--threshold", c.threshold, "Fixed detector threshold (replaces target_arl)");
    sub->add_option("--rel-tol", c.rel_tol, "Calibration relative tolerance");
  }
  sub->add_option("--replications", c.replications, "Monte Carlo replications");
  sub->add_option("--seed", c.seed, "Base seed");
  sub->add_option("--threads", c.threads, "Worker threads (default: SHRINKDETECT_THREADS or all cores)");
  sub->add_option("--out-dir", c.out_dir, "Output directory");
  sub->add_flag("--quiet", c.quiet, "Suppress progress lines on stderr");
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = load_config(c.config_path);
  if (c.target_arl) {
    cfg.target_arl = c.target_arl;
    cfg.fixed_threshold.reset();
  }
  if (c.threshold) {
    cfg.fixed_threshold = c.threshold;
    cfg.target_arl.reset();
  }
  if (c.replications) cfg.replications = *c.replications;
  if (c.seed) cfg.seed = *c.seed;
  if (c.out_dir) cfg.out_dir = *c.out_dir;
  if (c.rel_tol) cfg.rel_tol = *c.rel_tol;
  cfg.validate();
  return cfg;
}

McOptions mc_options(const Common& c, std::ostream& err) {
  McOptions mc;
  mc.threads = c.threads.value_or(0);
  if (!c.quiet) mc.progress = [&err](const std::string& line) { err << line << '\n'; };
  return mc;
}

CalibrationOptions calibration_options(const RunConfig& cfg, const McOptions& mc) {
  CalibrationOptions o;
  o.rel_tol = cfg.rel_tol;
  o.replications = cfg.replications;
  o.seed = cfg.seed;
  o.cap = cfg.null_cap;
  o.mc = mc;
  return o;
}

std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out_dir) / name;
}

ExperimentReport new_report(const std::string& experiment, const RunConfig& cfg) {
  ExperimentReport r;
  r.experiment = experiment;
  r.seed = cfg.seed;
  r.replications = cfg.replications;
  r.artifact_version = artifact_version();
  return r;
}

/// Threshold from the config, calibrating first when only a target is given.
double resolve_threshold(const RunConfig& cfg, const McOptions& mc, ExperimentReport& report,
                         std::ostream& out) {
  if (cfg.fixed_threshold) return *cfg.fixed_threshold;
  const CalibrationResult cal = calibrate_threshold(cfg.detector, *cfg.target_arl, calibration_options(cfg, mc));
  report.calibrations.push_back({to_string(cfg.detector.kind), cfg.detector.rule.c, cal});
  out << "calibrated threshold " << format_real(cal.threshold_b) << " (ARL "
      << format_real(cal.achieved_arl.mean) << " +- " << format_real(cal.achieved_arl.std_error) << ")\n";
  return cal.threshold_b;
}

void write_report(const ExperimentReport& report, const RunConfig& cfg, std::ostream& out,
                  const json& extra = json::object()) {
  const auto csv = out_path(cfg, report_file_name(report.experiment, report.table, report.seed, "csv"));
  const auto js = out_path(cfg, report_file_name(report.experiment, report.table, report.seed, "json"));
  emit_csv(report_csv(report), csv);
  json doc = report_json(report);
  doc["config"] = config_to_json(cfg);
  for (const auto& item : extra.items()) doc[item.key()] = item.value();
  emit_json(doc, js);
  out << "wrote " << csv.string() << "\n" << "wrote " << js.string() << "\n";
}

void print_estimate(std::ostream& out, const std::string& label, const McEstimate& e) {
  out << label << ": " << format_real(e.mean) << " +- " << format_real(e.std_error) << " ("
      << e.replications << " reps";
  if (e.flagged()) out << ", CENSORED fraction " << format_real(e.censored_fraction);
  out << ")\n";
}

// ---------------------------------------------------------------------------
// Commands

int cmd_calibrate(const Common& common, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(common);
  if (!cfg.target_arl) throw ConfigError("target_arl", "required by calibrate");
  const auto start = std::chrono::steady_clock::now();
  const McOptions mc = mc_options(common, err);
  const CalibrationResult cal = calibrate_threshold(cfg.detector, *cfg.target_arl, calibration_options(cfg, mc));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json doc = {{"schema", "shrinkdetect.calibration"},
              {"schema_version", 1},
              {"config", config_to_json(cfg)},
              {"calibration", calibration_json(cal)},
              {"metadata",
               {{"seed", cfg.seed},
                {"replications", cfg.replications},
                {"artifact_version", artifact_version()},
                {"wall_seconds", wall}}}};
  const auto path = out_path(cfg, report_file_name("calibrate", std::nullopt, cfg.seed, "json"));
  emit_json(doc, path);
  out << "threshold " << format_real(cal.threshold_b) << " achieved ARL " << format_real(cal.achieved_arl.mean)
      << " +- " << format_real(cal.achieved_arl.std_error) << " after " << cal.evaluations << " evaluations"
      << (cal.converged ? "" : " (NOT within tolerance)") << "\n";
  if (cal.achieved_arl.flagged()) {
    out << "warning: " << format_real(cal.achieved_arl.censored_fraction) << " of runs censored at the cap\n";
  }
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_arl(const Common& common, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(common);
  const auto start = std::chrono::steady_clock::now();
  const McOptions mc = mc_options(common, err);
  ExperimentReport report = new_report("arl", cfg);
  const double threshold = resolve_threshold(cfg, mc, report, out);
  ReportCell cell;
  cell.row = to_string(cfg.detector.kind);
  cell.column = "null";
  cell.threshold = threshold;
  cell.estimate = estimate_arl(cfg.detector, threshold, cfg.replications, cfg.seed, cfg.null_cap, mc);
  print_estimate(out, "ARL", cell.estimate);
  report.scenarios.push_back({{"row", cell.row}, {"column", "null"}, {"threshold", threshold}});
  report.cells.push_back(cell);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_report(report, cfg, out);
  return kExitOk;
}

int cmd_delay(const Common& common, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(common);
  const auto start = std::chrono::steady_clock::now();
  const McOptions mc = mc_options(common, err);
  ExperimentReport report = new_report("delay", cfg);
  if (!cfg.scenarios.empty()) {
    const double threshold = resolve_threshold(cfg, mc, report, out);
    for (const MeanVector& mu : cfg.scenarios) {
      ReportCell cell;
      cell.row = to_string(cfg.detector.kind);
      cell.column = mean_label(mu);
      cell.threshold = threshold;
      cell.estimate = estimate_delay(cfg.detector, threshold, mu, cfg.replications, cfg.seed + 1,
                                     cfg.delay_cap, mc);
      print_estimate(out, "delay " + cell.column, cell.estimate);
      report.scenarios.push_back({{"row", cell.row}, {"column", cell.column}, {"mu_post", mu},
                                  {"threshold", threshold}});
      report.cells.push_back(std::move(cell));
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_report(report, cfg, out);
  return kExitOk;
}

int cmd_sweep_c(const Common& common, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve_config(common);
  if (cfg.detector.kind != DetectorKind::srrs) throw ConfigError("detector.kind", "sweep-c needs srrs");
  if (cfg.detector.rule.kind != RuleKind::linear_shrink) {
    throw ConfigError("detector.rule.kind", "sweep-c needs linear_shrink");
  }
  if (cfg.scenarios.empty()) throw ConfigError("scenarios", "sweep-c needs one post-change mean");
  if (!cfg.target_arl) throw ConfigError("target_arl", "required by sweep-c for the calibrated sweep");
  const McOptions mc = mc_options(common, err);
  const std::vector<double> grid = cfg.grid.values();
  const MeanVector& mu = cfg.scenarios.front();

  const std::uint64_t null_cap =
      cfg.null_cap.value_or(default_null_cap(*std::max_element(cfg.sweep_thresholds.begin(),
                                                               cfg.sweep_thresholds.end())));
  const auto fixed = fixed_threshold_sweep(cfg.detector, grid, cfg.sweep_thresholds, mu, cfg.replications,
                                           cfg.seed, null_cap, mc);
  const auto fixed_path = out_path(cfg, report_file_name("sweep_fixed", std::nullopt, cfg.seed, "csv"));
  emit_csv(fixed_sweep_csv(fixed), fixed_path);
  out << "wrote " << fixed_path.string() << "\n";

  const OptimalCResult opt = optimal_c_simulation(cfg.detector, *cfg.target_arl, mu, grid, cfg.replications,
                                                  calibration_options(cfg, mc));
  const auto cal_path = out_path(cfg, report_file_name("sweep_calibrated", std::nullopt, cfg.seed, "csv"));
  emit_csv(calibration_sweep_csv(opt.table), cal_path);
  out << "wrote " << cal_path.string() << "\n";

  json rows = json::array();
  for (const CSweepRow& r : opt.table) {
    rows.push_back({{"c", r.c}, {"calibration", calibration_json(r.calibration)}, {"delay", estimate_json(r.delay)}});
  }
  json fixed_rows = json::array();
  for (const FixedThresholdRow& r : fixed) {
    fixed_rows.push_back({{"c", r.c}, {"threshold", r.threshold}, {"arl", estimate_json(r.arl)},
                          {"delay", estimate_json(r.delay)}});
  }
  const json doc = {{"schema", kReportSchema},
                    {"schema_version", kReportSchemaVersion},
                    {"experiment", "sweep_c"},
                    {"config", config_to_json(cfg)},
                    {"c_opt", opt.c_opt},
                    {"delay_at_c_opt", estimate_json(opt.delay)},
                    {"calibrated", rows},
                    {"fixed", fixed_rows},
                    {"metadata", {{"seed", cfg.seed}, {"artifact_version", artifact_version()}}}};
  const auto js = out_path(cfg, report_file_name("sweep_c", std::nullopt, cfg.seed, "json"));
  emit_json(doc, js);
  out << "c_opt " << format_real(opt.c_opt) << " delay " << format_real(opt.delay.mean) << " +- "
      << format_real(opt.delay.std_error) << "\nwrote " << js.string() << "\n";
  return kExitOk;
}

struct ReproduceArgs {
  std::string table;
  std::string scale = "desk";
  std::optional<std::uint64_t> calibration_replications;
  std::vector<std::string> rows;
  std::vector<std::string> columns;
};

int cmd_reproduce(const Common& common, const ReproduceArgs& args, std::ostream& out, std::ostream& err) {
  const TableId table = table_id_from_string(args.table);
  ReproduceOptions opts;
  opts.scale = scale_from_string(args.scale);
  opts.seed = common.seed.value_or(1);
  opts.replications = common.replications;
  opts.calibration_replications = args.calibration_replications;
  opts.rows = args.rows;
  opts.columns = args.columns;
  opts.mc = mc_options(common, err);

  const ExperimentReport report = reproduce_table(table, opts);
  const double k = k_se_for(opts.scale);
  const Comparison cmp = compare_to_reference(report, reference_table(table), k);
  for (const CellVerdict& v : cmp.cells) {
    out << to_string(table) << " " << v.row << " " << v.column << ": sim " << format_real(v.sim_mean) << " +- "
        << format_real(v.sim_se) << " ref " << format_real(v.ref_mean);
    if (v.ref_se) out << " +- " << format_real(*v.ref_se);
    out << " |diff| " << format_real(v.deviation) << " allowed " << format_real(v.allowed) << " "
        << (v.pass ? "PASS" : "FAIL") << "\n";
  }
  out << cmp.passed << " passed, " << cmp.failed << " failed (k_se = " << k << ")\n";

  RunConfig cfg;
  cfg.out_dir = common.out_dir.value_or("out");
  cfg.seed = opts.seed;
  const auto csv = out_path(cfg, report_file_name("reproduce", table, opts.seed, "csv"));
  const auto js = out_path(cfg, report_file_name("reproduce", table, opts.seed, "json"));
  emit_csv(report_csv(report), csv);
  json doc = report_json(report);
  doc["comparison"] = comparison_json(cmp);
  doc["scale"] = to_string(opts.scale);
  doc["k_se"] = k;
  emit_json(doc, js);
  out << "wrote " << csv.string() << "\nwrote " << js.string() << "\n";
  return cmp.all_passed() ? kExitOk : kExitComparison;
}

struct OracleArgs {
  std::vector<double> mu;
  std::vector<double> omega{0.25};
  double target_arl = 500.0;
};

int cmd_oracle_c(const OracleArgs& args, std::ostream& out) {
  const std::size_t p = args.mu.size();
  if (p == 0) throw ConfigError("--mu", "needs at least one entry");
  MeanVector omega = args.omega;
  if (omega.size() == 1) omega.assign(p, omega.front());
  if (omega.size() != p) throw ConfigError("--omega", "expected 1 or " + std::to_string(p) + " entries");
  const double c = oracle_c_theoretical(args.mu, omega, args.target_arl, p);
  out << "c_oracle " << format_real(c) << "\n";
  out << "delay bound at c_oracle " << format_real(oracle_c_objective(args.mu, omega, args.target_arl, p, c)) << "\n";
  return kExitOk;
}

int cmd_nu(double x, std::ostream& out) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", nu_overshoot(x));
  out << "nu(" << format_real(x) << ") = " << buf << "\n";
  return kExitOk;
}

struct QcheckArgs {
  double c = 0.5;
  double omega = 1.0;
  std::uint64_t steps = 100000;
  std::uint64_t seeds = 100;
  double tol = 0.05;
};

int cmd_qcheck(const Common& common, const QcheckArgs& args, std::ostream& out) {
  const std::uint64_t seed = common.seed.value_or(1);
  std::uint64_t close = 0;
  for (std::uint64_t s = 0; s < args.seeds; ++s) {
    const std::vector<double> path = q_measure_trajectory(args.c, args.omega, args.steps, seed + s);
    if (std::abs(path.back() - args.omega) < args.tol) ++close;
  }
  const double fraction = static_cast<double>(close) / static_cast<double>(args.seeds);
  out << "fraction of " << args.seeds << " paths with |mu_hat_" << args.steps << " - omega| < "
      << format_real(args.tol) << ": " << format_real(fraction) << "\n";
  json sums = json::array();
  if (args.c > 0.0) {
    for (std::uint64_t n : {100u, 1000u, 10000u}) {
      const double s = shrinkage_coefficients(n, args.c).sum_sq;
      out << "sum_sq(n=" << n << ", c=" << format_real(args.c) << ") = " << format_real(s) << "\n";
      sums.push_back({{"n", n}, {"sum_sq", s}});
    }
  }
  RunConfig cfg;
  cfg.out_dir = common.out_dir.value_or("out");
  const auto path = out_path(cfg, report_file_name("qcheck", std::nullopt, seed, "json"));
  emit_json({{"schema", "shrinkdetect.qcheck"},
             {"schema_version", 1},
             {"c", args.c},
             {"omega", args.omega},
             {"steps", args.steps},
             {"seeds", args.seeds},
             {"tolerance", args.tol},
             {"fraction_within", fraction},
             {"sum_sq", sums}},
            path);
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> GridSpec::values() const {
  if (!(step > 0.0)) throw ConfigError("sweep.grid.step", "must be positive");
  if (!(stop >= start)) throw ConfigError("sweep.grid.stop", "must be >= start");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return out;
}

void RunConfig::validate() const {
  try {
    detector.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("detector", e.what());
  }
  if (target_arl && fixed_threshold) {
    throw ConfigError("fixed_threshold", "give either target_arl or fixed_threshold, not both");
  }
  if (!target_arl && !fixed_threshold) {
    throw ConfigError("target_arl", "missing (one of target_arl or fixed_threshold is required)");
  }
  if (target_arl && !(*target_arl > 1.0)) throw ConfigError("target_arl", "must be > 1");
  if (fixed_threshold && !threshold_is_log_scale(detector.kind) && !(*fixed_threshold > 0.0)) {
    throw ConfigError("fixed_threshold", "must be positive for this detector");
  }
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (scenarios[i].size() != detector.model.p) {
      throw ConfigError(index_path("scenarios", i), "expected " + std::to_string(detector.model.p) +
                                                        " entries, got " + std::to_string(scenarios[i].size()));
    }
    if (detector.model.family == Family::poisson) {
      for (double m : scenarios[i]) {
        if (!(m > 0.0)) throw ConfigError(index_path("scenarios", i), "Poisson means must be > 0");
      }
    }
  }
  if (replications < 2) throw ConfigError("replications", "must be >= 2");
  if (null_cap && *null_cap < 1) throw ConfigError("caps.null", "must be >= 1");
  if (delay_cap < 1) throw ConfigError("caps.delay", "must be >= 1");
  if (!(rel_tol > 0.0) || rel_tol > 0.2) throw ConfigError("rel_tol", "must lie in (0, 0.2]");
  if (out_dir.empty()) throw ConfigError("out_dir", "must not be empty");
  grid.values();
  if (grid.start < 0.0) throw ConfigError("sweep.grid.start", "must be >= 0");
  if (sweep_thresholds.empty()) throw ConfigError("sweep.thresholds", "must not be empty");
  for (std::size_t i = 0; i < sweep_thresholds.size(); ++i) {
    if (!(sweep_thresholds[i] > 0.0)) throw ConfigError(index_path("sweep.thresholds", i), "must be positive");
  }
}

RunConfig config_from_json(const json& doc) {
  reject_unknown(doc, "", {"detector", "target_arl", "fixed_threshold", "scenarios", "replications", "seed",
                           "caps", "rel_tol", "out_dir", "sweep"});
  RunConfig cfg;
  if (!doc.contains("detector")) throw ConfigError("detector", "missing");
  cfg.detector = read_detector(doc["detector"], "detector");
  const std::size_t p = cfg.detector.model.p;
  if (doc.contains("target_arl") && !doc["target_arl"].is_null()) {
    cfg.target_arl = read_number(doc["target_arl"], "target_arl");
  }
  if (doc.contains("fixed_threshold") && !doc["fixed_threshold"].is_null()) {
    cfg.fixed_threshold = read_number(doc["fixed_threshold"], "fixed_threshold");
  }
  if (doc.contains("scenarios")) {
    const json& s = doc["scenarios"];
    if (!s.is_array()) throw ConfigError("scenarios", "expected an array of mean vectors");
    for (std::size_t i = 0; i < s.size(); ++i) cfg.scenarios.push_back(read_stream_vector(s[i], index_path("scenarios", i), p));
  }
  if (doc.contains("replications")) cfg.replications = read_count(doc["replications"], "replications");
  if (doc.contains("seed")) cfg.seed = read_count(doc["seed"], "seed");
  if (doc.contains("caps")) {
    const json& caps = doc["caps"];
    reject_unknown(caps, "caps", {"null", "delay"});
    if (caps.contains("null") && !caps["null"].is_null()) cfg.null_cap = read_count(caps["null"], "caps.null");
    if (caps.contains("delay")) cfg.delay_cap = read_count(caps["delay"], "caps.delay");
  }
  if (doc.contains("rel_tol")) cfg.rel_tol = read_number(doc["rel_tol"], "rel_tol");
  if (doc.contains("out_dir")) cfg.out_dir = read_string(doc["out_dir"], "out_dir");
  if (doc.contains("sweep")) {
    const json& sw = doc["sweep"];
    reject_unknown(sw, "sweep", {"grid", "thresholds"});
    if (sw.contains("grid")) {
      const json& g = sw["grid"];
      reject_unknown(g, "sweep.grid", {"start", "stop", "step"});
      if (g.contains("start")) cfg.grid.start = read_number(g["start"], "sweep.grid.start");
      if (g.contains("stop")) cfg.grid.stop = read_number(g["stop"], "sweep.grid.stop");
      if (g.contains("step")) cfg.grid.step = read_number(g["step"], "sweep.grid.step");
    }
    if (sw.contains("thresholds")) cfg.sweep_thresholds = read_numbers(sw["thresholds"], "sweep.thresholds");
  }
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json doc;
  doc["detector"] = cfg.detector;
  if (cfg.target_arl) doc["target_arl"] = *cfg.target_arl;
  if (cfg.fixed_threshold) doc["fixed_threshold"] = *cfg.fixed_threshold;
  doc["scenarios"] = cfg.scenarios;
  doc["replications"] = cfg.replications;
  doc["seed"] = cfg.seed;
  doc["caps"] = {{"null", cfg.null_cap ? json(*cfg.null_cap) : json(nullptr)}, {"delay", cfg.delay_cap}};
  doc["rel_tol"] = cfg.rel_tol;
  doc["out_dir"] = cfg.out_dir;
  doc["sweep"] = {{"grid", {{"start", cfg.grid.start}, {"stop", cfg.grid.stop}, {"step", cfg.grid.step}}},
                  {"thresholds", cfg.sweep_thresholds}};
  return doc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("'") + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-stream change detection with shrinkage and thresholding estimators"};
  app.require_subcommand(1);

  Common calibrate_c, arl_c, delay_c, sweep_c, reproduce_c, qcheck_c;
  auto* calibrate = app.add_subcommand("calibrate", "Find the threshold meeting a target ARL to false alarm");
  add_common(calibrate, calibrate_c, true);
  auto* arl = app.add_subcommand("arl", "Estimate the ARL to false alarm");
  add_common(arl, arl_c, true);
  auto* delay = app.add_subcommand("delay", "Estimate detection delays for each configured scenario");
  add_common(delay, delay_c, true);
  auto* sweep = app.add_subcommand("sweep-c", "Sweep the shrinkage factor (fixed and calibrated thresholds)");
  add_common(sweep, sweep_c, true);

  ReproduceArgs rargs;
  auto* reproduce = app.add_subcommand("reproduce", "Re-run a published table and compare cell by cell");
  add_common(reproduce, reproduce_c, false);
  reproduce->add_option("--table", rargs.table, "Table id")->required()->check(CLI::IsMember({"T1", "T2", "T3", "T4", "T5"}));
  reproduce->add_option("--scale", rargs.scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  reproduce->add_option("--calibration-replications", rargs.calibration_replications,
                        "Null runs per ARL evaluation during calibration");
  reproduce->add_option("--row", rargs.rows, "Restrict to this row (repeatable)");
  reproduce->add_option("--column", rargs.columns, "Restrict to this column label (repeatable)")->delimiter('\0');

  OracleArgs oargs;
  auto* oracle = app.add_subcommand("oracle-c", "Shrinkage factor minimizing the asymptotic delay bound");
  oracle->add_option("--mu", oargs.mu, "Post-change means, comma separated")->required()->delimiter(',');
  oracle->add_option("--omega", oargs.omega, "Shrinkage target (one value or one per stream)")->delimiter(',');
  oracle->add_option("--target-arl", oargs.target_arl, "Target ARL A");

  double nu_x = 0.0;
  auto* nu = app.add_subcommand("nu", "Print the overshoot function nu(x)");
  nu->add_option("x", nu_x, "Argument x > 0")->required();

  QcheckArgs qargs;
  auto* qcheck = app.add_subcommand("qcheck", "Convergence diagnostic for estimates under the plug-in measure");
  add_common(qcheck, qcheck_c, false);
  qcheck->add_option("--c", qargs.c, "Shrinkage factor in [0, 1]");
  qcheck->add_option("--omega", qargs.omega, "Shrinkage target");
  qcheck->add_option("--steps", qargs.steps, "Steps per path");
  qcheck->add_option("--seeds", qargs.seeds, "Number of paths");
  qcheck->add_option("--tol", qargs.tol, "Closeness tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    if (*calibrate) return cmd_calibrate(calibrate_c, out, err);
    if (*arl) return cmd_arl(arl_c, out, err);
    if (*delay) return cmd_delay(delay_c, out, err);
    if (*sweep) return cmd_sweep_c(sweep_c, out, err);
    if (*reproduce) return cmd_reproduce(reproduce_c, rargs, out, err);
    if (*oracle) return cmd_oracle_c(oargs, out);
    if (*nu) return cmd_nu(nu_x, out);
    if (*qcheck) return cmd_qcheck(qcheck_c, qargs, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::domain_error& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace shrinkdetect::cli
