#include "shrinkdetect/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "shrinkdetect/parallel.hpp"

namespace shrinkdetect {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Null runs of detectors with log-scale thresholds get this cap unless told
// otherwise; e^b is not a usable guess for CUSUM-SUM thresholds.
constexpr std::uint64_t kLogScaleNullCap = 1000000;

void report(const McOptions& options, const std::string& line) {
  if (options.progress) options.progress(line);
}

DetectorSpec with_linear_c(const DetectorSpec& base, double c) {
  DetectorSpec spec = base;
  spec.rule = EstimatorRule::linear_shrink(c, base.rule.omega);
  return spec;
}

}  // namespace

Scenario Scenario::null(ModelSpec model, std::uint64_t cap) {
  Scenario s;
  s.model = std::move(model);
  s.horizon_cap = cap;
  return s;
}

Scenario Scenario::immediate_change(ModelSpec model, MeanVector mu_post, std::uint64_t cap) {
  Scenario s;
  s.model = std::move(model);
  s.mu_post = std::move(mu_post);
  s.change_time = 1;
  s.horizon_cap = cap;
  return s;
}

void Scenario::validate() const {
  model.validate();
  if (horizon_cap < 1) throw std::invalid_argument("scenario: horizon_cap must be >= 1");
  if (is_null()) return;
  if (*change_time < 1) throw std::invalid_argument("scenario: change_time must be >= 1");
  if (mu_post.size() != model.p) {
    throw std::invalid_argument("scenario: mu_post has " + std::to_string(mu_post.size()) +
                                " entries, expected " + std::to_string(model.p));
  }
  if (model.family == Family::poisson) {
    for (double m : mu_post) {
      if (!(m > 0.0)) throw std::invalid_argument("scenario: Poisson post-change means must be > 0");
    }
  }
}

McEstimate summarize(const std::vector<double>& values, std::uint64_t censored) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("summarize: need at least two replications");
  long double sum = 0.0L;
  for (double v : values) sum += v;
  const long double mean = sum / n;
  long double ss = 0.0L;
  for (double v : values) ss += (v - mean) * (v - mean);
  McEstimate e;
  e.mean = static_cast<double>(mean);
  e.sd = static_cast<double>(std::sqrt(ss / (n - 1)));
  e.std_error = e.sd / std::sqrt(static_cast<double>(n));
  e.replications = n;
  e.censored_fraction = static_cast<double>(censored) / static_cast<double>(n);
  return e;
}

std::uint64_t default_null_cap(double target_a) {
  if (!(target_a > 0.0)) throw std::invalid_argument("default_null_cap: target must be positive");
  return static_cast<std::uint64_t>(std::ceil(kNullCapMultiple * target_a));
}

// ---------------------------------------------------------------------------

ObservationSource::ObservationSource(const Scenario& scenario, std::uint64_t seed,
                                     std::uint64_t replication)
    : scenario_(&scenario), rng_(make_rng(seed, replication)), x_(scenario.model.p) {
  if (scenario.model.family == Family::poisson) {
    pre_.assign(scenario.model.p, std::poisson_distribution<int>(scenario.model.mu0));
    if (!scenario.is_null()) {
      for (double m : scenario.mu_post) post_.emplace_back(m);
    }
  }
}

const std::vector<double>& ObservationSource::next(std::uint64_t n) {
  const ModelSpec& model = scenario_->model;
  const bool changed = scenario_->change_time && n >= *scenario_->change_time;
  if (model.family == Family::gaussian_unit_var) {
    for (std::size_t k = 0; k < model.p; ++k) {
      const double mean = changed ? scenario_->mu_post[k] : model.mu0;
      x_[k] = mean + normal_(rng_);
    }
  } else {
    auto& dists = changed ? post_ : pre_;
    for (std::size_t k = 0; k < model.p; ++k) x_[k] = static_cast<double>(dists[k](rng_));
  }
  return x_;
}

RunLength simulate_run_length(const DetectorSpec& spec, double threshold, const Scenario& scenario,
                              std::uint64_t seed, std::uint64_t replication) {
  scenario.validate();
  if (!(spec.model == scenario.model)) {
    throw std::invalid_argument("simulate_run_length: detector and scenario models differ");
  }
  DetectorState detector = make_detector(spec, threshold);
  ObservationSource source(scenario, seed, replication);
  for (std::uint64_t n = 1; n <= scenario.horizon_cap; ++n) {
    if (step(detector, source.next(n)).alarmed) return {n, false};
  }
  return {scenario.horizon_cap, true};
}

RunLength RecordPath::run_length_at(double log_threshold, std::uint64_t cap) const {
  const auto it = std::lower_bound(values.begin(), values.end(), log_threshold);
  if (it == values.end()) {
    if (reached_top) throw std::out_of_range("record path: threshold above the simulated top");
    return {cap, true};
  }
  const std::uint64_t t = times[static_cast<std::size_t>(it - values.begin())];
  if (t > cap) return {cap, true};
  return {t, false};
}

RecordPath simulate_record_path(const DetectorSpec& spec, double log_top, const Scenario& scenario,
                                std::uint64_t seed, std::uint64_t replication) {
  scenario.validate();
  DetectorState detector = make_detector(spec, threshold_from_log(spec.kind, kInf));
  ObservationSource source(scenario, seed, replication);
  RecordPath path;
  double best = -kInf;
  for (std::uint64_t n = 1; n <= scenario.horizon_cap; ++n) {
    const double s = step(detector, source.next(n)).log_stat;
    path.simulated = n;
    if (s > best) {
      best = s;
      path.times.push_back(n);
      path.values.push_back(s);
      if (s >= log_top) {
        path.reached_top = true;
        break;
      }
    }
  }
  return path;
}

McEstimate estimate_arl(const DetectorSpec& spec, double threshold, std::uint64_t replications,
                        std::uint64_t seed_base, std::optional<std::uint64_t> cap,
                        const McOptions& options) {
  if (replications < 2) throw std::invalid_argument("estimate_arl: replications must be >= 2");
  const std::uint64_t horizon =
      cap ? *cap : (threshold_is_log_scale(spec.kind) ? kLogScaleNullCap : default_null_cap(threshold));
  const Scenario scenario = Scenario::null(spec.model, horizon);
  std::vector<double> lengths(replications);
  std::vector<char> censored(replications, 0);
  parallel_for(replications, options.threads, [&](std::size_t i) {
    const RunLength r = simulate_run_length(spec, threshold, scenario, seed_base, i);
    lengths[i] = static_cast<double>(r.length);
    censored[i] = r.censored;
  });
  return summarize(lengths, static_cast<std::uint64_t>(std::count(censored.begin(), censored.end(), 1)));
}

McEstimate estimate_delay(const DetectorSpec& spec, double threshold, const MeanVector& mu_post,
                          std::uint64_t replications, std::uint64_t seed_base, std::uint64_t cap,
                          const McOptions& options) {
  if (replications < 2) throw std::invalid_argument("estimate_delay: replications must be >= 2");
  const Scenario scenario = Scenario::immediate_change(spec.model, mu_post, cap);
  scenario.validate();
  std::vector<double> lengths(replications);
  std::vector<char> censored(replications, 0);
  parallel_for(replications, options.threads, [&](std::size_t i) {
    const RunLength r = simulate_run_length(spec, threshold, scenario, seed_base, i);
    lengths[i] = static_cast<double>(r.length);
    censored[i] = r.censored;
  });
  return summarize(lengths, static_cast<std::uint64_t>(std::count(censored.begin(), censored.end(), 1)));
}

// ---------------------------------------------------------------------------

CalibrationResult calibrate_threshold(const DetectorSpec& spec, double target_a,
                                      const CalibrationOptions& options) {
  if (!(target_a > 1.0)) throw std::invalid_argument("calibrate_threshold: target_a must be > 1");
  if (!(options.rel_tol > 0.0) || options.rel_tol > 0.2) {
    throw std::invalid_argument("calibrate_threshold: rel_tol must lie in (0, 0.2]");
  }
  if (options.replications < 2) {
    throw std::invalid_argument("calibrate_threshold: replications must be >= 2");
  }
  spec.validate();

  const std::uint64_t cap = options.cap ? *options.cap : default_null_cap(target_a);
  const Scenario scenario = Scenario::null(spec.model, cap);
  const std::size_t reps = options.replications;

  double lo = std::log(0.05 * target_a);
  double hi = std::log(1.5 * target_a);
  std::vector<RecordPath> paths(reps);

  auto simulate_to = [&](double top, bool only_topped) {
    parallel_for(reps, options.mc.threads, [&](std::size_t i) {
      if (only_topped && !paths[i].reached_top) return;
      paths[i] = simulate_record_path(spec, top, scenario, options.seed, i);
    });
  };

  CalibrationResult result;
  result.target_a = target_a;

  std::vector<double> lengths(reps);
  auto arl_at = [&](double log_threshold) {
    std::uint64_t censored = 0;
    for (std::size_t i = 0; i < reps; ++i) {
      const RunLength r = paths[i].run_length_at(log_threshold, cap);
      lengths[i] = static_cast<double>(r.length);
      censored += r.censored;
    }
    ++result.evaluations;
    McEstimate e = summarize(lengths, censored);
    std::ostringstream line;
    line << "calibrate: threshold " << threshold_from_log(spec.kind, log_threshold) << " ARL "
         << e.mean << " +- " << e.std_error;
    report(options.mc, line.str());
    return e;
  };

  simulate_to(hi, false);
  McEstimate arl_lo = arl_at(lo);
  McEstimate arl_hi = arl_at(hi);
  int expansions = 0;
  while (arl_lo.mean > target_a || arl_hi.mean < target_a) {
    if (expansions == options.max_expansions) {
      std::ostringstream msg;
      msg << "calibrate_threshold: target ARL " << target_a << " not bracketed by thresholds "
          << threshold_from_log(spec.kind, lo) << " (ARL " << arl_lo.mean << ") and "
          << threshold_from_log(spec.kind, hi) << " (ARL " << arl_hi.mean << ") after "
          << expansions << " expansions";
      throw CalibrationError(msg.str());
    }
    ++expansions;
    const double width = hi - lo;
    if (arl_lo.mean > target_a) {
      lo -= width;
      arl_lo = arl_at(lo);
    } else {
      hi += width;
      simulate_to(hi, true);
      arl_hi = arl_at(hi);
    }
  }
  result.bracket = {threshold_from_log(spec.kind, lo), threshold_from_log(spec.kind, hi)};

  auto close_enough = [&](const McEstimate& e) {
    return std::abs(e.mean - target_a) / target_a <= options.rel_tol;
  };
  double best_l = std::abs(arl_lo.mean - target_a) <= std::abs(arl_hi.mean - target_a) ? lo : hi;
  McEstimate best = best_l == lo ? arl_lo : arl_hi;

  for (int it = 0; it < options.max_iterations && !close_enough(best); ++it) {
    const double mid = 0.5 * (lo + hi);
    const McEstimate e = arl_at(mid);
    if (std::abs(e.mean - target_a) < std::abs(best.mean - target_a)) {
      best = e;
      best_l = mid;
    }
    if (e.mean < target_a) lo = mid;
    else hi = mid;
  }
  result.threshold_b = threshold_from_log(spec.kind, best_l);
  result.achieved_arl = best;
  result.converged = close_enough(best);
  return result;
}

OptimalCResult optimal_c_simulation(const DetectorSpec& base, double target_a,
                                    const MeanVector& mu_post, const std::vector<double>& grid,
                                    std::uint64_t delay_replications,
                                    const CalibrationOptions& calibration) {
  if (grid.empty()) throw std::invalid_argument("optimal_c_simulation: grid is empty");
  if (base.kind != DetectorKind::srrs) {
    throw std::invalid_argument("optimal_c_simulation: base detector must be srrs");
  }
  OptimalCResult out;
  for (double c : grid) {
    const DetectorSpec spec = with_linear_c(base, c);
    CSweepRow row;
    row.c = c;
    row.calibration = calibrate_threshold(spec, target_a, calibration);
    row.delay = estimate_delay(spec, row.calibration.threshold_b, mu_post, delay_replications,
                               calibration.seed + 1, kDefaultDelayCap, calibration.mc);
    std::ostringstream line;
    line << "sweep-c: c " << c << " B " << row.calibration.threshold_b << " delay "
         << row.delay.mean << " +- " << row.delay.std_error;
    report(calibration.mc, line.str());
    if (out.table.empty() || row.delay.mean < out.delay.mean) {
      out.c_opt = c;
      out.delay = row.delay;
    }
    out.table.push_back(std::move(row));
  }
  return out;
}

std::vector<FixedThresholdRow> fixed_threshold_sweep(
    const DetectorSpec& base, const std::vector<double>& grid, const std::vector<double>& thresholds,
    const MeanVector& mu_post, std::uint64_t replications, std::uint64_t seed,
    std::uint64_t null_cap, const McOptions& options) {
  std::vector<FixedThresholdRow> rows;
  for (double c : grid) {
    const DetectorSpec spec = with_linear_c(base, c);
    for (double b : thresholds) {
      FixedThresholdRow row;
      row.c = c;
      row.threshold = b;
      row.arl = estimate_arl(spec, b, replications, seed, null_cap, options);
      row.delay = estimate_delay(spec, b, mu_post, replications, seed + 1, kDefaultDelayCap, options);
      rows.push_back(row);
    }
  }
  return rows;
}

McEstimate sprt_false_alarm_fraction(const DetectorSpec& spec, double b, std::uint64_t replications,
                                     std::uint64_t seed_base, std::uint64_t cap,
                                     double futility_margin, const McOptions& options) {
  if (spec.kind != DetectorKind::sprt) {
    throw std::invalid_argument("sprt_false_alarm_fraction: detector must be sprt");
  }
  if (replications < 2) throw std::invalid_argument("sprt_false_alarm_fraction: replications must be >= 2");
  if (!(futility_margin > 0.0)) {
    throw std::invalid_argument("sprt_false_alarm_fraction: futility margin must be positive");
  }
  spec.validate();
  const Scenario scenario = Scenario::null(spec.model, cap);
  std::vector<double> alarms(replications, 0.0);
  std::vector<char> undecided(replications, 0);
  parallel_for(replications, options.threads, [&](std::size_t i) {
    SprtState s = SprtState::make(spec.model, spec.rule, b);
    ObservationSource source(scenario, seed_base, i);
    for (std::uint64_t n = 1; n <= cap; ++n) {
      const StepResult r = sprt_step(s, source.next(n));
      if (r.alarmed) {
        alarms[i] = 1.0;
        return;
      }
      if (r.log_stat < b - futility_margin) return;
    }
    undecided[i] = 1;
  });
  return summarize(alarms, static_cast<std::uint64_t>(std::count(undecided.begin(), undecided.end(), 1)));
}

// ---------------------------------------------------------------------------

namespace {

template <class Noise>
std::vector<double> q_measure_run(double c, double omega, double mu_hat_1, std::size_t count,
                                  Noise noise) {
  std::vector<double> mu_hat;
  mu_hat.reserve(count);
  mu_hat.push_back(mu_hat_1);
  long double sum = 0.0L;
  for (std::size_t n = 1; n < count; ++n) {
    sum += mu_hat.back() + noise(n - 1);
    mu_hat.push_back(omega + c * (static_cast<double>(sum / n) - omega));
  }
  return mu_hat;
}

void require_unit_c(double c, const char* who) {
  if (!(c >= 0.0) || c > 1.0) throw std::invalid_argument(std::string(who) + ": c must lie in [0, 1]");
}

}  // namespace

std::vector<double> q_measure_trajectory(double c, double omega, std::uint64_t n_steps,
                                         std::uint64_t seed) {
  require_unit_c(c, "q_measure_trajectory");
  if (n_steps < 1) throw std::invalid_argument("q_measure_trajectory: n_steps must be >= 1");
  CounterRng rng = make_rng(seed, 0);
  std::normal_distribution<double> normal;
  return q_measure_run(c, omega, 0.0, n_steps, [&](std::size_t) { return normal(rng); });
}

std::vector<double> q_measure_from_noise(double c, double omega, double mu_hat_1,
                                         const std::vector<double>& z) {
  require_unit_c(c, "q_measure_from_noise");
  return q_measure_run(c, omega, mu_hat_1, z.size() + 1, [&](std::size_t i) { return z[i]; });
}

ShrinkageCoefficients shrinkage_coefficients(std::uint64_t n, double c) {
  if (n < 1 || n > 1000000) throw std::invalid_argument("shrinkage_coefficients: n must lie in [1, 1e6]");
  if (!(c > 0.0) || c > 1.0) throw std::invalid_argument("shrinkage_coefficients: c must lie in (0, 1]");
  ShrinkageCoefficients out;
  out.a.assign(n + 1, 0.0);

  double log_a0 = 0.0;
  for (std::uint64_t j = 1; j <= n; ++j) {
    log_a0 += std::log(static_cast<double>(j - 1) + c) - std::log(static_cast<double>(j));
  }
  out.a[0] = std::exp(log_a0);

  const double log_lead = std::log(c / static_cast<double>(n));
  out.a[n] = c / static_cast<double>(n);
  long double sum_sq = static_cast<long double>(out.a[n]) * out.a[n];
  double log_prod = 0.0;
  for (std::uint64_t i = n - 1; i >= 1; --i) {
    log_prod += std::log1p(c / static_cast<double>(i));
    out.a[i] = std::exp(log_lead + log_prod);
    sum_sq += static_cast<long double>(out.a[i]) * out.a[i];
  }
  out.sum_sq = static_cast<double>(sum_sq);
  return out;
}

}  // namespace shrinkdetect
