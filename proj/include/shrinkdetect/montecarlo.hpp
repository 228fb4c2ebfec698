#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shrinkdetect/detectors.hpp"
#include "shrinkdetect/models.hpp"
#include "shrinkdetect/rng.hpp"

namespace shrinkdetect {

/// Data-generating setup for one run.
///
/// `change_time` empty means no change ever happens (the null scenario).
/// Streams follow f_{mu0} before the change and f_{mu_post[k]} from the
/// change time on.
struct Scenario {
  ModelSpec model;
  MeanVector mu_post;
  std::optional<std::uint64_t> change_time;
  std::uint64_t horizon_cap = 10000;

  static Scenario null(ModelSpec model, std::uint64_t cap);
  static Scenario immediate_change(ModelSpec model, MeanVector mu_post, std::uint64_t cap);

  bool is_null() const { return !change_time.has_value(); }
  void validate() const;
};

struct RunLength {
  std::uint64_t length = 0;
  bool censored = false;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double sd = 0.0;
  std::uint64_t replications = 0;
  double censored_fraction = 0.0;

  bool flagged() const { return censored_fraction > 0.0; }
};

/// Mean, sample sd and sd / sqrt(n) of `values`; needs at least two values.
McEstimate summarize(const std::vector<double>& values, std::uint64_t censored = 0);

inline constexpr std::uint64_t kDefaultDelayCap = 10000;
inline constexpr double kNullCapMultiple = 20.0;

/// Null-run cap for a target ARL: 20 A.
std::uint64_t default_null_cap(double target_a);

struct McOptions {
  unsigned threads = 0;  // 0: SHRINKDETECT_THREADS or hardware concurrency
  std::function<void(const std::string&)> progress;
};

/// Draws successive observation vectors for one replication.
class ObservationSource {
 public:
  ObservationSource(const Scenario& scenario, std::uint64_t seed, std::uint64_t replication);

  /// Observation for time n (1-based, called with n = 1, 2, ...).
  const std::vector<double>& next(std::uint64_t n);

 private:
  const Scenario* scenario_;
  CounterRng rng_;
  std::normal_distribution<double> normal_;
  std::vector<std::poisson_distribution<int>> pre_;
  std::vector<std::poisson_distribution<int>> post_;
  std::vector<double> x_;
};

/// Steps a fresh detector on one replication until alarm or the scenario cap.
RunLength simulate_run_length(const DetectorSpec& spec, double threshold, const Scenario& scenario,
                              std::uint64_t seed, std::uint64_t replication = 0);

/// Running maximum of a replication's statistic, stored at each new record.
///
/// The run length at any log-threshold L up to `top` is the time of the first
/// record >= L, so one simulation serves every threshold below `top`.
struct RecordPath {
  std::vector<std::uint64_t> times;
  std::vector<double> values;
  std::uint64_t simulated = 0;
  bool reached_top = false;

  RunLength run_length_at(double log_threshold, std::uint64_t cap) const;
};

/// Simulates with no alarm until the statistic reaches `log_top` or the
/// scenario cap.
RecordPath simulate_record_path(const DetectorSpec& spec, double log_top, const Scenario& scenario,
                                std::uint64_t seed, std::uint64_t replication);

McEstimate estimate_arl(const DetectorSpec& spec, double threshold, std::uint64_t replications,
                        std::uint64_t seed_base, std::optional<std::uint64_t> cap = std::nullopt,
                        const McOptions& options = {});

McEstimate estimate_delay(const DetectorSpec& spec, double threshold, const MeanVector& mu_post,
                          std::uint64_t replications, std::uint64_t seed_base,
                          std::uint64_t cap = kDefaultDelayCap, const McOptions& options = {});

struct CalibrationResult {
  double threshold_b = 0.0;
  McEstimate achieved_arl;
  double target_a = 0.0;
  std::uint64_t evaluations = 0;
  std::pair<double, double> bracket;  // detector units
  bool converged = false;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibrationOptions {
  double rel_tol = 0.02;
  std::uint64_t replications = 500;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> cap;  // default 20 A
  int max_expansions = 3;
  int max_iterations = 60;
  McOptions mc;
};

/// Bisection on the log threshold for E_inf(N) = target_a, using the same
/// replications at every candidate threshold.
CalibrationResult calibrate_threshold(const DetectorSpec& spec, double target_a,
                                      const CalibrationOptions& options);

struct CSweepRow {
  double c = 0.0;
  CalibrationResult calibration;
  McEstimate delay;
};

struct OptimalCResult {
  double c_opt = 0.0;
  McEstimate delay;
  std::vector<CSweepRow> table;
};

/// For every c in `grid`: build the linear-shrinkage SRRS from `base`,
/// calibrate it to target_a, then estimate its delay at mu_post. Returns the
/// c with the smallest delay (ties to the smaller c).
OptimalCResult optimal_c_simulation(const DetectorSpec& base, double target_a,
                                    const MeanVector& mu_post, const std::vector<double>& grid,
                                    std::uint64_t delay_replications,
                                    const CalibrationOptions& calibration);

struct FixedThresholdRow {
  double c = 0.0;
  double threshold = 0.0;
  McEstimate arl;
  McEstimate delay;
};

/// ARL and delay of linear-shrinkage SRRS on a (c, B) grid.
std::vector<FixedThresholdRow> fixed_threshold_sweep(
    const DetectorSpec& base, const std::vector<double>& grid, const std::vector<double>& thresholds,
    const MeanVector& mu_post, std::uint64_t replications, std::uint64_t seed,
    std::uint64_t null_cap, const McOptions& options = {});

/// Fraction of null runs in which the SPRT ever crosses b within `cap` steps.
///
/// A run is abandoned once log Lambda falls below b - futility_margin: by
/// Ville's inequality it crosses b afterwards with probability at most
/// e^{-futility_margin}. censored_fraction counts runs that reached the cap
/// undecided.
McEstimate sprt_false_alarm_fraction(const DetectorSpec& spec, double b, std::uint64_t replications,
                                     std::uint64_t seed_base, std::uint64_t cap,
                                     double futility_margin = 30.0, const McOptions& options = {});

/// mu_hat_1 .. mu_hat_{n_steps} under the plug-in measure: X_n = mu_hat_n + Z_n
/// with mu_hat_{n+1} = omega + c (mean(X_1..X_n) - omega) and mu_hat_1 = 0.
std::vector<double> q_measure_trajectory(double c, double omega, std::uint64_t n_steps,
                                         std::uint64_t seed);

/// Same recursion driven by given noise values; returns mu_hat_1 .. mu_hat_{z.size()+1}.
std::vector<double> q_measure_from_noise(double c, double omega, double mu_hat_1,
                                         const std::vector<double>& z);

struct ShrinkageCoefficients {
  std::vector<double> a;  // a_{n,0} .. a_{n,n}
  double sum_sq = 0.0;    // sum over i = 1..n of a_{n,i}^2
};

/// Coefficients of mu_hat_{n+1} - omega = a_{n0} (mu_hat_1 - omega) + sum_i a_{ni} Z_i.
ShrinkageCoefficients shrinkage_coefficients(std::uint64_t n, double c);

}  // namespace shrinkdetect
