#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "shrinkdetect/estimators.hpp"
#include "shrinkdetect/models.hpp"

namespace shrinkdetect {

/// Outcome of feeding one observation vector to a detector.
///
/// `log_stat` is on the scale the alarm threshold is compared against: the
/// log of the Shiryaev-Roberts type statistic for SRRS, known-parameter SR and
/// the recursive scheme, log Lambda_n for the SPRT, and the aggregated CUSUM
/// value for CUSUM.
struct StepResult {
  double log_stat;
  bool alarmed;
};

/// Raised when a detector is stepped in a state that forbids it (after an
/// alarm, or when the SRRS candidate bank would exceed its cap).
class DetectorStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// log(1 + e^y), with log(1 + e^{-inf}) = 0.
double log1p_exp(double y);

/// log(sum_i e^{v_i}) by max-shift. Returns -inf for an empty input.
double log_sum_exp(std::span<const double> values);

// ---------------------------------------------------------------------------
// SPRT with plug-in estimates

struct SprtState {
  ModelSpec model;
  EstimatorRule rule;
  double b = 0.0;
  RunningStats stats;
  double log_lambda = 0.0;
  std::uint64_t time = 0;
  bool alarmed = false;
  std::uint64_t floor_events = 0;

  static SprtState make(ModelSpec model, EstimatorRule rule, double b);
};

StepResult sprt_step(SprtState& state, std::span<const double> x);

// ---------------------------------------------------------------------------
// SRRS: Shiryaev-Roberts sum over every candidate change time m <= n, each
// with its own plug-in estimate from X_m .. X_{n-1}.

enum class OverflowPolicy { error, drop_oldest };

struct SrrsState {
  ModelSpec model;
  EstimatorRule rule;
  double log_threshold = 0.0;
  std::uint64_t time = 0;

  // Candidate bank, oldest first. Candidate j was born at birth[j]; its
  // window sums occupy sums[j*p .. j*p + p).
  std::vector<std::uint64_t> birth;
  std::vector<double> sums;
  std::vector<double> log_lambda;

  std::optional<std::size_t> max_candidates;
  OverflowPolicy overflow = OverflowPolicy::error;
  std::uint64_t dropped_candidates = 0;
  std::uint64_t floor_events = 0;
  bool alarmed = false;
  double last_log_stat = -std::numeric_limits<double>::infinity();

  static SrrsState make(ModelSpec model, EstimatorRule rule, double threshold_b,
                        std::optional<std::size_t> max_candidates = std::nullopt,
                        OverflowPolicy overflow = OverflowPolicy::error);

  std::size_t candidate_count() const { return birth.size(); }

  /// Window statistics of candidate j as of the last completed step; the
  /// window holds X_m .. X_time.
  RunningStats candidate_stats(std::size_t j) const;
};

StepResult srrs_step(SrrsState& state, std::span<const double> x);

/// Log SRRS statistic for every n, recomputed from the raw observations by
/// direct triangular products (no incremental state). Intended for n <= 50.
std::vector<double> srrs_stat_bruteforce(const std::vector<MeanVector>& observations,
                                         const EstimatorRule& rule, const ModelSpec& model);

// ---------------------------------------------------------------------------
// Shiryaev-Roberts with known post-change means: R_n = (1 + R_{n-1}) LR_n.

struct KnownSrState {
  ModelSpec model;
  MeanVector mu_known;
  double log_threshold = 0.0;
  double log_r = -std::numeric_limits<double>::infinity();
  std::uint64_t time = 0;

  static KnownSrState make(ModelSpec model, MeanVector mu_known, double threshold_b);
};

StepResult known_sr_step(KnownSrState& state, std::span<const double> x);

// ---------------------------------------------------------------------------
// Recursive SR scheme with thresholded EWMA estimates. O(p) memory.

struct RecursiveState {
  ModelSpec model;
  double delta = 0.9;
  MeanVector omega;
  double log_threshold = 0.0;
  double log_r = -std::numeric_limits<double>::infinity();
  MeanVector mu_tilde;
  std::uint64_t time = 0;

  static RecursiveState make(ModelSpec model, double delta, MeanVector omega, double threshold_b);
};

StepResult recursive_step(RecursiveState& state, std::span<const double> x);

// ---------------------------------------------------------------------------
// Per-stream CUSUM with MAX or SUM aggregation.

enum class CusumAggregate { max, sum };

struct CusumState {
  ModelSpec model;
  MeanVector mu1;
  CusumAggregate aggregate = CusumAggregate::max;
  double b = 0.0;
  std::vector<double> w;
  std::uint64_t time = 0;

  static CusumState make(ModelSpec model, MeanVector mu1, CusumAggregate aggregate, double b);
};

StepResult cusum_step(CusumState& state, std::span<const double> x);

// ---------------------------------------------------------------------------
// Uniform handling

using DetectorState = std::variant<SrrsState, SprtState, KnownSrState, RecursiveState, CusumState>;

StepResult step(DetectorState& state, std::span<const double> x);
std::uint64_t elapsed(const DetectorState& state);

enum class DetectorKind { srrs, sprt, known_sr, recursive, cusum_max, cusum_sum };

std::string to_string(DetectorKind kind);
DetectorKind detector_kind_from_string(const std::string& name);

/// Everything needed to build a fresh detector except its threshold.
///
/// `rule` drives srrs and sprt; recursive uses rule.delta and rule.omega;
/// known_sr and the CUSUM pair use `mu_known` as the assumed post-change mean.
struct DetectorSpec {
  DetectorKind kind = DetectorKind::srrs;
  ModelSpec model;
  EstimatorRule rule;
  MeanVector mu_known;
  std::optional<std::size_t> max_candidates;
  OverflowPolicy overflow = OverflowPolicy::error;

  void validate() const;

  friend bool operator==(const DetectorSpec&, const DetectorSpec&) = default;
};

/// True when the detector's threshold is already on the log scale (SPRT b,
/// CUSUM b); false when it is a likelihood-ratio level B.
bool threshold_is_log_scale(DetectorKind kind);

/// Threshold in detector units mapped to the scale of StepResult::log_stat.
double log_threshold_for(DetectorKind kind, double threshold);

/// Inverse of log_threshold_for.
double threshold_from_log(DetectorKind kind, double log_threshold);

DetectorState make_detector(const DetectorSpec& spec, double threshold);

}  // namespace shrinkdetect
