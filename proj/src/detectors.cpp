#include "shrinkdetect/detectors.hpp"

#include <algorithm>
#include <cmath>

namespace shrinkdetect {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_length(std::span<const double> x, std::size_t p, const char* who) {
  if (x.size() != p) {
    throw std::invalid_argument(std::string(who) + ": observation has " + std::to_string(x.size()) +
                                " entries, expected " + std::to_string(p));
  }
}

void require_poisson_counts(const ModelSpec& model, std::span<const double> x) {
  if (model.family != Family::poisson) return;
  for (double v : x) {
    if (!(v >= 0.0) || v != std::floor(v)) {
      throw std::domain_error("Poisson observation must be a nonnegative integer");
    }
  }
}

double llr_sum(const ModelSpec& model, std::span<const double> mu_hat, std::span<const double> x,
               std::uint64_t* floor_events) {
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) total += llr_increment(model, mu_hat[k], x[k], floor_events);
  return total;
}

struct GaussianLlr {
  double operator()(double m, double x) const { return m * x - 0.5 * m * m; }
};

// Observations are validated once per step, so the per-candidate path skips it.
struct PoissonLlr {
  double mu0;
  double log_mu0;
  std::uint64_t* floor_events;

  double operator()(double m, double x) const {
    if (m < 0.0) m = 0.0;
    if (x == 0.0) return mu0 - m;
    if (m < kPoissonMeanFloor) {
      m = kPoissonMeanFloor;
      ++*floor_events;
    }
    return x * (std::log(m) - log_mu0) - (m - mu0);
  }
};

// Adds this step's log factor to every candidate born before `time` and folds
// x into its window. `estimate(k, y)` maps stream k's window mean y to the
// plug-in estimate.
template <class Estimate, class Llr>
void advance_candidates(SrrsState& s, std::span<const double> x, std::size_t existing,
                        Estimate estimate, Llr llr) {
  const std::size_t p = s.model.p;
  const double* xs = x.data();
  for (std::size_t j = 0; j < existing; ++j) {
    const double inv = 1.0 / static_cast<double>(s.time - s.birth[j]);
    double* sums = s.sums.data() + j * p;
    double inc = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      inc += llr(estimate(k, sums[k] * inv), xs[k]);
      sums[k] += xs[k];
    }
    s.log_lambda[j] += inc;
  }
}

template <class Llr>
void advance_with_rule(SrrsState& s, std::span<const double> x, std::size_t existing, Llr llr) {
  const EstimatorRule& r = s.rule;
  const double* omega = r.omega.data();
  const double mu0 = s.model.mu0;
  switch (r.kind) {
    case RuleKind::mle:
      advance_candidates(s, x, existing, [](std::size_t, double y) { return y; }, llr);
      return;
    case RuleKind::linear_shrink: {
      const double c = r.c;
      advance_candidates(
          s, x, existing, [=](std::size_t k, double y) { return c * y + (1.0 - c) * omega[k]; },
          llr);
      return;
    }
    case RuleKind::hard_threshold:
      advance_candidates(
          s, x, existing, [=](std::size_t k, double y) { return y >= omega[k] ? y : mu0; }, llr);
      return;
    case RuleKind::soft_threshold:
      advance_candidates(
          s, x, existing,
          [=](std::size_t k, double y) { return y >= omega[k] ? y - omega[k] : mu0; }, llr);
      return;
    case RuleKind::affine_threshold: {
      const double* a = r.a.data();
      const double b = r.b;
      const double c0 = r.c0;
      advance_candidates(
          s, x, existing,
          [=](std::size_t k, double y) { return y >= omega[k] ? a[k] + b * y : c0; }, llr);
      return;
    }
    case RuleKind::js_adaptive: {
      const std::size_t p = s.model.p;
      std::vector<double> mu_hat(p);
      for (std::size_t j = 0; j < existing; ++j) {
        double* sums = s.sums.data() + j * p;
        estimate_into(r, s.model, std::span<const double>(sums, p), s.time - s.birth[j], mu_hat);
        double inc = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
          inc += llr(mu_hat[k], x[k]);
          sums[k] += x[k];
        }
        s.log_lambda[j] += inc;
      }
      return;
    }
    case RuleKind::ewma: break;
  }
  throw std::invalid_argument("srrs: the ewma rule is not an SRRS window estimator");
}

}  // namespace

double log1p_exp(double y) {
  if (y == -kInf) return 0.0;
  if (y > 0.0) return y + std::log1p(std::exp(-y));
  return std::log1p(std::exp(y));
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -kInf;
  const double top = *std::max_element(values.begin(), values.end());
  if (top == -kInf || top == kInf) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

// ---------------------------------------------------------------------------

SprtState SprtState::make(ModelSpec model, EstimatorRule rule, double b) {
  model.validate();
  rule.validate(model.p);
  if (rule.kind == RuleKind::ewma) throw std::invalid_argument("sprt: ewma rule not supported");
  SprtState s;
  s.stats = RunningStats(model.p);
  s.model = std::move(model);
  s.rule = std::move(rule);
  s.b = b;
  return s;
}

StepResult sprt_step(SprtState& s, std::span<const double> x) {
  if (s.alarmed) throw DetectorStateError("sprt_step: detector has already alarmed");
  require_length(x, s.model.p, "sprt_step");
  require_poisson_counts(s.model, x);
  const MeanVector mu_hat = estimate(s.rule, s.stats, s.model);
  s.log_lambda += llr_sum(s.model, mu_hat, x, &s.floor_events);
  s.stats.update(x);
  ++s.time;
  s.alarmed = s.log_lambda >= s.b;
  return {s.log_lambda, s.alarmed};
}

// ---------------------------------------------------------------------------

SrrsState SrrsState::make(ModelSpec model, EstimatorRule rule, double threshold_b,
                          std::optional<std::size_t> max_candidates, OverflowPolicy overflow) {
  model.validate();
  rule.validate(model.p);
  if (rule.kind == RuleKind::ewma) throw std::invalid_argument("srrs: ewma rule not supported");
  if (max_candidates && *max_candidates == 0) {
    throw std::invalid_argument("srrs: candidate cap must be at least 1");
  }
  SrrsState s;
  s.model = std::move(model);
  s.rule = std::move(rule);
  s.log_threshold = log_threshold_for(DetectorKind::srrs, threshold_b);
  s.max_candidates = max_candidates;
  s.overflow = overflow;
  return s;
}

RunningStats SrrsState::candidate_stats(std::size_t j) const {
  RunningStats stats(model.p);
  std::copy_n(sums.begin() + static_cast<std::ptrdiff_t>(j * model.p), model.p, stats.sums.begin());
  stats.count = time - birth[j] + 1;
  return stats;
}

StepResult srrs_step(SrrsState& s, std::span<const double> x) {
  if (s.alarmed) throw DetectorStateError("srrs_step: detector has already alarmed");
  const std::size_t p = s.model.p;
  require_length(x, p, "srrs_step");
  require_poisson_counts(s.model, x);

  if (s.max_candidates && s.birth.size() >= *s.max_candidates) {
    if (s.overflow == OverflowPolicy::error) {
      throw DetectorStateError("srrs_step: candidate bank exceeds its cap of " +
                               std::to_string(*s.max_candidates));
    }
    const std::size_t drop = s.birth.size() - *s.max_candidates + 1;
    s.birth.erase(s.birth.begin(), s.birth.begin() + static_cast<std::ptrdiff_t>(drop));
    s.log_lambda.erase(s.log_lambda.begin(), s.log_lambda.begin() + static_cast<std::ptrdiff_t>(drop));
    s.sums.erase(s.sums.begin(), s.sums.begin() + static_cast<std::ptrdiff_t>(drop * p));
    s.dropped_candidates += drop;
  }

  ++s.time;
  const std::size_t existing = s.birth.size();
  if (s.model.family == Family::gaussian_unit_var) {
    advance_with_rule(s, x, existing, GaussianLlr{});
  } else {
    advance_with_rule(s, x, existing, PoissonLlr{s.model.mu0, std::log(s.model.mu0), &s.floor_events});
  }

  // Candidate m = n: empty window, estimate mu0, unit factor.
  s.birth.push_back(s.time);
  s.sums.insert(s.sums.end(), x.begin(), x.end());
  s.log_lambda.push_back(0.0);

  s.last_log_stat = log_sum_exp(s.log_lambda);
  s.alarmed = s.last_log_stat >= s.log_threshold;
  return {s.last_log_stat, s.alarmed};
}

std::vector<double> srrs_stat_bruteforce(const std::vector<MeanVector>& observations,
                                         const EstimatorRule& rule, const ModelSpec& model) {
  const std::size_t horizon = observations.size();
  std::vector<double> out;
  out.reserve(horizon);
  for (std::size_t n = 1; n <= horizon; ++n) {
    long double total = 0.0L;
    for (std::size_t m = 1; m <= n; ++m) {
      double log_lambda = 0.0;
      for (std::size_t ell = m; ell <= n; ++ell) {
        RunningStats window(model.p);
        for (std::size_t i = m; i < ell; ++i) {
          for (std::size_t k = 0; k < model.p; ++k) window.sums[k] += observations[i - 1][k];
        }
        window.count = ell - m;
        const MeanVector mu_hat = estimate(rule, window, model);
        for (std::size_t k = 0; k < model.p; ++k) {
          log_lambda += llr_increment(model, mu_hat[k], observations[ell - 1][k]);
        }
      }
      total += std::exp(static_cast<long double>(log_lambda));
    }
    out.push_back(static_cast<double>(std::log(total)));
  }
  return out;
}

// ---------------------------------------------------------------------------

KnownSrState KnownSrState::make(ModelSpec model, MeanVector mu_known, double threshold_b) {
  model.validate();
  if (mu_known.size() != model.p) throw std::invalid_argument("known_sr: mu_known must have p entries");
  KnownSrState s;
  s.model = std::move(model);
  s.mu_known = std::move(mu_known);
  s.log_threshold = log_threshold_for(DetectorKind::known_sr, threshold_b);
  return s;
}

StepResult known_sr_step(KnownSrState& s, std::span<const double> x) {
  require_length(x, s.model.p, "known_sr_step");
  ++s.time;
  s.log_r = log1p_exp(s.log_r) + llr_sum(s.model, s.mu_known, x, nullptr);
  return {s.log_r, s.log_r >= s.log_threshold};
}

// ---------------------------------------------------------------------------

RecursiveState RecursiveState::make(ModelSpec model, double delta, MeanVector omega,
                                    double threshold_b) {
  model.validate();
  EstimatorRule::ewma(delta, omega).validate(model.p);
  RecursiveState s;
  s.mu_tilde = model.null_vector();
  s.model = std::move(model);
  s.delta = delta;
  s.omega = std::move(omega);
  s.log_threshold = log_threshold_for(DetectorKind::recursive, threshold_b);
  return s;
}

StepResult recursive_step(RecursiveState& s, std::span<const double> x) {
  const std::size_t p = s.model.p;
  require_length(x, p, "recursive_step");
  ++s.time;
  if (s.time == 1) {
    s.log_r = -kInf;
  } else {
    double log_factor = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      const double mu_hat = s.mu_tilde[k] >= s.omega[k] ? s.mu_tilde[k] : s.model.mu0;
      log_factor += llr_increment(s.model, mu_hat, x[k]);
    }
    s.log_r = log1p_exp(s.log_r) + log_factor;
  }
  for (std::size_t k = 0; k < p; ++k) s.mu_tilde[k] = s.delta * s.mu_tilde[k] + (1.0 - s.delta) * x[k];
  return {s.log_r, s.log_r >= s.log_threshold};
}

// ---------------------------------------------------------------------------

CusumState CusumState::make(ModelSpec model, MeanVector mu1, CusumAggregate aggregate, double b) {
  model.validate();
  if (mu1.size() != model.p) throw std::invalid_argument("cusum: mu1 must have p entries");
  CusumState s;
  s.w.assign(model.p, 0.0);
  s.model = std::move(model);
  s.mu1 = std::move(mu1);
  s.aggregate = aggregate;
  s.b = b;
  return s;
}

StepResult cusum_step(CusumState& s, std::span<const double> x) {
  require_length(x, s.model.p, "cusum_step");
  ++s.time;
  double stat = 0.0;
  for (std::size_t k = 0; k < s.w.size(); ++k) {
    s.w[k] = std::max(0.0, s.w[k] + llr_increment(s.model, s.mu1[k], x[k]));
    stat = s.aggregate == CusumAggregate::max ? std::max(stat, s.w[k]) : stat + s.w[k];
  }
  return {stat, stat >= s.b};
}

// ---------------------------------------------------------------------------

StepResult step(DetectorState& state, std::span<const double> x) {
  return std::visit(
      [&](auto& s) -> StepResult {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SrrsState>) return srrs_step(s, x);
        else if constexpr (std::is_same_v<T, SprtState>) return sprt_step(s, x);
        else if constexpr (std::is_same_v<T, KnownSrState>) return known_sr_step(s, x);
        else if constexpr (std::is_same_v<T, RecursiveState>) return recursive_step(s, x);
        else return cusum_step(s, x);
      },
      state);
}

std::uint64_t elapsed(const DetectorState& state) {
  return std::visit([](const auto& s) { return s.time; }, state);
}

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::srrs: return "srrs";
    case DetectorKind::sprt: return "sprt";
    case DetectorKind::known_sr: return "known_sr";
    case DetectorKind::recursive: return "recursive";
    case DetectorKind::cusum_max: return "cusum_max";
    case DetectorKind::cusum_sum: return "cusum_sum";
  }
  return "unknown";
}

DetectorKind detector_kind_from_string(const std::string& name) {
  for (DetectorKind k : {DetectorKind::srrs, DetectorKind::sprt, DetectorKind::known_sr,
                         DetectorKind::recursive, DetectorKind::cusum_max, DetectorKind::cusum_sum}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown detector '" + name + "'");
}

void DetectorSpec::validate() const {
  model.validate();
  switch (kind) {
    case DetectorKind::srrs:
    case DetectorKind::sprt:
      rule.validate(model.p);
      if (rule.kind == RuleKind::ewma) {
        throw std::invalid_argument(to_string(kind) + ": ewma rule belongs to the recursive detector");
      }
      break;
    case DetectorKind::recursive:
      if (rule.kind != RuleKind::ewma) throw std::invalid_argument("recursive: rule must be ewma");
      rule.validate(model.p);
      break;
    case DetectorKind::known_sr:
    case DetectorKind::cusum_max:
    case DetectorKind::cusum_sum:
      if (mu_known.size() != model.p) {
        throw std::invalid_argument(to_string(kind) + ": mu_known must have p entries");
      }
      if (model.family == Family::poisson) {
        for (double m : mu_known) {
          if (!(m > 0.0)) throw std::invalid_argument(to_string(kind) + ": Poisson means must be > 0");
        }
      }
      break;
  }
}

bool threshold_is_log_scale(DetectorKind kind) {
  return kind == DetectorKind::sprt || kind == DetectorKind::cusum_max ||
         kind == DetectorKind::cusum_sum;
}

double log_threshold_for(DetectorKind kind, double threshold) {
  if (threshold_is_log_scale(kind)) return threshold;
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold B must be positive");
  return std::log(threshold);
}

double threshold_from_log(DetectorKind kind, double log_threshold) {
  return threshold_is_log_scale(kind) ? log_threshold : std::exp(log_threshold);
}

DetectorState make_detector(const DetectorSpec& spec, double threshold) {
  spec.validate();
  switch (spec.kind) {
    case DetectorKind::srrs:
      return SrrsState::make(spec.model, spec.rule, threshold, spec.max_candidates, spec.overflow);
    case DetectorKind::sprt: return SprtState::make(spec.model, spec.rule, threshold);
    case DetectorKind::known_sr: return KnownSrState::make(spec.model, spec.mu_known, threshold);
    case DetectorKind::recursive:
      return RecursiveState::make(spec.model, spec.rule.delta, spec.rule.omega, threshold);
    case DetectorKind::cusum_max:
      return CusumState::make(spec.model, spec.mu_known, CusumAggregate::max, threshold);
    case DetectorKind::cusum_sum:
      return CusumState::make(spec.model, spec.mu_known, CusumAggregate::sum, threshold);
  }
  throw std::invalid_argument("make_detector: unknown detector kind");
}

}  // namespace shrinkdetect
