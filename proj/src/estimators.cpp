#include "shrinkdetect/estimators.hpp"

#include <algorithm>
#include <stdexcept>

namespace shrinkdetect {

std::string to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::mle: return "mle";
    case RuleKind::linear_shrink: return "linear_shrink";
    case RuleKind::js_adaptive: return "js_adaptive";
    case RuleKind::hard_threshold: return "hard_threshold";
    case RuleKind::soft_threshold: return "soft_threshold";
    case RuleKind::affine_threshold: return "affine_threshold";
    case RuleKind::ewma: return "ewma";
  }
  return "unknown";
}

RuleKind rule_kind_from_string(const std::string& name) {
  for (RuleKind k : {RuleKind::mle, RuleKind::linear_shrink, RuleKind::js_adaptive,
                     RuleKind::hard_threshold, RuleKind::soft_threshold,
                     RuleKind::affine_threshold, RuleKind::ewma}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown estimator rule '" + name + "'");
}

EstimatorRule EstimatorRule::mle() { return EstimatorRule{}; }

EstimatorRule EstimatorRule::linear_shrink(double c, MeanVector omega) {
  EstimatorRule r;
  r.kind = RuleKind::linear_shrink;
  r.c = c;
  r.omega = std::move(omega);
  return r;
}

EstimatorRule EstimatorRule::js_adaptive(MeanVector omega, bool clamp) {
  EstimatorRule r;
  r.kind = RuleKind::js_adaptive;
  r.omega = std::move(omega);
  r.clamp_js = clamp;
  return r;
}

EstimatorRule EstimatorRule::hard_threshold(MeanVector omega) {
  EstimatorRule r;
  r.kind = RuleKind::hard_threshold;
  r.omega = std::move(omega);
  return r;
}

EstimatorRule EstimatorRule::soft_threshold(MeanVector omega) {
  EstimatorRule r;
  r.kind = RuleKind::soft_threshold;
  r.omega = std::move(omega);
  return r;
}

EstimatorRule EstimatorRule::affine_threshold(MeanVector omega, MeanVector a, double b,
                                              double c0) {
  EstimatorRule r;
  r.kind = RuleKind::affine_threshold;
  r.omega = std::move(omega);
  r.a = std::move(a);
  r.b = b;
  r.c0 = c0;
  return r;
}

EstimatorRule EstimatorRule::ewma(double delta, MeanVector omega) {
  EstimatorRule r;
  r.kind = RuleKind::ewma;
  r.delta = delta;
  r.omega = std::move(omega);
  return r;
}

void EstimatorRule::validate(std::size_t p) const {
  const std::string name = to_string(kind);
  if (kind != RuleKind::mle && omega.size() != p) {
    throw std::invalid_argument(name + ": omega must have one entry per stream");
  }
  switch (kind) {
    case RuleKind::mle: break;
    case RuleKind::linear_shrink:
      if (!(c >= 0.0) || c > 1.10) {
        throw std::invalid_argument("linear_shrink: c must lie in [0, 1.10]");
      }
      break;
    case RuleKind::js_adaptive:
      if (p < 3) throw std::invalid_argument("js_adaptive: requires at least 3 streams");
      break;
    case RuleKind::affine_threshold:
      if (a.size() != p) throw std::invalid_argument("affine_threshold: a must have p entries");
      [[fallthrough]];
    case RuleKind::hard_threshold:
    case RuleKind::soft_threshold:
      for (double w : omega) {
        if (!(w > 0.0)) throw std::invalid_argument(name + ": omega entries must be positive");
      }
      break;
    case RuleKind::ewma:
      if (!(delta >= 0.0) || delta > 1.0) {
        throw std::invalid_argument("ewma: delta must lie in [0, 1]");
      }
      for (double w : omega) {
        if (!(w > 0.0)) throw std::invalid_argument("ewma: omega entries must be positive");
      }
      break;
  }
}

void RunningStats::update(std::span<const double> x) {
  if (x.size() != sums.size()) {
    throw std::invalid_argument("stats_update: observation has " + std::to_string(x.size()) +
                                " entries, expected " + std::to_string(sums.size()));
  }
  for (std::size_t k = 0; k < sums.size(); ++k) sums[k] += x[k];
  ++count;
}

RunningStats stats_update(RunningStats stats, std::span<const double> x) {
  stats.update(x);
  return stats;
}

double js_factor(const EstimatorRule& rule, std::span<const double> window_mean,
                 std::uint64_t count) {
  const std::size_t p = window_mean.size();
  if (p < 3) throw std::invalid_argument("js_adaptive: requires at least 3 streams");
  double spread = 0.0;
  for (std::size_t k = 0; k < p; ++k) {
    const double d = window_mean[k] - rule.omega[k];
    spread += d * d;
  }
  if (spread == 0.0) return 0.0;
  double c_hat = 1.0 - (static_cast<double>(p - 2) / static_cast<double>(count)) / spread;
  if (rule.clamp_js) c_hat = std::clamp(c_hat, 0.0, 1.0);
  return c_hat;
}

void estimate_into(const EstimatorRule& rule, const ModelSpec& model,
                   std::span<const double> sums, std::uint64_t count, std::span<double> out) {
  const std::size_t p = sums.size();
  if (count == 0) {
    std::fill(out.begin(), out.end(), model.mu0);
    return;
  }
  const double inv = 1.0 / static_cast<double>(count);
  switch (rule.kind) {
    case RuleKind::mle:
      for (std::size_t k = 0; k < p; ++k) out[k] = sums[k] * inv;
      return;
    case RuleKind::linear_shrink:
      for (std::size_t k = 0; k < p; ++k) {
        out[k] = rule.c * (sums[k] * inv) + (1.0 - rule.c) * rule.omega[k];
      }
      return;
    case RuleKind::js_adaptive: {
      for (std::size_t k = 0; k < p; ++k) out[k] = sums[k] * inv;
      const double c_hat = js_factor(rule, out, count);
      for (std::size_t k = 0; k < p; ++k) out[k] = rule.omega[k] + c_hat * (out[k] - rule.omega[k]);
      return;
    }
    case RuleKind::hard_threshold:
      for (std::size_t k = 0; k < p; ++k) {
        const double y = sums[k] * inv;
        out[k] = y >= rule.omega[k] ? y : model.mu0;
      }
      return;
    case RuleKind::soft_threshold:
      for (std::size_t k = 0; k < p; ++k) {
        const double y = sums[k] * inv;
        out[k] = y >= rule.omega[k] ? y - rule.omega[k] : model.mu0;
      }
      return;
    case RuleKind::affine_threshold:
      for (std::size_t k = 0; k < p; ++k) {
        const double y = sums[k] * inv;
        out[k] = y >= rule.omega[k] ? rule.a[k] + rule.b * y : rule.c0;
      }
      return;
    case RuleKind::ewma:
      throw std::invalid_argument("estimate: the ewma rule is only defined for the recursive detector");
  }
}

MeanVector estimate(const EstimatorRule& rule, const RunningStats& stats, const ModelSpec& model) {
  MeanVector out(stats.p());
  estimate_into(rule, model, stats.sums, stats.count, out);
  return out;
}

MeanVector ewma_update(std::span<const double> current, std::span<const double> x, double delta) {
  if (current.size() != x.size()) throw std::invalid_argument("ewma_update: length mismatch");
  if (!(delta >= 0.0) || delta > 1.0) throw std::invalid_argument("ewma_update: delta outside [0, 1]");
  MeanVector out(current.size());
  for (std::size_t k = 0; k < current.size(); ++k) out[k] = delta * current[k] + (1.0 - delta) * x[k];
  return out;
}

MeanVector ewma_threshold(std::span<const double> current, std::span<const double> omega,
                          const ModelSpec& model) {
  if (current.size() != omega.size()) throw std::invalid_argument("ewma_threshold: length mismatch");
  MeanVector out(current.size());
  for (std::size_t k = 0; k < current.size(); ++k) {
    out[k] = current[k] >= omega[k] ? current[k] : model.mu0;
  }
  return out;
}

}  // namespace shrinkdetect
