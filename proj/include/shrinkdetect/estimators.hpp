#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shrinkdetect/models.hpp"

namespace shrinkdetect {

enum class RuleKind {
  mle,
  linear_shrink,
  js_adaptive,
  hard_threshold,
  soft_threshold,
  affine_threshold,
  ewma,
};

std::string to_string(RuleKind kind);
RuleKind rule_kind_from_string(const std::string& name);

/// Post-change estimator selection and its parameters.
///
/// Only the fields relevant to `kind` are read: `c` for linear shrinkage,
/// `omega` for everything except mle, `a`/`b`/`c0` for the affine rule and
/// `delta` for ewma. `a` holds one intercept per stream.
struct EstimatorRule {
  RuleKind kind = RuleKind::mle;
  double c = 1.0;
  MeanVector omega;
  MeanVector a;
  double b = 1.0;
  double c0 = 0.0;
  double delta = 0.9;
  bool clamp_js = true;

  static EstimatorRule mle();
  static EstimatorRule linear_shrink(double c, MeanVector omega);
  static EstimatorRule js_adaptive(MeanVector omega, bool clamp = true);
  static EstimatorRule hard_threshold(MeanVector omega);
  static EstimatorRule soft_threshold(MeanVector omega);
  static EstimatorRule affine_threshold(MeanVector omega, MeanVector a, double b, double c0);
  static EstimatorRule ewma(double delta, MeanVector omega);

  /// Checks parameters against a stream count. Throws std::invalid_argument.
  void validate(std::size_t p) const;

  /// Linear shrinkage with c > 1: accepted, but outside the asymptotic theory.
  bool outside_theory() const { return kind == RuleKind::linear_shrink && c > 1.0; }

  friend bool operator==(const EstimatorRule&, const EstimatorRule&) = default;
};

/// Sums and count of the observations in one estimation window.
struct RunningStats {
  std::vector<double> sums;
  std::uint64_t count = 0;

  RunningStats() = default;
  explicit RunningStats(std::size_t p) : sums(p, 0.0) {}

  void update(std::span<const double> x);
  std::size_t p() const { return sums.size(); }

  friend bool operator==(const RunningStats&, const RunningStats&) = default;
};

/// Returns `stats` with `x` added.
RunningStats stats_update(RunningStats stats, std::span<const double> x);

/// Plug-in estimate of the post-change mean from a window's sums.
/// An empty window (count == 0) yields mu0 for every rule.
MeanVector estimate(const EstimatorRule& rule, const RunningStats& stats, const ModelSpec& model);

/// Allocation-free form of estimate(); `out` must have size p.
void estimate_into(const EstimatorRule& rule, const ModelSpec& model,
                   std::span<const double> sums, std::uint64_t count, std::span<double> out);

/// The James-Stein type shrinkage factor for a window mean. Clamped to [0, 1]
/// when rule.clamp_js is set; 0 when the window mean equals omega.
double js_factor(const EstimatorRule& rule, std::span<const double> window_mean,
                 std::uint64_t count);

/// delta * current + (1 - delta) * x.
MeanVector ewma_update(std::span<const double> current, std::span<const double> x, double delta);

/// current_k if current_k >= omega_k else mu0.
MeanVector ewma_threshold(std::span<const double> current, std::span<const double> omega,
                          const ModelSpec& model);

}  // namespace shrinkdetect
