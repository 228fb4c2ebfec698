#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace shrinkdetect {

/// Per-stream mean vector. Used for true post-change means, shrinkage
/// targets, thresholds and plug-in estimates alike.
using MeanVector = std::vector<double>;

enum class Family { gaussian_unit_var, poisson };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

/// Thrown when a model or rule is used outside the family it is defined for.
class UnsupportedModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Distribution family, pre-change mean and stream count.
///
/// Gaussian streams are unit variance with pre-change mean 0; Poisson streams
/// require a strictly positive pre-change mean.
struct ModelSpec {
  Family family = Family::gaussian_unit_var;
  double mu0 = 0.0;
  std::size_t p = 1;

  static ModelSpec gaussian(std::size_t p);
  static ModelSpec poisson(double mu0, std::size_t p);

  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;

  MeanVector null_vector() const { return MeanVector(p, mu0); }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Smallest estimate used inside a Poisson log when the count is positive.
inline constexpr double kPoissonMeanFloor = 1e-8;

/// Log-likelihood ratio log f_{mu_hat}(x) / f_{mu0}(x) for one observation.
///
/// Negative Poisson estimates are treated as zero, and zero estimates are
/// floored at kPoissonMeanFloor when x > 0; if
/// `floor_events` is non-null it is incremented each time that happens.
double llr_increment(const ModelSpec& model, double mu_hat, double x,
                     std::uint64_t* floor_events = nullptr);

/// Expected per-step log-likelihood ratio of f_{mu_star} against f_{phi}
/// when the data have mean mu.
double info_number(const ModelSpec& model, std::span<const double> mu_star,
                   std::span<const double> phi, std::span<const double> mu);

/// mu* = c mu + (1 - c) omega, elementwise.
MeanVector shrunk_limit(std::span<const double> mu, std::span<const double> omega,
                        double c);

/// Information against the null of the linear-shrinkage limit.
///
/// Accepts c in [0, 1.10]; values above 1 are outside the range the
/// asymptotic theory covers (see linear_c_outside_theory).
double info_vs_null_linear(const ModelSpec& model, std::span<const double> mu,
                           std::span<const double> omega, double c);

inline bool linear_c_outside_theory(double c) { return c > 1.0; }

/// Information against the null of the hard-thresholding limit. Streams with
/// mu_k >= omega_k contribute; Poisson requires mu0 == 1.
double info_vs_null_threshold(const ModelSpec& model, std::span<const double> mu,
                              std::span<const double> omega);

/// Renewal-theoretic overshoot function nu(x), x > 0.
double nu_overshoot(double x);

/// Overshoot factor gamma for the Gaussian SPRT / SRRS with linear shrinkage.
///
/// For c < 1 this is nu(||omega||). For c == 1 it is the Monte Carlo average
/// of nu(||y||) with y_k iid N(0, pi^2/6).
double gamma_factor(const ModelSpec& model, double c, std::span<const double> omega,
                    std::size_t mc_samples, std::uint64_t seed);

/// First/second-order expected stopping time (b + q log b - q log info) / info.
double expansion_expected_stop(double b, double q, double info);

/// Second-order coefficient for Poisson linear shrinkage.
double q_star_poisson(double c, std::span<const double> mu, std::span<const double> omega);

/// Chernoff bound e^{-mu} (e mu)^k / k^k on P(Y >= k), Y ~ Poisson(mu), k >= mu.
double poisson_tail_bound(double mu, double k);

struct ThresholdMoments {
  double e_delta;
  double e_delta_sq;
};

/// E(Delta), E(Delta^2) for Delta = Y 1{Y >= omega} - mu 1{mu >= omega},
/// Y ~ N(mu, sigma^2). Requires mu != omega.
ThresholdMoments threshold_moments_gaussian(double mu, double omega, double sigma);

/// The shrinkage grid 0.01, 0.02, ..., 1.10.
std::vector<double> default_c_grid();

/// Grid minimizer of the asymptotic delay bound with B = A (Gaussian).
/// Ties go to the smaller c.
double oracle_c_theoretical(std::span<const double> mu, std::span<const double> omega,
                            double A, std::size_t p);

/// Delay-bound objective minimized by oracle_c_theoretical. NaN where the
/// information number is not positive.
double oracle_c_objective(std::span<const double> mu, std::span<const double> omega,
                          double A, std::size_t p, double c);

/// MSE-optimal linear shrinkage factor for a single Gaussian observation vector.
double oracle_c_point_estimation(std::span<const double> mu, std::span<const double> omega,
                                 double sigma_sq);

/// c^2 p sigma^2 + (1 - c)^2 ||omega - mu||^2.
double mse_linear_shrinkage(std::span<const double> mu, std::span<const double> omega,
                            double sigma_sq, double c);

}  // namespace shrinkdetect
