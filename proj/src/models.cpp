#include "shrinkdetect/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "shrinkdetect/normal.hpp"
#include "shrinkdetect/rng.hpp"

namespace shrinkdetect {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": vector lengths differ (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::gaussian_unit_var: return "gaussian";
    case Family::poisson: return "poisson";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "gaussian" || name == "gaussian_unit_var") return Family::gaussian_unit_var;
  if (name == "poisson") return Family::poisson;
  throw std::invalid_argument("unknown distribution family '" + name + "'");
}

ModelSpec ModelSpec::gaussian(std::size_t p) {
  ModelSpec m{Family::gaussian_unit_var, 0.0, p};
  m.validate();
  return m;
}

ModelSpec ModelSpec::poisson(double mu0, std::size_t p) {
  ModelSpec m{Family::poisson, mu0, p};
  m.validate();
  return m;
}

void ModelSpec::validate() const {
  if (p < 1) throw std::invalid_argument("model: stream count p must be at least 1");
  if (family == Family::poisson && !(mu0 > 0.0)) {
    throw std::invalid_argument("model: Poisson pre-change mean must be positive");
  }
  if (family == Family::gaussian_unit_var && mu0 != 0.0) {
    throw std::invalid_argument("model: Gaussian pre-change mean is fixed at 0");
  }
}

double llr_increment(const ModelSpec& model, double mu_hat, double x,
                     std::uint64_t* floor_events) {
  if (model.family == Family::gaussian_unit_var) {
    return mu_hat * x - 0.5 * mu_hat * mu_hat;
  }
  if (!(x >= 0.0) || x != std::floor(x)) {
    throw std::domain_error("llr_increment: Poisson observation must be a nonnegative integer");
  }
  if (mu_hat < 0.0) mu_hat = 0.0;  // c > 1 can push the shrunk mean below zero
  if (x == 0.0) return -(mu_hat - model.mu0);
  if (mu_hat < kPoissonMeanFloor) {
    mu_hat = kPoissonMeanFloor;
    if (floor_events != nullptr) ++*floor_events;
  }
  return x * std::log(mu_hat / model.mu0) - (mu_hat - model.mu0);
}

double info_number(const ModelSpec& model, std::span<const double> mu_star,
                   std::span<const double> phi, std::span<const double> mu) {
  require_same_length(mu_star, phi, "info_number");
  require_same_length(mu_star, mu, "info_number");
  double total = 0.0;
  if (model.family == Family::gaussian_unit_var) {
    for (std::size_t k = 0; k < mu.size(); ++k) {
      total += (mu_star[k] - phi[k]) * (mu_star[k] + phi[k] - 2.0 * mu[k]);
    }
    return -0.5 * total;
  }
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (!(mu_star[k] > 0.0) || !(phi[k] > 0.0)) {
      throw std::domain_error("info_number: Poisson means must be positive");
    }
    total += mu[k] * std::log(mu_star[k] / phi[k]) - (mu_star[k] - phi[k]);
  }
  return total;
}

MeanVector shrunk_limit(std::span<const double> mu, std::span<const double> omega, double c) {
  require_same_length(mu, omega, "shrunk_limit");
  MeanVector out(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) out[k] = c * mu[k] + (1.0 - c) * omega[k];
  return out;
}

double info_vs_null_linear(const ModelSpec& model, std::span<const double> mu,
                           std::span<const double> omega, double c) {
  if (!(c >= 0.0) || c > 1.10) {
    throw std::domain_error("info_vs_null_linear: shrinkage factor must lie in [0, 1.10]");
  }
  const MeanVector mu_star = shrunk_limit(mu, omega, c);
  const MeanVector phi(mu.size(), model.mu0);
  if (model.family == Family::poisson) {
    for (double v : mu_star) {
      if (!(v > 0.0)) throw std::domain_error("info_vs_null_linear: shrunk Poisson mean <= 0");
    }
  }
  return info_number(model, mu_star, phi, mu);
}

double info_vs_null_threshold(const ModelSpec& model, std::span<const double> mu,
                              std::span<const double> omega) {
  require_same_length(mu, omega, "info_vs_null_threshold");
  for (double w : omega) {
    if (!(w > 0.0)) throw std::domain_error("info_vs_null_threshold: omega must be positive");
  }
  if (model.family == Family::poisson && model.mu0 != 1.0) {
    throw UnsupportedModel("info_vs_null_threshold: Poisson form is only defined for mu0 = 1");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (mu[k] < omega[k]) continue;
    if (model.family == Family::gaussian_unit_var) {
      total += 0.5 * mu[k] * mu[k];
    } else {
      total += mu[k] * std::log(mu[k]) - mu[k] + 1.0;
    }
  }
  return total;
}

namespace {

constexpr std::size_t kNuMaxTerms = 1'000'000;
constexpr double kNuTermTolerance = 1e-12;

// 2 * integral_{u0}^{inf} Phi(-u) / u du, the continuous tail of the nu series
// past the truncation point. Simpson in log(u) where the integrand is smooth.
double nu_series_tail(double u0) {
  const double s0 = std::log(u0);
  const double s1 = std::log(u0 + 40.0);
  constexpr int intervals = 4000;
  const double h = (s1 - s0) / intervals;
  double acc = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * normal_upper_tail(std::exp(s0 + i * h));
  }
  return 2.0 * acc * h / 3.0;
}

}  // namespace

double nu_overshoot(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::domain_error("nu_overshoot: argument must be positive and finite");
  }
  const double half = 0.5 * x;
  double sum = 0.0;
  double term = 1.0;
  std::size_t n = 1;
  for (; n <= kNuMaxTerms; ++n) {
    term = normal_upper_tail(half * std::sqrt(static_cast<double>(n))) / static_cast<double>(n);
    sum += term;
    if (term < kNuTermTolerance) break;
  }
  if (n > kNuMaxTerms) {
    sum += nu_series_tail(half * std::sqrt(static_cast<double>(kNuMaxTerms) + 0.5));
  }
  return 2.0 / (x * x) * std::exp(-2.0 * sum);
}

double gamma_factor(const ModelSpec& model, double c, std::span<const double> omega,
                    std::size_t mc_samples, std::uint64_t seed) {
  if (model.family != Family::gaussian_unit_var) {
    throw UnsupportedModel("gamma_factor: no closed form overshoot factor for Poisson streams");
  }
  if (!(c >= 0.0) || c > 1.0) throw std::domain_error("gamma_factor: c must lie in [0, 1]");
  if (c < 1.0) return nu_overshoot(std::sqrt(squared_norm(omega)));

  if (mc_samples == 0) throw std::invalid_argument("gamma_factor: mc_samples must be positive");
  CounterRng rng = make_rng(seed, 0, Substream::auxiliary);
  std::normal_distribution<double> limit(0.0, std::numbers::pi / std::sqrt(6.0));
  double acc = 0.0;
  for (std::size_t i = 0; i < mc_samples; ++i) {
    double norm_sq = 0.0;
    for (std::size_t k = 0; k < model.p; ++k) {
      const double y = limit(rng);
      norm_sq += y * y;
    }
    acc += nu_overshoot(std::sqrt(norm_sq));
  }
  return acc / static_cast<double>(mc_samples);
}

double expansion_expected_stop(double b, double q, double info) {
  if (!(info > 0.0)) throw std::domain_error("expansion_expected_stop: information must be > 0");
  if (!(b > 0.0)) throw std::domain_error("expansion_expected_stop: b must be > 0");
  if (!(q >= 0.0)) throw std::domain_error("expansion_expected_stop: q must be >= 0");
  return (b + q * std::log(b) - q * std::log(info)) / info;
}

double q_star_poisson(double c, std::span<const double> mu, std::span<const double> omega) {
  require_same_length(mu, omega, "q_star_poisson");
  double total = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double denom = c * mu[k] + (1.0 - c) * omega[k];
    if (denom == 0.0) throw std::domain_error("q_star_poisson: zero shrunk mean");
    const double ratio = c * mu[k] / denom;
    total += ratio * ratio;
  }
  return 0.5 * total;
}

double poisson_tail_bound(double mu, double k) {
  if (!(mu > 0.0)) throw std::domain_error("poisson_tail_bound: mu must be positive");
  if (k < mu) throw std::domain_error("poisson_tail_bound: bound requires k >= mu");
  return std::exp(-mu + k * (1.0 + std::log(mu)) - k * std::log(k));
}

ThresholdMoments threshold_moments_gaussian(double mu, double omega, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("threshold_moments_gaussian: sigma must be > 0");
  if (mu == omega) {
    throw std::domain_error("threshold_moments_gaussian: mu == omega is a degenerate boundary");
  }
  const double lambda = std::abs(omega - mu) / sigma;
  const double tail = normal_upper_tail(lambda);
  const double dens = normal_pdf(lambda);
  const double s2 = sigma * sigma;
  if (mu < omega) {
    return {mu * tail + sigma * dens, (mu * mu + s2) * tail + (2.0 * mu * sigma + lambda * s2) * dens};
  }
  return {-mu * tail + sigma * dens, (mu * mu - s2) * tail - s2 * lambda * dens + s2};
}

std::vector<double> default_c_grid() {
  std::vector<double> grid;
  grid.reserve(110);
  for (int i = 1; i <= 110; ++i) grid.push_back(i / 100.0);
  return grid;
}

double oracle_c_objective(std::span<const double> mu, std::span<const double> omega, double A,
                          std::size_t p, double c) {
  require_same_length(mu, omega, "oracle_c_objective");
  const double info = 0.5 * (squared_norm(mu) - (1.0 - c) * (1.0 - c) * squared_distance(mu, omega));
  if (!(info > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double q = 0.5 * c * c * static_cast<double>(p);
  const double log_a = std::log(A);
  return (log_a + q * std::log(log_a) - q * std::log(info)) / info;
}

double oracle_c_theoretical(std::span<const double> mu, std::span<const double> omega, double A,
                            std::size_t p) {
  if (!(A > 1.0)) throw std::domain_error("oracle_c_theoretical: A must exceed 1");
  double best_c = std::numeric_limits<double>::quiet_NaN();
  double best = std::numeric_limits<double>::infinity();
  for (double c : default_c_grid()) {
    const double value = oracle_c_objective(mu, omega, A, p, c);
    if (std::isnan(value)) continue;
    if (value < best) {
      best = value;
      best_c = c;
    }
  }
  if (std::isnan(best_c)) {
    throw std::domain_error("oracle_c_theoretical: information number is not positive for any c");
  }
  return best_c;
}

double oracle_c_point_estimation(std::span<const double> mu, std::span<const double> omega,
                                 double sigma_sq) {
  require_same_length(mu, omega, "oracle_c_point_estimation");
  if (!(sigma_sq > 0.0)) throw std::domain_error("oracle_c_point_estimation: sigma^2 must be > 0");
  const double bias = squared_distance(omega, mu);
  return bias / (static_cast<double>(mu.size()) * sigma_sq + bias);
}

double mse_linear_shrinkage(std::span<const double> mu, std::span<const double> omega,
                            double sigma_sq, double c) {
  require_same_length(mu, omega, "mse_linear_shrinkage");
  if (!(sigma_sq > 0.0)) throw std::domain_error("mse_linear_shrinkage: sigma^2 must be > 0");
  if (!(c >= 0.0) || c > 1.0) throw std::domain_error("mse_linear_shrinkage: c must lie in [0, 1]");
  return c * c * static_cast<double>(mu.size()) * sigma_sq +
         (1.0 - c) * (1.0 - c) * squared_distance(omega, mu);
}

}  // namespace shrinkdetect
