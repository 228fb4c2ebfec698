#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "shrinkdetect/models.hpp"

using namespace shrinkdetect;
using Catch::Approx;

namespace {

// Unoptimized nu(x): long double, fixed 2e6 terms, no early exit.
double nu_oracle(double x) {
  long double sum = 0.0L;
  const long double half = 0.5L * x;
  for (long n = 1; n <= 2000000; ++n) {
    const long double z = half * std::sqrt(static_cast<long double>(n));
    sum += 0.5L * std::erfc(z / std::numbers::sqrt2_v<long double>) / n;
  }
  return static_cast<double>(2.0L / (half * half * 4.0L) * std::exp(-2.0L * sum));
}

double poisson_exact_tail(double mu, int k) {
  // P(Y >= k), summed upward from pmf(k)
  long double pmf = std::exp(-static_cast<long double>(mu));
  for (int j = 1; j <= k; ++j) pmf *= mu / j;
  long double tail = 0.0L;
  for (int j = k; j < k + 400; ++j) {
    tail += pmf;
    pmf *= mu / (j + 1);
  }
  return static_cast<double>(tail);
}

}  // namespace

TEST_CASE("model spec validation") {
  CHECK_NOTHROW(ModelSpec::gaussian(3).validate());
  CHECK_THROWS_AS(ModelSpec::gaussian(0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec::poisson(0.0, 3).validate(), std::invalid_argument);
  ModelSpec bad = ModelSpec::gaussian(2);
  bad.mu0 = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(family_from_string(to_string(Family::poisson)) == Family::poisson);
}

TEST_CASE("llr_increment examples") {
  const ModelSpec g = ModelSpec::gaussian(1);
  const ModelSpec p = ModelSpec::poisson(1.0, 1);
  CHECK(llr_increment(g, 0.0, 3.7) == 0.0);
  CHECK(llr_increment(g, 0.5, 1.0) == Approx(0.375).margin(1e-15));
  // log N(1; 0.5, 1) - log N(1; 0, 1) from the densities
  const double dens = -0.5 * 0.25 + 0.5 * 1.0;
  CHECK(llr_increment(g, 0.5, 1.0) == Approx(dens).margin(1e-15));
  CHECK(llr_increment(p, 2.0, 3.0) == Approx(3.0 * std::log(2.0) - 1.0).margin(1e-12));
}

TEST_CASE("llr_increment vanishes at the null estimate") {
  const ModelSpec g = ModelSpec::gaussian(1);
  const ModelSpec p = ModelSpec::poisson(2.5, 1);
  for (double x = -5.0; x <= 5.0; x += 0.25) CHECK(llr_increment(g, 0.0, x) == 0.0);
  for (int x = 0; x <= 30; ++x) CHECK(llr_increment(p, 2.5, x) == Approx(0.0).margin(1e-12));
}

TEST_CASE("poisson llr floors a zero estimate") {
  const ModelSpec p = ModelSpec::poisson(1.0, 1);
  std::uint64_t floors = 0;
  CHECK(llr_increment(p, 0.0, 0.0, &floors) == Approx(1.0));
  CHECK(floors == 0);
  const double v = llr_increment(p, 0.0, 2.0, &floors);
  CHECK(std::isfinite(v));
  CHECK(v == Approx(2.0 * std::log(kPoissonMeanFloor) - (kPoissonMeanFloor - 1.0)));
  CHECK(floors == 1);
}

TEST_CASE("info_number examples") {
  const ModelSpec g = ModelSpec::gaussian(3);
  const ModelSpec p = ModelSpec::poisson(1.0, 3);
  const MeanVector ones{1, 1, 1}, zeros{0, 0, 0}, fours{4, 4, 4};
  CHECK(info_number(g, ones, zeros, ones) == Approx(1.5));
  CHECK(info_number(p, fours, ones, fours) == Approx(3.0 * (4.0 * std::log(4.0) - 3.0)));
  CHECK(3.0 * (4.0 * std::log(4.0) - 3.0) == Approx(7.6355).epsilon(1e-4));

  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int i = 0; i < 50; ++i) {
    const MeanVector a{u(gen), u(gen), u(gen)}, mu{u(gen), u(gen), u(gen)};
    CHECK(info_number(g, a, a, mu) == 0.0);
    CHECK(info_number(p, a, a, mu) == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("info_vs_null_linear examples") {
  const ModelSpec g = ModelSpec::gaussian(3);
  const ModelSpec p = ModelSpec::poisson(1.0, 3);
  const MeanVector ones{1, 1, 1}, omega(3, 0.25);
  CHECK(info_vs_null_linear(g, ones, omega, 1.0) == Approx(1.5));
  CHECK(info_vs_null_linear(g, ones, omega, 0.0) == Approx(0.65625));
  const double expect = 3.0 * (4.0 * std::log(2.625) - 1.625);
  CHECK(info_vs_null_linear(p, MeanVector{4, 4, 4}, MeanVector(3, 1.25), 0.5) == Approx(expect));
  CHECK(linear_c_outside_theory(1.05));
  CHECK_FALSE(linear_c_outside_theory(1.0));
}

TEST_CASE("gaussian info_vs_null_linear agrees with info_number") {
  const ModelSpec g = ModelSpec::gaussian(3);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0), uc(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const MeanVector mu{u(gen), u(gen), u(gen)}, omega{u(gen), u(gen), u(gen)};
    const double c = uc(gen);
    const MeanVector star = shrunk_limit(mu, omega, c);
    const double direct = info_number(g, star, g.null_vector(), mu);
    CHECK(info_vs_null_linear(g, mu, omega, c) == Approx(direct).epsilon(1e-12).margin(1e-14));
  }
}

TEST_CASE("info_vs_null_threshold examples") {
  const ModelSpec g = ModelSpec::gaussian(3);
  const ModelSpec p = ModelSpec::poisson(1.0, 3);
  const MeanVector omega(3, 0.25);
  CHECK(info_vs_null_threshold(g, MeanVector{1, 1, 0}, omega) == Approx(1.0));
  CHECK(info_vs_null_threshold(g, MeanVector{0, 0, 0}, omega) == 0.0);
  CHECK(info_vs_null_threshold(p, MeanVector{2, 1, 1}, MeanVector(3, 1.25)) ==
        Approx(2.0 * std::log(2.0) - 1.0));
  CHECK_THROWS(info_vs_null_threshold(ModelSpec::poisson(2.0, 3), MeanVector{2, 1, 1},
                                      MeanVector(3, 1.25)));
}

TEST_CASE("nu_overshoot") {
  CHECK(nu_overshoot(std::sqrt(3.0) * 0.25) == Approx(0.78).margin(0.005));
  const double far = nu_overshoot(10.0);
  CHECK(far > 0.0);
  CHECK(far < 0.02);
  // production stops once a term drops below 1e-12
  CHECK(nu_overshoot(0.1) == Approx(nu_oracle(0.1)).epsilon(1e-8));
  CHECK(nu_overshoot(0.1) == Approx(0.95).margin(0.01));
  CHECK(nu_overshoot(1.0) == Approx(nu_oracle(1.0)).epsilon(1e-8));
  CHECK_THROWS(nu_overshoot(0.0));

  double prev = nu_overshoot(0.1);
  for (int i = 2; i <= 50; ++i) {
    const double v = nu_overshoot(0.1 * i);
    CHECK(v > 0.0);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("gamma_factor") {
  const ModelSpec g = ModelSpec::gaussian(3);
  const MeanVector omega(3, 0.25);
  const double ref = gamma_factor(g, 0.5, omega, 0, 1);
  CHECK(ref == Approx(0.78).margin(0.005));
  for (double c : {0.0, 0.3, 0.7, 0.99}) CHECK(gamma_factor(g, c, omega, 0, 99) == ref);

  const double a = gamma_factor(g, 1.0, omega, 100000, 1);
  const double b = gamma_factor(g, 1.0, omega, 100000, 2);
  const double d = gamma_factor(g, 1.0, omega, 100000, 3);
  for (double v : {a, b, d}) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(std::abs(a - b) <= 0.01);
  CHECK(std::abs(a - d) <= 0.01);
  CHECK(std::abs(b - d) <= 0.01);
  CHECK_THROWS_AS(gamma_factor(ModelSpec::poisson(1.0, 3), 0.5, omega, 0, 1), UnsupportedModel);
}

TEST_CASE("expansion_expected_stop") {
  CHECK(expansion_expected_stop(5.0, 0.0, 0.5) == Approx(10.0));
  CHECK(expansion_expected_stop(5.0, 0.5, 0.125) ==
        Approx((5.0 + 0.5 * std::log(5.0) - 0.5 * std::log(0.125)) / 0.125));
  CHECK(expansion_expected_stop(5.0, 0.5, 0.125) == Approx(54.76).margin(0.01));
  const double rough = expansion_expected_stop(std::log(500.0), 1.5, 1.5);
  CHECK(rough == Approx(5.57).margin(0.05));

  for (double info = 0.1; info < 3.0; info += 0.3) {
    double prev = -1e300;
    for (double b = 1.0; b < 20.0; b += 1.0) {
      const double v = expansion_expected_stop(b, 1.5, info);
      CHECK(v > prev);
      prev = v;
      CHECK(expansion_expected_stop(b, 1.5, info + 0.1) < v);
    }
  }
}

TEST_CASE("q_star_poisson") {
  const MeanVector mu{4, 4, 4}, omega(3, 1.25);
  CHECK(q_star_poisson(1.0, mu, omega) == Approx(1.5));
  CHECK(q_star_poisson(1.0, MeanVector{0.3, 7, 2}, MeanVector{5, 1, 9}) == Approx(1.5));
  CHECK(q_star_poisson(0.5, mu, omega) == Approx(1.5 * std::pow(2.0 / 2.625, 2)));
  CHECK(q_star_poisson(0.5, mu, omega) == Approx(0.8707).margin(1e-4));
  CHECK(q_star_poisson(0.0, MeanVector{1, 1, 1}, MeanVector{1, 1, 1}) == 0.0);
}

TEST_CASE("poisson_tail_bound") {
  CHECK(poisson_tail_bound(1.0, 3.0) == Approx(std::exp(2.0) / 27.0));
  CHECK(poisson_exact_tail(1.0, 3) == Approx(0.0803).margin(1e-4));
  CHECK(poisson_tail_bound(1.0, 1.0) == Approx(1.0));
  CHECK(poisson_tail_bound(2.0, 10.0) == Approx(std::exp(-2.0) * std::pow(2.0 * std::numbers::e, 10) / 1e10));
  CHECK(poisson_tail_bound(2.0, 10.0) >= poisson_exact_tail(2.0, 10));

  for (double mu : {0.5, 1.0, 2.0, 5.0}) {
    const int k0 = static_cast<int>(std::ceil(mu));
    for (int k = k0; k <= k0 + 20; ++k) {
      CHECK(poisson_tail_bound(mu, k) >= poisson_exact_tail(mu, k));
    }
  }
}

TEST_CASE("threshold_moments_gaussian examples") {
  const ThresholdMoments a = threshold_moments_gaussian(0.0, 1.0, 1.0);
  CHECK(a.e_delta == Approx(0.2420).margin(1e-4));
  CHECK(a.e_delta_sq == Approx(0.4007).margin(1e-4));
  const ThresholdMoments b = threshold_moments_gaussian(1.0, 0.25, 0.5);
  CHECK(b.e_delta == Approx(-0.00205).margin(1e-5));
  CHECK(b.e_delta_sq == Approx(0.25154).margin(1e-5));
  // Far from the threshold the variance term dominates.
  const ThresholdMoments c = threshold_moments_gaussian(1.0, 0.25, 0.01);
  CHECK(c.e_delta_sq == Approx(1e-4).epsilon(1e-6));
}

TEST_CASE("threshold_moments_gaussian matches Monte Carlo") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> um(-1.0, 2.0), us(0.2, 1.5), ur(-3.0, 3.0);
  std::normal_distribution<double> z;
  for (int t = 0; t < 20; ++t) {
    const double mu = um(gen), sigma = us(gen);
    double r = ur(gen);
    if (std::abs(r) < 0.05) r = 0.05;
    const double omega = mu - r * sigma;
    const ThresholdMoments m = threshold_moments_gaussian(mu, omega, sigma);

    const int n = 1000000;
    const double shift = mu >= omega ? mu : 0.0;
    long double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
      const double y = mu + sigma * z(gen);
      const double d = (y >= omega ? y : 0.0) - shift;
      s1 += d;
      s2 += d * d;
      s3 += static_cast<long double>(d) * d * d;
      s4 += static_cast<long double>(d) * d * d * d;
    }
    const double m1 = static_cast<double>(s1 / n), m2 = static_cast<double>(s2 / n);
    const double se1 = std::sqrt((m2 - m1 * m1) / n);
    const double se2 = std::sqrt(static_cast<double>(s4 / n) - m2 * m2) / std::sqrt(double(n));
    CHECK(std::abs(m.e_delta - m1) <= 4.0 * se1);
    CHECK(std::abs(m.e_delta_sq - m2) <= 4.0 * se2);
  }
}

TEST_CASE("oracle_c_theoretical") {
  const MeanVector omega(3, 0.25);
  CHECK(oracle_c_theoretical(MeanVector{1, 1, 1}, omega, 500.0, 3) == Approx(0.68).margin(0.02));
  CHECK(oracle_c_theoretical(MeanVector{0.41, 0.39, 0.34}, omega, 500.0, 3) ==
        Approx(0.14).margin(0.02));

  // mu == omega: direct grid evaluation picks the first grid point.
  const std::vector<double> grid = default_c_grid();
  double best = grid.front();
  double best_val = oracle_c_objective(omega, omega, 500.0, 3, best);
  for (double c : grid) {
    const double v = oracle_c_objective(omega, omega, 500.0, 3, c);
    if (v < best_val) {
      best_val = v;
      best = c;
    }
  }
  CHECK(best == Approx(0.01));
  CHECK(oracle_c_theoretical(omega, omega, 500.0, 3) == Approx(0.01));
}

TEST_CASE("default_c_grid") {
  const std::vector<double> grid = default_c_grid();
  REQUIRE(grid.size() == 110);
  CHECK(grid.front() == Approx(0.01));
  CHECK(grid.back() == Approx(1.10));
}

TEST_CASE("oracle_c_point_estimation and mse") {
  const MeanVector ones{1, 1, 1}, zeros{0, 0, 0};
  CHECK(oracle_c_point_estimation(ones, ones, 1.0) == 0.0);
  CHECK(oracle_c_point_estimation(ones, zeros, 1.0) == Approx(0.5));
  CHECK(oracle_c_point_estimation(MeanVector{1e4, 0, 0}, zeros, 1.0) == Approx(1.0).margin(1e-6));

  CHECK(mse_linear_shrinkage(ones, zeros, 2.0, 1.0) == Approx(6.0));
  CHECK(mse_linear_shrinkage(ones, zeros, 1.0, 0.0) == Approx(3.0));
  CHECK(mse_linear_shrinkage(ones, zeros, 1.0, 0.5) == Approx(1.5));

  // Monte Carlo MSE of omega + c (Y - omega), Y ~ N(mu, I).
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z;
  const int n = 200000;
  long double acc = 0, acc2 = 0;
  for (int i = 0; i < n; ++i) {
    double loss = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double est = 0.5 * (1.0 + z(gen));
      loss += (est - 1.0) * (est - 1.0);
    }
    acc += loss;
    acc2 += loss * loss;
  }
  const double mean = static_cast<double>(acc / n);
  const double se = std::sqrt((static_cast<double>(acc2 / n) - mean * mean) / n);
  CHECK(std::abs(mean - 1.5) <= 4.0 * se);

  std::uniform_real_distribution<double> u(-3.0, 3.0), us(0.1, 4.0);
  for (int t = 0; t < 100; ++t) {
    const MeanVector mu{u(gen), u(gen), u(gen)}, omega{u(gen), u(gen), u(gen)};
    const double s2 = us(gen);
    const double c = oracle_c_point_estimation(mu, omega, s2);
    const double at_c = mse_linear_shrinkage(mu, omega, s2, c);
    CHECK(at_c <= mse_linear_shrinkage(mu, omega, s2, 0.0) + 1e-12);
    CHECK(at_c <= mse_linear_shrinkage(mu, omega, s2, 1.0) + 1e-12);
  }
}
