#include "catch_amalgamated.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "shrinkdetect/detectors.hpp"
#include "shrinkdetect/rng.hpp"
#include "shrinkdetect/serialization.hpp"

using namespace shrinkdetect;
using Catch::Approx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<MeanVector> gaussian_data(std::uint64_t seed, std::size_t n, std::size_t p, double mean = 0.0) {
  CounterRng rng(seed, 0);
  std::normal_distribution<double> z(mean, 1.0);
  std::vector<MeanVector> xs(n, MeanVector(p));
  for (auto& x : xs)
    for (double& v : x) v = z(rng);
  return xs;
}

std::vector<MeanVector> poisson_data(std::uint64_t seed, std::size_t n, std::size_t p, double mean) {
  CounterRng rng(seed, 0);
  std::poisson_distribution<int> pois(mean);
  std::vector<MeanVector> xs(n, MeanVector(p));
  for (auto& x : xs)
    for (double& v : x) v = pois(rng);
  return xs;
}

// Gaussian linear-shrinkage SRRS written out directly:
// Lambda_{n,m} = prod_{l=m..n} exp(mu_hat . x_l - |mu_hat|^2 / 2), mu_hat from X_m..X_{l-1}.
std::vector<double> linear_srrs_oracle(const std::vector<MeanVector>& xs, double c, double omega) {
  std::vector<double> out;
  const std::size_t p = xs[0].size();
  for (std::size_t n = 1; n <= xs.size(); ++n) {
    long double total = 0.0L;
    for (std::size_t m = 1; m <= n; ++m) {
      long double log_lambda = 0.0L;
      for (std::size_t l = m; l <= n; ++l) {
        const std::size_t count = l - m;
        for (std::size_t k = 0; k < p; ++k) {
          double mu_hat = 0.0;
          if (count > 0) {
            long double s = 0.0L;
            for (std::size_t i = m; i < l; ++i) s += xs[i - 1][k];
            mu_hat = omega + c * (static_cast<double>(s / count) - omega);
          }
          log_lambda += mu_hat * xs[l - 1][k] - 0.5 * mu_hat * mu_hat;
        }
      }
      total += std::exp(log_lambda);
    }
    out.push_back(static_cast<double>(std::log(total)));
  }
  return out;
}

std::vector<double> run_srrs(const std::vector<MeanVector>& xs, const EstimatorRule& rule,
                             const ModelSpec& model) {
  SrrsState s = SrrsState::make(model, rule, 1e300);
  std::vector<double> out;
  for (const auto& x : xs) out.push_back(srrs_step(s, x).log_stat);
  return out;
}

template <class State, class Step>
std::uint64_t alarm_time(State s, Step step_fn, const std::vector<MeanVector>& xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (step_fn(s, xs[i]).alarmed) return i + 1;
  }
  return xs.size() + 1;
}

void check_rel(double a, double b, double rel) {
  if (std::isinf(a) || std::isinf(b)) {
    CHECK(a == b);
    return;
  }
  CHECK(std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}));
}

}  // namespace

TEST_CASE("log-domain helpers") {
  const std::vector<double> v{1000.0, 1000.0};
  CHECK(log_sum_exp(v) == Approx(1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{}) == -kInf);
  CHECK(log_sum_exp(std::vector<double>{-kInf, 0.0}) == 0.0);
  CHECK(log1p_exp(-kInf) == 0.0);
  CHECK(log1p_exp(0.0) == Approx(std::log(2.0)));
  CHECK(log1p_exp(800.0) == Approx(800.0));
  CHECK(log1p_exp(-40.0) == Approx(std::exp(-40.0)));
}

TEST_CASE("sprt examples") {
  const ModelSpec g = ModelSpec::gaussian(1);
  SprtState s = SprtState::make(g, EstimatorRule::mle(), 10.0);
  StepResult r = sprt_step(s, MeanVector{1.0});
  CHECK(r.log_stat == 0.0);
  CHECK_FALSE(r.alarmed);
  r = sprt_step(s, MeanVector{1.0});
  CHECK(r.log_stat == Approx(0.5));

  SprtState low = SprtState::make(g, EstimatorRule::mle(), -1.0);
  CHECK(sprt_step(low, MeanVector{-3.0}).alarmed);
  CHECK(low.time == 1);
  CHECK_THROWS_AS(sprt_step(low, MeanVector{0.0}), DetectorStateError);

  SprtState zero = SprtState::make(g, EstimatorRule::mle(), 0.0);
  CHECK(sprt_step(zero, MeanVector{0.7}).alarmed);
  CHECK_THROWS_AS(sprt_step(s, MeanVector{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("srrs first steps") {
  const ModelSpec g = ModelSpec::gaussian(3);
  SrrsState s = SrrsState::make(g, EstimatorRule::mle(), 500.0);
  CHECK(srrs_step(s, MeanVector{2.0, -1.0, 0.3}).log_stat == 0.0);

  const std::vector<MeanVector> xs{{0.3, 0.3, 0.3}, {0.3, 0.3, 0.3}};
  const std::vector<double> inc = run_srrs(xs, EstimatorRule::mle(), g);
  const std::vector<double> brute = srrs_stat_bruteforce(xs, EstimatorRule::mle(), g);
  CHECK(inc[1] == Approx(brute[1]).epsilon(1e-12));
  // Lambda_{2,1} = exp(3 (0.09 - 0.045)), Lambda_{2,2} = 1
  CHECK(inc[1] == Approx(std::log(1.0 + std::exp(3 * 0.045))).epsilon(1e-12));
}

TEST_CASE("srrs candidate bank") {
  const ModelSpec g = ModelSpec::gaussian(2);
  SrrsState s = SrrsState::make(g, EstimatorRule::mle(), 1e9);
  const auto xs = gaussian_data(3, 6, 2);
  for (const auto& x : xs) srrs_step(s, x);
  REQUIRE(s.candidate_count() == 6);
  for (std::size_t j = 0; j < 6; ++j) {
    const RunningStats st = s.candidate_stats(j);
    const std::uint64_t m = s.birth[j];
    CHECK(m == j + 1);
    CHECK(st.count == 6 - m + 1);
    double sum0 = 0.0;
    for (std::uint64_t l = m; l <= 6; ++l) sum0 += xs[l - 1][0];
    CHECK(st.sums[0] == Approx(sum0).margin(1e-12));
  }
}

TEST_CASE("srrs overflow policies") {
  const ModelSpec g = ModelSpec::gaussian(1);
  const auto xs = gaussian_data(4, 10, 1);
  SrrsState strict = SrrsState::make(g, EstimatorRule::mle(), 1e9, 3, OverflowPolicy::error);
  for (int i = 0; i < 3; ++i) srrs_step(strict, xs[i]);
  CHECK_THROWS_AS(srrs_step(strict, xs[3]), DetectorStateError);

  SrrsState drop = SrrsState::make(g, EstimatorRule::mle(), 1e9, 3, OverflowPolicy::drop_oldest);
  for (const auto& x : xs) srrs_step(drop, x);
  CHECK(drop.candidate_count() == 3);
  CHECK(drop.dropped_candidates == 7);
  CHECK(drop.birth.front() == 8);
}

TEST_CASE("srrs matches the direct formula") {
  const auto xs = gaussian_data(5, 12, 3, 0.4);
  const auto oracle = linear_srrs_oracle(xs, 0.5, 0.25);
  const auto inc = run_srrs(xs, EstimatorRule::linear_shrink(0.5, MeanVector(3, 0.25)),
                            ModelSpec::gaussian(3));
  for (std::size_t n = 0; n < xs.size(); ++n) check_rel(inc[n], oracle[n], 1e-10);
}

TEST_CASE("srrs matches brute force across rules and models") {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> un(1, 20), up(3, 5);
  std::uniform_real_distribution<double> uw(0.1, 0.6), uc(0.0, 1.1);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = un(gen), p = up(gen);
    const bool poisson = inst % 2 == 1;
    const ModelSpec model = poisson ? ModelSpec::poisson(1.0, p) : ModelSpec::gaussian(p);
    const double base = poisson ? 1.0 : 0.0;
    MeanVector w(p);
    for (double& v : w) v = base + uw(gen);
    MeanVector a(p);
    for (double& v : a) v = 0.5 * uw(gen);
    const std::vector<EstimatorRule> rules{
        EstimatorRule::mle(),
        EstimatorRule::linear_shrink(uc(gen), w),
        EstimatorRule::js_adaptive(w),
        EstimatorRule::hard_threshold(w),
        EstimatorRule::soft_threshold(w),
        EstimatorRule::affine_threshold(w, a, 0.8, poisson ? 1.0 : 0.0)};
    const auto xs = poisson ? poisson_data(inst, n, p, 1.4) : gaussian_data(inst, n, p, 0.3);
    for (const EstimatorRule& r : rules) {
      const auto inc = run_srrs(xs, r, model);
      const auto brute = srrs_stat_bruteforce(xs, r, model);
      REQUIRE(inc.size() == brute.size());
      for (std::size_t i = 0; i < n; ++i) check_rel(inc[i], brute[i], 1e-10);
    }
  }
}

TEST_CASE("srrs with unit factors counts candidates") {
  const ModelSpec g = ModelSpec::gaussian(3);
  const std::vector<MeanVector> zeros(8, MeanVector(3, 0.0));
  const auto brute = srrs_stat_bruteforce(zeros, EstimatorRule::mle(), g);
  const auto inc = run_srrs(zeros, EstimatorRule::mle(), g);
  for (std::size_t n = 1; n <= 8; ++n) {
    CHECK(brute[n - 1] == Approx(std::log(double(n))));
    CHECK(inc[n - 1] == Approx(std::log(double(n))));
  }

  const ModelSpec g1 = ModelSpec::gaussian(1);
  const std::vector<MeanVector> low{{0.1}, {-0.4}, {0.2}, {0.0}, {-1.0}, {0.24}};
  const auto hard = run_srrs(low, EstimatorRule::hard_threshold(MeanVector{0.25}), g1);
  for (std::size_t n = 1; n <= low.size(); ++n) CHECK(hard[n - 1] == Approx(std::log(double(n))));
}

TEST_CASE("srrs alarms after an alarm throw") {
  const ModelSpec g = ModelSpec::gaussian(1);
  SrrsState s = SrrsState::make(g, EstimatorRule::mle(), 1.0);
  CHECK(srrs_step(s, MeanVector{0.0}).alarmed);  // log 1 >= log 1
  CHECK_THROWS_AS(srrs_step(s, MeanVector{0.0}), DetectorStateError);
}

TEST_CASE("srrs null martingale") {
  const ModelSpec g = ModelSpec::gaussian(3);
  const auto rule = EstimatorRule::linear_shrink(0.5, MeanVector(3, 0.25));
  const int reps = 100000;
  long double sum = 0.0L, sum_sq = 0.0L;
  for (int r = 0; r < reps; ++r) {
    CounterRng rng(2024, r);
    std::normal_distribution<double> z;
    SrrsState s = SrrsState::make(g, rule, 1e300);
    double log_stat = 0.0;
    for (int n = 0; n < 10; ++n) {
      MeanVector x{z(rng), z(rng), z(rng)};
      log_stat = srrs_step(s, x).log_stat;
    }
    const long double v = std::exp(static_cast<long double>(log_stat));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = static_cast<double>(sum / reps);
  const double se = std::sqrt(static_cast<double>((sum_sq / reps - (sum / reps) * (sum / reps)) / reps));
  CHECK(std::abs(mean - 10.0) <= 4.0 * se);
}

TEST_CASE("srrs alarms no later than sprt") {
  const ModelSpec g = ModelSpec::gaussian(3);
  const auto rule = EstimatorRule::linear_shrink(0.5, MeanVector(3, 0.25));
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto xs = gaussian_data(seed, 400, 3, seed % 2 ? 0.5 : 0.0);
    for (double B : {5.0, 50.0, 500.0}) {
      const auto srrs = alarm_time(SrrsState::make(g, rule, B), srrs_step, xs);
      const auto sprt = alarm_time(SprtState::make(g, rule, std::log(B)), sprt_step, xs);
      CHECK(srrs <= sprt);
    }
  }
}

TEST_CASE("raising the threshold never alarms earlier") {
  const ModelSpec g = ModelSpec::gaussian(3);
  const MeanVector w(3, 0.25);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto xs = gaussian_data(100 + seed, 300, 3, 0.3);
    std::uint64_t prev[5] = {0, 0, 0, 0, 0};
    for (double B : {2.0, 10.0, 50.0, 200.0, 1000.0}) {
      const double b = std::log(B);
      const std::uint64_t t[5] = {
          alarm_time(SrrsState::make(g, EstimatorRule::hard_threshold(w), B), srrs_step, xs),
          alarm_time(SprtState::make(g, EstimatorRule::mle(), b), sprt_step, xs),
          alarm_time(KnownSrState::make(g, MeanVector(3, 0.5), B), known_sr_step, xs),
          alarm_time(RecursiveState::make(g, 0.9, w, B), recursive_step, xs),
          alarm_time(CusumState::make(g, MeanVector(3, 0.5), CusumAggregate::sum, b), cusum_step, xs)};
      for (int d = 0; d < 5; ++d) {
        CHECK(t[d] >= prev[d]);
        prev[d] = t[d];
      }
    }
  }
}

TEST_CASE("known-parameter Shiryaev-Roberts") {
  const ModelSpec g = ModelSpec::gaussian(1);
  KnownSrState s = KnownSrState::make(g, MeanVector{1.0}, 1e6);
  CHECK(known_sr_step(s, MeanVector{1.0}).log_stat == Approx(0.5));
  CHECK(std::exp(s.log_r) == Approx(1.6487).margin(1e-4));

  KnownSrState flat = KnownSrState::make(g, MeanVector{0.0}, 1e6);
  for (int n = 1; n <= 20; ++n) {
    CHECK(std::exp(known_sr_step(flat, MeanVector{0.3 * n}).log_stat) == Approx(double(n)));
  }

  KnownSrState any = KnownSrState::make(ModelSpec::gaussian(2), MeanVector{0.5, 0.5}, 1e6);
  for (const auto& x : gaussian_data(9, 200, 2)) {
    const double v = known_sr_step(any, x).log_stat;
    CHECK_FALSE(std::isnan(v));
    CHECK(std::exp(v) >= 0.0);
  }
}

TEST_CASE("recursive scheme") {
  const ModelSpec g = ModelSpec::gaussian(2);
  const MeanVector w(2, 0.25);
  RecursiveState s = RecursiveState::make(g, 0.9, w, 1e9);
  CHECK(recursive_step(s, MeanVector{0.0, 0.0}).log_stat == -kInf);

  for (int n = 2; n <= 15; ++n) {
    const StepResult r = recursive_step(s, MeanVector{0.01, -0.5});
    CHECK(std::exp(r.log_stat) == Approx(double(n - 1)));
  }

  RecursiveState big = RecursiveState::make(g, 0.9, w, 1e300);
  const int bound = static_cast<int>(std::ceil(std::log(0.25) / std::log(0.9)));
  int first_active = 0;
  std::vector<double> logs;
  for (int n = 1; n <= 60; ++n) {
    if (first_active == 0 && big.mu_tilde[0] >= 0.25) first_active = n;
    logs.push_back(recursive_step(big, MeanVector{3.0, 3.0}).log_stat);
  }
  CHECK(first_active > 0);
  CHECK(first_active <= bound);
  for (std::size_t i = 3; i < logs.size(); ++i) CHECK(logs[i] > logs[i - 1] + 1.0);
}

TEST_CASE("recursive state stays O(p)") {
  const ModelSpec g = ModelSpec::gaussian(4);
  DetectorState s = RecursiveState::make(g, 0.9, MeanVector(4, 0.25), 1e300);
  const auto xs = gaussian_data(1, 1000, 4);
  std::size_t size_10 = 0;
  std::size_t keys_10 = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    step(s, xs[i]);
    if (i + 1 == 10) {
      const Json snap = snapshot(s);
      keys_10 = snap.size();
      size_10 = snap["mu_tilde"].size();
    }
  }
  const Json snap = snapshot(s);
  CHECK(snap.size() == keys_10);
  CHECK(snap["mu_tilde"].size() == size_10);
  CHECK(size_10 == 4);
  CHECK(std::get<RecursiveState>(s).mu_tilde.size() == 4);
}

TEST_CASE("cusum") {
  const ModelSpec g = ModelSpec::gaussian(1);
  CusumState s = CusumState::make(g, MeanVector{1.0}, CusumAggregate::max, 5.0);
  for (int i = 0; i < 5; ++i) CHECK(cusum_step(s, MeanVector{0.0}).log_stat == 0.0);

  for (double b : {0.5, 1.0, 2.3, 5.0, 7.75}) {
    CusumState c = CusumState::make(g, MeanVector{1.0}, CusumAggregate::max, b);
    int n = 0;
    while (!cusum_step(c, MeanVector{1.0}).alarmed) ++n;
    CHECK(n + 1 == static_cast<int>(std::ceil(b / 0.5)));
  }

  const ModelSpec g3 = ModelSpec::gaussian(3);
  CusumState mx = CusumState::make(g3, MeanVector(3, 0.5), CusumAggregate::max, 1e9);
  CusumState sm = CusumState::make(g3, MeanVector(3, 0.5), CusumAggregate::sum, 1e9);
  for (const auto& x : gaussian_data(12, 500, 3, 0.1)) {
    const double a = cusum_step(mx, x).log_stat;
    const double b = cusum_step(sm, x).log_stat;
    CHECK(b >= a);
    for (double w : sm.w) CHECK(w >= 0.0);
  }
}

TEST_CASE("uniform detector interface") {
  const ModelSpec g = ModelSpec::gaussian(3);
  DetectorSpec spec;
  spec.model = g;
  spec.rule = EstimatorRule::linear_shrink(0.5, MeanVector(3, 0.25));
  for (DetectorKind k : {DetectorKind::srrs, DetectorKind::sprt, DetectorKind::known_sr,
                         DetectorKind::recursive, DetectorKind::cusum_max, DetectorKind::cusum_sum}) {
    CHECK(detector_kind_from_string(to_string(k)) == k);
    spec.kind = k;
    if (k == DetectorKind::recursive) spec.rule = EstimatorRule::ewma(0.9, MeanVector(3, 0.25));
    if (k != DetectorKind::srrs && k != DetectorKind::sprt && k != DetectorKind::recursive) {
      spec.mu_known = MeanVector(3, 0.5);
    }
    const double thr = threshold_is_log_scale(k) ? 3.0 : 20.0;
    CHECK(threshold_from_log(k, log_threshold_for(k, thr)) == Approx(thr));
    DetectorState st = make_detector(spec, thr);
    for (int i = 0; i < 5; ++i) step(st, MeanVector{0.1, 0.2, 0.3});
    CHECK(elapsed(st) == 5);
  }
  CHECK(threshold_is_log_scale(DetectorKind::sprt));
  CHECK_FALSE(threshold_is_log_scale(DetectorKind::srrs));
  CHECK_THROWS(log_threshold_for(DetectorKind::srrs, 0.0));
  CHECK_THROWS(detector_kind_from_string("shewhart"));
}

TEST_CASE("poisson detectors reject non-count data") {
  const ModelSpec p = ModelSpec::poisson(1.0, 2);
  SrrsState s = SrrsState::make(p, EstimatorRule::mle(), 100.0);
  CHECK_THROWS_AS(srrs_step(s, MeanVector{1.5, 0.0}), std::domain_error);
  CHECK_THROWS_AS(srrs_step(s, MeanVector{-1.0, 0.0}), std::domain_error);
}

TEST_CASE("poisson mle counts floor events") {
  const ModelSpec p = ModelSpec::poisson(1.0, 1);
  SrrsState s = SrrsState::make(p, EstimatorRule::mle(), 1e300);
  srrs_step(s, MeanVector{0.0});
  srrs_step(s, MeanVector{3.0});
  CHECK(s.floor_events >= 1);
  CHECK(std::isfinite(s.last_log_stat));
}
