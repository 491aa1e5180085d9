#include <doctest.h>

#include <cmath>
#include <vector>

#include "isqld/errors.hpp"
#include "isqld/path_solver.hpp"
#include "isqld/verification.hpp"

using namespace isqld;

namespace {

const auto kU01 = ServiceLaw::uniform(0.0, 1.0);

// log P(Poisson(m) >= n) by direct long double summation of the pmf
long double direct_tail(double m, int n) {
  long double term = std::exp(-static_cast<long double>(m));
  long double below = 0.0L;
  for (int k = 0; k < n; ++k) {
    below += term;
    term *= m / (k + 1.0L);
  }
  long double above = 0.0L;
  for (int k = n; k < n + 2000; ++k) {
    above += term;
    term *= m / (k + 1.0L);
  }
  return std::log(above > 1e-3L ? 1.0L - below : above);
}

}  // namespace

TEST_CASE("Poisson tail oracle against direct summation") {
  for (double m : {0.5, 3.0, 20.0, 80.0}) {
    for (int n : {0, 1, 2, 5, 30, 120}) {
      if (n == 0) {
        CHECK(verify::poisson_tail_log(m, 0) == 0.0);
        continue;
      }
      CHECK(verify::poisson_tail_log(m, n) ==
            doctest::Approx(static_cast<double>(direct_tail(m, n))).epsilon(1e-11));
    }
  }
  CHECK(verify::poisson_tail(3.0, 5).log_prob <= 0.0);
}

TEST_CASE("Poisson tail oracle deep in the tail") {
  // log P(N >= n) ~ log pmf(n) + log(1 / (1 - m / (n + 1))) for n >> m
  const double m = 800.0;
  const std::uint64_t n = 1600;
  const double lpmf = -m + n * std::log(m) - std::lgamma(n + 1.0);
  const double lp = verify::poisson_tail_log(m, n);
  CHECK(lp > lpmf);
  CHECK(lp < lpmf + std::log(1.0 / (1.0 - m / (n + 1.0))) + 1e-9);
  CHECK(lp > lpmf + std::log(1.0 / (1.0 - m / (n + 1.0))) - 1e-3);
}

TEST_CASE("event threshold rounds up") {
  const verify::QueueLengthEvent ev{kU01, 1.0, 2.0};
  CHECK(ev.threshold(100.0) == 200);
  const verify::QueueLengthEvent half{kU01, 1.0, 0.505};
  CHECK(half.threshold(100.0) == 51);
}

TEST_CASE("log correction fit recovers synthetic coefficients") {
  const std::vector<double> lam{100, 200, 400, 800};
  std::vector<double> ys;
  for (double l : lam) ys.push_back(1.5 + 0.7 * std::log(l) / l);
  const auto [a, b, res] = verify::fit_log_correction(lam, ys);
  CHECK(a == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(b == doctest::Approx(0.7).epsilon(1e-8));
  CHECK(res < 1e-12);
}

TEST_CASE("exact decay curve approaches the overflow rate") {
  const verify::QueueLengthEvent ev{kU01, 1.0, 2.0};
  const std::vector<double> lam{100, 200, 400, 800, 1600};
  const auto est = verify::decay_curve_exact(ev, lam);
  const double I = paths::overflow_rate(kU01, 2.0, 1.0);
  for (std::size_t k = 1; k < lam.size(); ++k) {
    CHECK(est.neg_log_prob_over_lambda[k] < est.neg_log_prob_over_lambda[k - 1]);
    CHECK(est.neg_log_prob_over_lambda[k] > I);
  }
  CHECK(std::abs(est.extrapolated_rate - I) < 0.01 * I);
  CHECK(std::abs(est.neg_log_prob_over_lambda.back() - I) < 0.01);
  CHECK(est.to_csv().rfind("lambda,log_prob,ratio\n", 0) == 0);
}

TEST_CASE("Monte Carlo decay agrees with the oracle at mild rarity") {
  // level 0.7: P(Poisson(0.5 lambda) >= 0.7 lambda) is about 1e-2 to 1e-3
  const verify::QueueLengthEvent ev{kU01, 1.0, 0.7};
  const std::vector<double> lam{20, 40};
  const auto mc = verify::decay_curve_mc(ev, lam, 20000, 99);
  const auto ex = verify::decay_curve_exact(ev, lam);
  for (std::size_t k = 0; k < lam.size(); ++k) {
    const double p = std::exp(ex.log_probs[k]);
    const double se = std::sqrt(p * (1 - p) / 20000.0);
    CHECK(std::abs(std::exp(mc.log_probs[k]) - p) < 4.0 * se);
  }
  CHECK_THROWS_AS(verify::decay_curve_mc({kU01, 1.0, 2.0}, {400}, 1000, 1), InsufficientHitsError);
}

TEST_CASE("marginal of the number in system is Poisson") {
  const auto r = verify::marginal_distribution_check(RenewalLaw::exponential(1.0), kU01, 50.0, 1.0,
                                                     1000, 3);
  CHECK(r.expected_mean == doctest::Approx(25.0));
  CHECK(r.mean_ok);
  CHECK(r.dispersion_ok);
}

TEST_CASE("renewal arrivals are underdispersed") {
  // deterministic-like gamma(20, 20) arrivals: variance well below the mean
  const auto r = verify::marginal_distribution_check(RenewalLaw::gamma(20.0, 20.0), kU01, 50.0, 1.0,
                                                     800, 4);
  CHECK(r.mean_ok);
  CHECK(r.variance_to_mean < 0.9);
  CHECK_FALSE(r.dispersion_ok);
}

TEST_CASE("truncation coupling bound") {
  const auto grid = sim::default_grid(1.0, ServiceLaw::exponential(1.0), 8, 16);
  const auto r = verify::truncation_coupling_check(RenewalLaw::exponential(1.0),
                                                   ServiceLaw::exponential(1.0), 50.0, 1.0, 0.5, 100,
                                                   8, grid);
  CHECK(r.violations == 0);
  CHECK(r.max_dropped > 0);
  // at (T, 0) every dropped customer is counted, so the bound is attained
  CHECK(r.max_gap == static_cast<double>(r.max_dropped));
}

TEST_CASE("cross check of evaluators on the overflow path") {
  const auto sol = paths::solve_overflow({kU01, 2.0, 1.0});
  std::vector<rate::Partition> parts;
  for (std::size_t k : {2u, 4u, 8u}) parts.push_back(rate::Partition::uniform(1.0, k, 2.5, k));
  const auto rep = verify::rate_cross_check(sol.tilt, kU01, 1.0, parts);
  CHECK(rep.bounded);
  CHECK(rep.monotone);
  CHECK(rep.entropy_value == doctest::Approx(sol.rate));
  CHECK(rep.to_json()["partitions"].size() == 3);
}
