#include <doctest.h>

#include <cmath>
#include <random>

#include "isqld/distributions.hpp"
#include "isqld/errors.hpp"
#include "isqld/kernels.hpp"
#include "isqld/path_solver.hpp"
#include "isqld/rate.hpp"

using namespace isqld;

namespace {

const auto kU01 = ServiceLaw::uniform(0.0, 1.0);

TiltDensity scaled_f(double c, double T) {
  return TiltDensity(T, 1.0, [c](double, double r) { return r <= 1.0 ? c : 0.0; });
}

// overflow to x = 2 by T = 1 under uniform[0, 1] service
const double kOverflowRate = 0.5 + 2.0 * (std::log(4.0) - 1.0);

TiltDensity overflow_path() { return paths::overflow_tilt(kU01, 1.0, 1.0, 4.0); }

}  // namespace

TEST_CASE("entropy rate vanishes at the law of large numbers path") {
  CHECK(rate::poisson_rate(scaled_f(1.0, 1.0), kU01, 1.0).value == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("entropy rate of a constant multiple of f") {
  for (double c : {0.3, 2.0, 5.0}) {
    const double want = 2.0 * (c * std::log(c) - c + 1.0);
    CHECK(rate::poisson_rate(scaled_f(c, 2.0), kU01, 2.0).value == doctest::Approx(want).epsilon(1e-10));
  }
  // intensity rho: v = f means rate T (rho - 1 - log rho)
  const double rho = 3.0;
  CHECK(rate::poisson_rate(scaled_f(1.0, 1.0), kU01, 1.0, rho).value ==
        doctest::Approx(rho - 1.0 - std::log(rho)).epsilon(1e-10));
}

TEST_CASE("entropy rate of the overflow tilt matches the closed form") {
  CHECK(rate::poisson_rate(overflow_path(), kU01, 1.0).value == doctest::Approx(kOverflowRate).epsilon(1e-10));
}

TEST_CASE("mass where f vanishes makes the rate infinite") {
  const TiltDensity v(1.0, 2.0, [](double, double) { return 1.0; }, {{}, {1.0}, {}});
  CHECK(rate::poisson_rate(v, kU01, 1.0).infinite);
  CHECK(rate::RateResult::infinity().to_json()["value"] == "infinite");
}

TEST_CASE("increments reconstruct qbar") {
  const auto v = overflow_path();
  const auto part = rate::Partition::uniform(1.0, 4, 2.0, 8);
  const auto table = rate::increments_from_tilt(v, part);
  for (std::size_t i = 0; i < part.t.size(); ++i) {
    for (std::size_t j = 0; j < part.y.size(); ++j) {
      CHECK(table.reconstruct(i, j) ==
            doctest::Approx(rate::qbar_from_tilt(v, part.t[i], part.y[j])).epsilon(1e-10));
    }
  }
}

TEST_CASE("qbar of the tilt agrees with the closed form") {
  const auto v = overflow_path();
  for (double t : {0.2, 0.5, 1.0}) {
    for (double y : {0.0, 0.3, 0.9, 1.4}) {
      CHECK(rate::qbar_from_tilt(v, t, y) ==
            doctest::Approx(paths::overflow_qbar(kU01, 1.0, 4.0, t, y)).epsilon(1e-10));
    }
  }
}

TEST_CASE("increments from a surface need the partition on the grid") {
  const auto v = overflow_path();
  const auto surf = rate::surface_from_tilt(v, SurfaceGrid::uniform(1.0, 8, 2.0, 16));
  const auto a = rate::increments_from_surface(surf, rate::Partition::uniform(1.0, 4, 2.0, 8));
  const auto b = rate::increments_from_tilt(v, rate::Partition::uniform(1.0, 4, 2.0, 8));
  for (std::size_t i = 0; i < a.deltas.rows(); ++i) {
    for (std::size_t j = 0; j < a.deltas.cols(); ++j) {
      CHECK(a.deltas(i, j) == doctest::Approx(b.deltas(i, j)).scale(1.0).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(rate::increments_from_surface(surf, rate::Partition::uniform(1.0, 3, 2.0, 8)),
                  PartitionError);
  CHECK_THROWS_AS((rate::Partition{{0.0, 0.5, 0.4}, {0.0, 1.0}}.validate()), PartitionError);
}

TEST_CASE("finite-dimensional rate of the fluid path is zero") {
  const kernels::PsiEvaluator ev(RenewalLaw::exponential(1.0));
  const auto table = rate::increments_from_tilt(scaled_f(1.0, 1.0), rate::Partition::uniform(1.0, 4, 2.0, 8));
  const auto r = rate::finite_dim_rate(table, ev, kU01);
  CHECK_FALSE(r.infinite);
  CHECK(std::abs(r.value) < 1e-9);
}

TEST_CASE("aligned partition reproduces the entropy value") {
  // the tilt is constant on cells of the 1/4 partition in (t, t + r)
  const kernels::PsiEvaluator ev(RenewalLaw::exponential(1.0));
  const auto table = rate::increments_from_tilt(overflow_path(), rate::Partition::uniform(1.0, 4, 2.0, 8));
  const auto r = rate::finite_dim_rate(table, ev, kU01);
  CHECK(r.converged);
  CHECK(r.value <= kOverflowRate + 1e-8);
}

TEST_CASE("finite-dimensional rate increases under refinement toward the entropy") {
  const kernels::PsiEvaluator ev(RenewalLaw::exponential(1.0));
  double last = -1.0;
  for (std::size_t k : {2u, 4u, 8u}) {
    const auto r = rate::finite_dim_rate(
        rate::increments_from_tilt(overflow_path(), rate::Partition::uniform(1.0, k, 2.0, 2 * k)), ev, kU01);
    CHECK(r.value >= last - 1e-9);
    CHECK(r.value <= kOverflowRate + 1e-8);
    last = r.value;
  }
  CHECK(last > 0.9 * kOverflowRate);
}

TEST_CASE("negative increments are infinitely unlikely") {
  const kernels::PsiEvaluator ev(RenewalLaw::exponential(1.0));
  auto table = rate::increments_from_tilt(scaled_f(1.0, 1.0), rate::Partition::uniform(1.0, 2, 2.0, 4));
  table.deltas(0, 1) = -0.05;
  CHECK(rate::finite_dim_rate(table, ev, kU01).infinite);
}

TEST_CASE("objective gradient matches finite differences") {
  const kernels::PsiEvaluator ev(RenewalLaw::gamma(2.0, 2.0));
  const auto table = rate::increments_from_tilt(overflow_path(), rate::Partition::uniform(1.0, 3, 2.0, 4));
  const rate::FiniteDimObjective obj(table, ev, kU01);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Matrix th(obj.rows(), obj.cols());
  for (auto& x : th.data()) x = U(gen);
  const auto g = obj.gradient(th);
  const double h = 1e-6;
  for (std::size_t i = 0; i < obj.rows(); ++i) {
    for (std::size_t j = 0; j < obj.cols(); ++j) {
      if (obj.cell_mass(i, j) <= 0.0) continue;
      Matrix p = th, m = th;
      p(i, j) += h;
      m(i, j) -= h;
      const double fd = (obj.value(p) - obj.value(m)) / (2.0 * h);
      CHECK(g(i, j) == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    }
  }
}

TEST_CASE("objective is concave along random lines") {
  const kernels::PsiEvaluator ev(RenewalLaw::uniform(0.5, 1.5));
  const auto table = rate::increments_from_tilt(overflow_path(), rate::Partition::uniform(1.0, 2, 2.0, 4));
  const rate::FiniteDimObjective obj(table, ev, kU01);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> N;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a(obj.rows(), obj.cols()), d(obj.rows(), obj.cols());
    for (auto& x : a.data()) x = N(gen);
    for (auto& x : d.data()) x = N(gen);
    auto at = [&](double s) {
      Matrix m = a;
      for (std::size_t k = 0; k < m.data().size(); ++k) m.data()[k] += s * d.data()[k];
      return obj.value(m);
    };
    CHECK(at(0.1) - 2.0 * at(0.0) + at(-0.1) <= 1e-9);
  }
}

TEST_CASE("renewal arrivals: deterministic gaps are costlier to deviate than Poisson") {
  // psi of deterministic gaps lies below e^theta - 1 for theta != 0, so the
  // Legendre transform is larger
  const auto table = rate::increments_from_tilt(overflow_path(), rate::Partition::uniform(1.0, 2, 2.0, 4));
  const auto poi = rate::finite_dim_rate(table, kernels::PsiEvaluator(RenewalLaw::exponential(1.0)), kU01);
  const auto det = rate::finite_dim_rate(table, kernels::PsiEvaluator(RenewalLaw::deterministic(1.0)), kU01);
  CHECK(det.value > poi.value);
}

TEST_CASE("truncated rate is nondecreasing in K and reaches I") {
  const kernels::PsiEvaluator ev(RenewalLaw::exponential(1.0));
  const auto v = overflow_path();
  double last = -1.0;
  for (double K : {0.25, 0.5, 0.75, 1.0}) {
    const double r = rate::truncated_rate(v, ev, kU01, K, 1.0).value;
    CHECK(r >= last - 1e-12);
    last = r;
  }
  CHECK(last == doctest::Approx(kOverflowRate).epsilon(1e-8));
}

TEST_CASE("truncated finite-dimensional rate for renewal arrivals is monotone in K") {
  const kernels::PsiEvaluator ev(RenewalLaw::gamma(2.0, 2.0));
  const auto v = overflow_path();
  const auto part = rate::Partition::uniform(1.0, 4, 2.0, 8);
  double last = -1.0;
  for (double K : {0.25, 0.5, 1.0}) {
    const double r = rate::truncated_rate(v, ev, kU01, K, 1.0, part).value;
    CHECK(r >= last - 1e-7);
    last = r;
  }
}

TEST_CASE("partitions that cut across the tilt's jump approach I from below") {
  // no y node at the exit epoch 1, so the jump of v/f is never resolved exactly
  const kernels::PsiEvaluator ev(RenewalLaw::exponential(1.0));
  std::vector<double> vals;
  for (std::size_t k : {2u, 4u, 8u, 16u, 32u}) {
    vals.push_back(rate::finite_dim_rate(
                       rate::increments_from_tilt(overflow_path(), rate::Partition::uniform(1.0, k, 2.5, k)),
                       ev, kU01)
                       .value);
  }
  for (std::size_t k = 1; k < vals.size(); ++k) CHECK(vals[k] > vals[k - 1]);
  CHECK(vals.back() < kOverflowRate);
  CHECK(vals.back() > 0.95 * kOverflowRate);
}

TEST_CASE("gradient ascent converges for renewal arrivals") {
  const kernels::PsiEvaluator ev(RenewalLaw::gamma(2.0, 2.0));
  const auto table = rate::increments_from_tilt(overflow_path(), rate::Partition::uniform(1.0, 4, 2.0, 8));
  const auto r = rate::finite_dim_rate(table, ev, kU01);
  CHECK(r.converged);
  CHECK(r.gradient_norm < 1e-8);
  CHECK(r.value > 0.0);
}
