#include <doctest.h>

#include <cmath>

#include "isqld/errors.hpp"
#include "isqld/path_solver.hpp"
#include "isqld/rate.hpp"

using namespace isqld;

namespace {

const auto kU01 = ServiceLaw::uniform(0.0, 1.0);

// int_a^b Fbar for uniform[0, 1], written out
double tail_u01(double a, double b) {
  auto G = [](double s) {
    if (s <= 0.0) return s;
    if (s >= 1.0) return 0.5;
    return s - 0.5 * s * s;
  };
  return G(b) - G(a);
}

// the two branches of q(t, y) for t <= u
double q_inner(double u, double mu, double t, double y) {
  return tail_u01(y, y + t) - tail_u01(u - t, u) + mu * tail_u01(u - t, u);
}
double q_outer(double mu, double t, double y) { return mu * tail_u01(y, y + t); }

paths::RuinProblem ruin_instance(double x = 10.0) {
  auto [h1, h2] = paths::whole_life_payoffs(1.5, 1.0, 0.0);
  return paths::RuinProblem{kU01, h1, h2, x, 1.0, {}};
}

}  // namespace

TEST_CASE("overflow: multiplier and rate") {
  CHECK(paths::overflow_multiplier(kU01, 2.0, 1.0) == 4.0);
  CHECK(paths::overflow_multiplier(kU01, 2.0, 0.5) == doctest::Approx(2.0 / 0.375));
  CHECK(paths::overflow_rate(kU01, 2.0, 1.0) ==
        doctest::Approx(0.5 + 2.0 * (std::log(4.0) - 1.0)).epsilon(1e-12));
}

TEST_CASE("overflow rate is nonincreasing in the horizon, so u* = T") {
  double last = INFINITY;
  for (int k = 1; k <= 20; ++k) {
    const double r = paths::overflow_rate(kU01, 2.0, k / 20.0);
    CHECK(r <= last);
    last = r;
  }
}

TEST_CASE("overflow example") {
  const auto sol = paths::solve_overflow({kU01, 2.0, 1.0});
  CHECK(sol.mu == 4.0);
  CHECK(sol.u_star == 1.0);
  CHECK(std::abs(sol.rate - (0.5 + 2.0 * (std::log(4.0) - 1.0))) < 1e-9);
  CHECK(std::abs(sol.constraint_value - 2.0) < 1e-12);
  CHECK(paths::overflow_q(kU01, 1.0, 4.0, 1.0, 0.0) == doctest::Approx(2.0).epsilon(1e-14));
  // solver and evaluator agree
  CHECK(rate::poisson_rate(sol.tilt, kU01, 1.0).value == doctest::Approx(sol.rate).epsilon(1e-8));
  CHECK(paths::overflow_constraint(sol.tilt, sol.u_star) == doctest::Approx(2.0).epsilon(1e-10));
  const auto s = sol.summary();
  CHECK(s["mu"] == 4.0);
  CHECK(sol.sweep.size() == 64);
}

TEST_CASE("overflow closed form: branches, seam and t = 0") {
  const double u = 1.0, mu = 4.0;
  for (int k = 0; k <= 20; ++k) {
    const double t = k / 20.0;
    const double y = u - t;
    CHECK(std::abs(q_inner(u, mu, t, y) - q_outer(mu, t, y)) < 1e-10);
    CHECK(paths::overflow_q(kU01, u, mu, t, y) == doctest::Approx(q_inner(u, mu, t, y)).epsilon(1e-13));
    CHECK(paths::overflow_q(kU01, u, mu, 0.0, y) == 0.0);
  }
  CHECK(paths::overflow_q(kU01, u, mu, 0.3, 0.9) == doctest::Approx(q_outer(mu, 0.3, 0.9)));
  CHECK(paths::overflow_q(kU01, u, mu, 0.3, 0.2) == doctest::Approx(q_inner(u, mu, 0.3, 0.2)));
}

TEST_CASE("overflow closed-form surface matches integration of the tilt") {
  const auto tilt = paths::overflow_tilt(kU01, 1.0, 1.0, 4.0);
  const auto grid = SurfaceGrid::uniform(1.0, 5, 1.0, 5);
  const auto closed = paths::overflow_surface({kU01, 2.0, 1.0}, 1.0, 4.0, grid);
  const auto numeric = rate::residual_from_tilt(tilt, grid);
  CHECK(OccupancySurface::sup_distance(closed, numeric) < 1e-10);
}

TEST_CASE("overflow that is not rare is rejected") {
  CHECK_THROWS_AS(paths::solve_overflow({kU01, 0.4, 1.0}), InfeasibleError);
  CHECK_THROWS_AS(paths::solve_overflow({ServiceLaw::deterministic(1.0), 2.0, 1.0}), DomainError);
}

TEST_CASE("whole-life payoffs") {
  auto [h1, h2] = paths::whole_life_payoffs(1.5, 1.0, 0.0);
  CHECK(h1(0.2, 0.5) == doctest::Approx(1.2));
  CHECK(h2(0.0, 1.0) == doctest::Approx(-1.0));
  auto [g1, g2] = paths::whole_life_payoffs(2.0, 0.0, 0.3);
  CHECK(g1(0.1, 0.6) == doctest::Approx(2.0 * std::exp(-0.18)));
  CHECK(g2(0.1, 0.6) == 0.0);
  // small delta tends to the delta = 0 limit
  auto [e1, e2] = paths::whole_life_payoffs(1.5, 1.0, 1e-9);
  CHECK(e1(0.2, 0.5) == doctest::Approx(1.2).epsilon(1e-7));
  CHECK(e2(0.3, 0.9) == doctest::Approx(-0.6).epsilon(1e-7));
}

TEST_CASE("G at mu = 0 is the fluid loss and G is increasing") {
  const auto rp = ruin_instance();
  // int_0^1 (int_t^1 (1.5 - (y - t)) dy - t (1 - t)) dt = 3/4 - 1/6 - 1/6
  CHECK(paths::multiplier_equation_G(rp, 1.0, 0.0).value == doctest::Approx(5.0 / 12.0).epsilon(1e-10));
  double last = -INFINITY;
  for (double mu : {0.0, 0.5, 1.0, 2.0, 3.0}) {
    const auto g = paths::multiplier_equation_G(rp, 1.0, mu);
    CHECK(g.value > last);
    CHECK(g.derivative > 0.0);
    last = g.value;
  }
  const double h = 1e-5;
  const double fd = (paths::multiplier_equation_G(rp, 1.0, 2.0 + h).value -
                     paths::multiplier_equation_G(rp, 1.0, 2.0 - h).value) / (2.0 * h);
  CHECK(paths::multiplier_equation_G(rp, 1.0, 2.0).derivative == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("ruin example") {
  const auto rp = ruin_instance();
  const auto sol = paths::solve_ruin(rp, {8, 8});
  CHECK(sol.u_star == 1.0);
  CHECK(std::abs(sol.mu - 2.251) < 0.01);
  CHECK(std::abs(paths::multiplier_equation_G(rp, 1.0, sol.mu).value - 10.0) < 1e-6);
  CHECK(sol.rate == doctest::Approx(paths::ruin_rate(rp, 1.0, sol.mu)));
  // solver and evaluator agree
  CHECK(rate::poisson_rate(sol.tilt, kU01, 1.0).value == doctest::Approx(sol.rate).epsilon(1e-5));
  CHECK(paths::ruin_constraint(rp, sol.tilt, 1.0) == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("arrival-count constraint reduces to x (log(x / u) - 1) + u") {
  const paths::Payoff one = [](double, double) { return 1.0; };
  for (double x : {2.0, 3.5}) {
    const paths::RuinProblem rp{kU01, one, one, x, 1.0, {1.0}};
    const auto sol = paths::solve_ruin(rp, {4, 4});
    CHECK(std::abs(sol.rate - (x * (std::log(x) - 1.0) + 1.0)) < 1e-8);
    CHECK(sol.mu == doctest::Approx(std::log(x)).epsilon(1e-10));
  }
}

TEST_CASE("ruin that is not rare is rejected") {
  auto rp = ruin_instance(0.1);
  rp.u_grid = {0.75, 1.0};  // G(0) passes 0.1 near u = 0.54
  CHECK_THROWS_AS(paths::solve_ruin(rp), InfeasibleError);
  const paths::Payoff zero = [](double, double) { return 0.0; };
  CHECK_THROWS_AS(paths::solve_ruin({kU01, zero, zero, 1.0, 1.0, {1.0}}), BracketError);
}

TEST_CASE("insurance closed form: seam, t = 0 and numeric tilt") {
  const double mu = 2.251, b = 1.5;
  for (int k = 0; k <= 10; ++k) {
    CHECK(paths::insurance_q(mu, b, 0.0, k / 10.0) == doctest::Approx(0.0).scale(1.0));
    const double t = k / 10.0, y = 1.0 - t;
    const double below = paths::insurance_q(mu, b, t, std::nextafter(y, 0.0));
    const double above = paths::insurance_q(mu, b, t, std::nextafter(y, 2.0));
    CHECK(std::abs(below - above) < 1e-10);
  }
  const auto rp = ruin_instance();
  const auto grid = SurfaceGrid({0.0, 0.5, 1.0}, {0.0, 0.25, 0.75});
  const auto num = paths::insurance_surface_numeric(rp, 1.0, mu, grid);
  const auto closed = paths::insurance_surface(mu, b, grid);
  CHECK(num.at(1, 1) == doctest::Approx(closed.at(1, 1)).epsilon(1e-6));
  CHECK(OccupancySurface::sup_distance(num, closed) < 1e-6);
}

TEST_CASE("perturbations preserving the constraint do not lower the rate") {
  const paths::OverflowProblem op{kU01, 2.0, 1.0};
  const auto so = paths::solve_overflow(op);
  const auto ro = paths::perturb_overflow(op, so, 12, 1e-3, 3);
  CHECK(ro.passed);
  CHECK(ro.min_change >= -1e-8);
  CHECK(ro.max_constraint_drift < 1e-8);

  const auto rp = ruin_instance();
  const auto sr = paths::solve_ruin(rp, {4, 4});
  const auto rr = paths::perturb_ruin(rp, sr, 12, 1e-3, 3);
  CHECK(rr.passed);
  CHECK(rr.min_change >= -1e-8);
}

TEST_CASE("perturbations that break the constraint can lower the rate") {
  // scaling the tilt toward f is cheaper but misses x
  const paths::OverflowProblem op{kU01, 2.0, 1.0};
  const auto so = paths::solve_overflow(op);
  const auto v = so.tilt;
  const auto towards_f = v.with_field([v](double t, double r) { return 0.99 * v(t, r) + 0.01 * (r <= 1.0); });
  CHECK(rate::poisson_rate(towards_f, kU01, 1.0).value < so.rate);
  CHECK(paths::overflow_constraint(towards_f, 1.0) < 2.0);
}

TEST_CASE("ruin just inside the rare region has a tiny rate") {
  auto rp = ruin_instance(0.1);
  rp.u_grid = {0.25, 0.5, 0.75};
  const auto sol = paths::solve_ruin(rp, {4, 4});
  CHECK(sol.u_star > 0.5);
  CHECK(sol.u_star < 0.75);
  CHECK(sol.rate >= 0.0);
  CHECK(sol.rate < paths::ruin_rate(rp, 0.5, paths::solve_multiplier(rp, 0.5)));
  CHECK(sol.constraint_value == doctest::Approx(0.1).epsilon(1e-8));
}
