#include "isqld/path_solver.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>

#include "isqld/errors.hpp"
#include "isqld/parallel.hpp"
#include "isqld/quadrature.hpp"
#include "isqld/rate.hpp"
#include "isqld/rng.hpp"

namespace isqld::paths {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double density(const ServiceLaw& svc, double r) {
  const auto f = svc.density(r);
  return f ? *f : 0.0;
}

void require_density(const ServiceLaw& svc, const char* what) {
  if (!svc.has_density()) throw DomainError(std::string(what) + " needs a service density");
}

// int_a^b Fbar, with Fbar = 1 on the negative half-line.
double tail_integral(const ServiceLaw& svc, double a, double b) {
  auto J = [&](double x) { return x < 0.0 ? x : svc.integrated_tail(x); };
  return J(b) - J(a);
}

std::vector<double> default_u_grid(double T, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = T * static_cast<double>(k + 1) / static_cast<double>(n);
  return g;
}

struct Candidate {
  double mu;
  double rate;
};

struct HorizonChoice {
  double u;
  Candidate best;
  std::vector<HorizonPoint> sweep;
};

bool better(double challenger, double incumbent) {
  return challenger < incumbent - 1e-12 * std::max(1.0, std::abs(incumbent));
}

// Grid sweep (ties go to the smaller u), then golden-section refinement
// around the grid argmin, kept only if it is strictly better.
HorizonChoice choose_horizon(const std::vector<double>& grid,
                             const std::function<std::optional<Candidate>(double)>& eval) {
  std::vector<std::optional<Candidate>> vals(grid.size());
  parallel_for(grid.size(), [&](std::size_t k) { vals[k] = eval(grid[k]); });

  HorizonChoice out;
  std::optional<std::size_t> arg;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& c = vals[k];
    out.sweep.push_back(HorizonPoint{grid[k], c ? c->mu : std::nan(""), c ? c->rate : kInf,
                                     c.has_value()});
    if (c && (!arg || better(c->rate, vals[*arg]->rate))) arg = k;
  }
  if (!arg) throw InfeasibleError("no candidate horizon makes the event rare");
  const std::size_t k = *arg;
  out.u = grid[k];
  out.best = *vals[k];

  double lo = k > 0 ? grid[k - 1] : 0.5 * grid[k];
  double hi = k + 1 < grid.size() ? grid[k + 1] : grid[k];
  if (!(hi > lo)) return out;
  auto rate_at = [&](double u) {
    auto c = eval(u);
    return c ? c->rate : kInf;
  };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - g * (hi - lo);
  double b = lo + g * (hi - lo);
  double fa = rate_at(a);
  double fb = rate_at(b);
  for (int it = 0; it < 80 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = rate_at(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = rate_at(b);
    }
  }
  const double u_ref = fa <= fb ? a : b;
  if (better(std::min(fa, fb), out.best.rate)) {
    out.u = u_ref;
    out.best = *eval(u_ref);
  }
  return out;
}

SurfaceGrid qbar_grid(double T, const ServiceLaw& svc, const SurfaceOptions& opt) {
  return SurfaceGrid::uniform(T, opt.nt, T + service_reach(svc), opt.ny);
}

SurfaceGrid residual_grid(double T, const ServiceLaw& svc, const SurfaceOptions& opt) {
  return SurfaceGrid::uniform(T, opt.nt, service_reach(svc), opt.ny);
}

// int_0^u ( int_t^{min(u, t+R)} f(y - t) g(h1(t, y)) dy + Fbar(u - t) g(h2(t, u)) ) dt
template <class G>
double nested(const RuinProblem& rp, double u, G&& g) {
  const double R = service_reach(rp.svc);
  std::vector<double> kinks = rp.svc.breakpoints();
  kinks.push_back(0.0);
  kinks.push_back(R);
  std::vector<double> outer_breaks;
  for (double b : kinks) outer_breaks.push_back(u - b);

  auto outer = [&](double t) {
    const double top = std::min(u, t + R);
    std::vector<double> inner_breaks;
    for (double b : kinks) inner_breaks.push_back(t + b);
    const double died = quad::adaptive(
        [&](double y) { return density(rp.svc, y - t) * g(rp.h1(t, y)); }, t, top,
        inner_breaks, 1e-12, 10);
    const double alive = rp.svc.tail(u - t);
    return died + (alive > 0.0 ? alive * g(rp.h2(t, u)) : 0.0);
  };
  return quad::adaptive(outer, 0.0, u, outer_breaks, 1e-12, 10);
}

double smooth_coefficient(Rng& rng) { return (2.0 * rng.uniform() - 1.0) / 9.0; }

// Random trigonometric field with |p| <= 1.
std::function<double(double, double)> random_field(Rng& rng, double T, double R) {
  std::array<double, 9> c{};
  for (double& x : c) x = smooth_coefficient(rng);
  return [c, T, R](double t, double r) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        s += c[3 * a + b] * std::cos(a * std::numbers::pi * t / T) *
             std::cos(b * std::numbers::pi * r / R);
      }
    }
    return s;
  };
}

}  // namespace

nlohmann::json OptimalPath::summary() const {
  return nlohmann::json{
      {"mu", mu}, {"u_star", u_star}, {"rate", rate}, {"constraint_value", constraint_value}};
}

double service_reach(const ServiceLaw& svc) {
  if (auto m = svc.support_bound()) return *m;
  return svc.quantile(1.0 - 1e-10);
}

// ---- overflow -------------------------------------------------------------

double overflow_multiplier(const ServiceLaw& svc, double x, double u) {
  return x / svc.integrated_tail(u);
}

double overflow_rate(const ServiceLaw& svc, double x, double u) {
  const double m = svc.integrated_tail(u);
  return m + x * (std::log(x / m) - 1.0);
}

TiltDensity overflow_tilt(const ServiceLaw& svc, double T, double u, double mu) {
  require_density(svc, "overflow tilt");
  auto v = [svc, u, mu](double t, double r) {
    const double f = density(svc, r);
    return (t <= u && t + r > u) ? mu * f : f;
  };
  TiltDensity::Breaks br{{u}, svc.breakpoints(), {u}};
  return TiltDensity(T, service_reach(svc), v, std::move(br));
}

double overflow_q(const ServiceLaw& svc, double u, double mu, double t, double y) {
  auto I = [&](double a, double b) { return tail_integral(svc, a, b); };
  if (t <= u) {
    if (t + y <= u) return I(y, y + t) - I(u - t, u) + mu * I(u - t, u);
    return mu * I(y, y + t);
  }
  return mu * I(t + y - u, t + y) + I(y, y + t - u);
}

double overflow_qbar(const ServiceLaw& svc, double u, double mu, double t, double y) {
  if (y >= t) return overflow_q(svc, u, mu, t, y - t);
  auto arrivals = [&](double s) {
    const double a = std::min(s, u);
    const double tilted = tail_integral(svc, u - a, u);
    return a - tilted + mu * tilted + std::max(0.0, s - u);
  };
  return overflow_q(svc, u, mu, y, 0.0) + arrivals(t) - arrivals(y);
}

OccupancySurface overflow_surface(const OverflowProblem& p, double u, double mu,
                                  const SurfaceGrid& grid) {
  const auto& ts = grid.t_nodes();
  const auto& ys = grid.y_nodes();
  Matrix q(ts.size(), ys.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) q(i, j) = overflow_q(p.svc, u, mu, ts[i], ys[j]);
  }
  return OccupancySurface{grid, std::move(q), true, std::nullopt};
}

OccupancySurface overflow_surface_qbar(const OverflowProblem& p, double u, double mu,
                                       const SurfaceGrid& grid) {
  const auto& ts = grid.t_nodes();
  const auto& ys = grid.y_nodes();
  Matrix q(ts.size(), ys.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) q(i, j) = overflow_qbar(p.svc, u, mu, ts[i], ys[j]);
  }
  return OccupancySurface{grid, std::move(q), true, std::nullopt};
}

double overflow_constraint(const TiltDensity& v, double u) { return rate::qbar_from_tilt(v, u, u); }

OptimalPath solve_overflow(const OverflowProblem& p, const SurfaceOptions& opt) {
  if (!(p.x > 0.0) || !(p.T > 0.0)) throw DomainError("overflow needs x > 0 and T > 0");
  if (p.u_points == 0) throw DomainError("overflow needs at least one candidate horizon");
  require_density(p.svc, "overflow");
  const double fluid = p.svc.integrated_tail(p.T);
  if (fluid >= p.x) {
    throw InfeasibleError("overflow level x is not rare: int_0^T Fbar = " + std::to_string(fluid) +
                          " >= x");
  }
  auto eval = [&](double u) -> std::optional<Candidate> {
    const double m = p.svc.integrated_tail(u);
    if (!(m > 0.0)) return std::nullopt;
    return Candidate{p.x / m, m + p.x * (std::log(p.x / m) - 1.0)};
  };
  const auto choice = choose_horizon(default_u_grid(p.T, p.u_points), eval);
  const double u = choice.u;
  const double mu = overflow_multiplier(p.svc, p.x, u);

  return OptimalPath{overflow_tilt(p.svc, p.T, u, mu),
                     overflow_surface_qbar(p, u, mu, qbar_grid(p.T, p.svc, opt)),
                     overflow_surface(p, u, mu, residual_grid(p.T, p.svc, opt)),
                     mu,
                     u,
                     overflow_rate(p.svc, p.x, u),
                     overflow_q(p.svc, u, mu, u, 0.0),
                     choice.sweep};
}

// ---- ruin -----------------------------------------------------------------

std::pair<Payoff, Payoff> whole_life_payoffs(double b, double p, double delta) {
  if (!(b >= 0.0) || !(p >= 0.0) || !(delta >= 0.0)) {
    throw DomainError("whole-life payoffs need b, p, delta >= 0");
  }
  // (e^{-delta s} - e^{-delta y}) / delta, with limit y - s at delta = 0
  auto annuity = [delta](double s, double y) {
    if (delta == 0.0) return y - s;
    return std::exp(-delta * s) * -std::expm1(-delta * (y - s)) / delta;
  };
  Payoff h1 = [=](double s, double y) { return b * std::exp(-delta * y) - p * annuity(s, y); };
  Payoff h2 = [=](double s, double t) { return -p * annuity(s, t); };
  return {h1, h2};
}

GValue multiplier_equation_G(const RuinProblem& rp, double u, double mu) {
  require_density(rp.svc, "ruin");
  const double value = nested(rp, u, [mu](double h) { return std::exp(mu * h) * h; });
  const double deriv = nested(rp, u, [mu](double h) { return std::exp(mu * h) * h * h; });
  return {value, deriv};
}

namespace {

double G_only(const RuinProblem& rp, double u, double mu) {
  return nested(rp, u, [mu](double h) { return std::exp(mu * h) * h; });
}

}  // namespace

double solve_multiplier(const RuinProblem& rp, double u) {
  require_density(rp.svc, "ruin");
  const double x = rp.x;
  const double g0 = G_only(rp, u, 0.0);
  if (g0 >= x) {
    throw InfeasibleError("G(0) = " + std::to_string(g0) + " >= x at u = " + std::to_string(u));
  }
  double lo = 0.0;
  double hi = 1.0;
  for (;;) {
    const double g = G_only(rp, u, hi);
    if (!(g < x)) break;  // includes +inf
    lo = hi;
    hi *= 2.0;
    if (hi > 0x1.0p30) throw BracketError("G(mu) stays below x for every finite mu");
  }
  double mu = 0.5 * (lo + hi);
  const double tol = 1e-13 * std::max(1.0, x);
  double resid = kInf;
  for (int it = 0; it < 200; ++it) {
    const auto G = multiplier_equation_G(rp, u, mu);
    resid = G.value - x;
    if (std::isfinite(resid) && std::abs(resid) <= tol) break;
    if (!(resid < 0.0)) {
      hi = mu;
    } else {
      lo = mu;
    }
    const double newton = mu - resid / G.derivative;
    mu = (std::isfinite(newton) && newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, hi)) {
      resid = G_only(rp, u, mu) - x;
      break;
    }
  }
  if (!(std::abs(resid) < 1e-8 * std::max(1.0, x))) {
    throw BracketError("multiplier equation did not converge at u = " + std::to_string(u));
  }
  return mu;
}

double ruin_rate(const RuinProblem& rp, double u, double mu) {
  require_density(rp.svc, "ruin");
  return nested(rp, u, [mu](double h) {
    const double z = mu * h;
    // z e^z - (e^z - 1) = sum_n (n - 1) z^n / n!; the series avoids the
    // cancellation that stalls adaptive quadrature as mu -> 0
    if (std::abs(z) < 1e-2) return z * z * (0.5 + z * (1.0 / 3.0 + z * (0.125 + z / 30.0)));
    return z * std::exp(z) - std::expm1(z);
  });
}

TiltDensity ruin_tilt(const RuinProblem& rp, double u, double mu) {
  require_density(rp.svc, "ruin tilt");
  auto v = [svc = rp.svc, h1 = rp.h1, h2 = rp.h2, u, mu](double t, double r) {
    const double f = density(svc, r);
    if (t > u || f == 0.0) return f;
    return f * std::exp(mu * (t + r <= u ? h1(t, t + r) : h2(t, u)));
  };
  TiltDensity::Breaks br{{u}, rp.svc.breakpoints(), {u}};
  return TiltDensity(rp.T, service_reach(rp.svc), v, std::move(br));
}

namespace {

std::function<double(double, double)> ruin_weight(const RuinProblem& rp, double u) {
  return [h1 = rp.h1, h2 = rp.h2, u](double s, double r) {
    if (s > u) return 0.0;
    return s + r <= u ? h1(s, s + r) : h2(s, u);
  };
}

}  // namespace

double ruin_constraint(const RuinProblem& rp, const TiltDensity& v, double u) {
  const auto H = ruin_weight(rp, u);
  return integrate_tilt_region(
      v, [&](double s, double r) { return v(s, r) * H(s, r); }, 0.0, u, 0.0, v.r_max());
}

OptimalPath solve_ruin(const RuinProblem& rp, const SurfaceOptions& opt) {
  if (!(rp.x > 0.0) || !(rp.T > 0.0)) throw DomainError("ruin needs x > 0 and T > 0");
  if (!rp.h1 || !rp.h2) throw DomainError("ruin needs both payoff functions");
  require_density(rp.svc, "ruin");
  std::vector<double> grid = rp.u_grid.empty() ? default_u_grid(rp.T, 64) : rp.u_grid;
  for (double u : grid) {
    if (!(u > 0.0) || u > rp.T) throw DomainError("candidate horizons must lie in (0, T]");
  }
  std::sort(grid.begin(), grid.end());

  std::atomic<bool> bracket_failure{false};
  auto eval = [&](double u) -> std::optional<Candidate> {
    try {
      const double mu = solve_multiplier(rp, u);
      return Candidate{mu, ruin_rate(rp, u, mu)};
    } catch (const InfeasibleError&) {
      return std::nullopt;
    } catch (const BracketError&) {
      bracket_failure = true;
      return std::nullopt;
    }
  };
  HorizonChoice choice;
  try {
    choice = choose_horizon(grid, eval);
  } catch (const InfeasibleError&) {
    if (bracket_failure) throw BracketError("no finite multiplier solves G(mu) = x");
    throw InfeasibleError("G(0) >= x at every candidate horizon: the event is not rare");
  }
  const double u = choice.u;
  const double mu = choice.best.mu;
  auto tilt = ruin_tilt(rp, u, mu);
  auto qbar = rate::surface_from_tilt(tilt, qbar_grid(rp.T, rp.svc, opt));
  auto q = rate::residual_from_tilt(tilt, residual_grid(rp.T, rp.svc, opt));
  const double constraint = G_only(rp, u, mu);
  return OptimalPath{std::move(tilt), std::move(qbar), std::move(q), mu, u,
                     choice.best.rate, constraint, choice.sweep};
}

double insurance_q(double mu, double b, double t, double y) {
  auto E = [](double z) { return std::exp(z); };
  if (y + t <= 1.0) {
    return (E(mu * b - mu * y) - E(mu * b - mu * y - mu * t) - E(mu * b - mu + mu * t) +
            E(mu * b - mu)) / (mu * mu) +
           t / mu * E(-mu + mu * t) - (E(-mu + mu * t) - E(-mu)) / (mu * mu);
  }
  return E(-mu * (2.0 - t - y)) *
         ((1.0 - y) / mu * E(mu - mu * y) - (E(mu - mu * y) - 1.0) / (mu * mu));
}

OccupancySurface insurance_surface(double mu, double b, const SurfaceGrid& grid) {
  const auto& ts = grid.t_nodes();
  const auto& ys = grid.y_nodes();
  Matrix q(ts.size(), ys.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) q(i, j) = insurance_q(mu, b, ts[i], ys[j]);
  }
  return OccupancySurface{grid, std::move(q), true, std::nullopt};
}

OccupancySurface insurance_surface_numeric(const RuinProblem& rp, double u, double mu,
                                           const SurfaceGrid& grid) {
  return rate::residual_from_tilt(ruin_tilt(rp, u, mu), grid);
}

// ---- local optimality ------------------------------------------------------

namespace {

// Shared driver: w = f (p - c H) with c chosen so that int f (p - c H) H = 0
// over the constrained region.
PerturbationReport perturb(const ServiceLaw& svc, double T, const TiltDensity& v,
                           const std::function<double(double, double)>& H,
                           const std::function<double(const TiltDensity&)>& constraint,
                           std::size_t trials, double eps, std::uint64_t seed, double tolerance) {
  const double base = rate::poisson_rate(v, svc, T).value;
  const double c0 = constraint(v);
  std::vector<double> change(trials), drift(trials);
  parallel_for(trials, [&](std::size_t k) {
    Rng rng(stream_seed(seed, k, Stream::kAux));
    const auto p = random_field(rng, T, v.r_max());
    auto fH = [&](double s, double r) { return density(svc, r) * H(s, r); };
    const double hh = integrate_tilt_region(
        v, [&](double s, double r) { return fH(s, r) * H(s, r); }, 0.0, T, 0.0, v.r_max());
    const double ph = integrate_tilt_region(
        v, [&](double s, double r) { return fH(s, r) * p(s, r); }, 0.0, T, 0.0, v.r_max());
    const double c = ph / hh;
    auto field = [base_field = v.field(), svc, H, p, c, eps](double t, double r) {
      const double w = density(svc, r) * (p(t, r) - c * H(t, r));
      return std::max(0.0, base_field(t, r) + eps * w);
    };
    const auto moved = v.with_field(field);
    change[k] = rate::poisson_rate(moved, svc, T).value - base;
    drift[k] = std::abs(constraint(moved) - c0);
  });
  PerturbationReport rep{base, kInf, 0.0, trials, true};
  for (std::size_t k = 0; k < trials; ++k) {
    rep.min_change = std::min(rep.min_change, change[k]);
    rep.max_constraint_drift = std::max(rep.max_constraint_drift, drift[k]);
  }
  rep.passed = rep.min_change >= -tolerance;
  return rep;
}

}  // namespace

PerturbationReport perturb_overflow(const OverflowProblem& p, const OptimalPath& sol,
                                    std::size_t trials, double eps, std::uint64_t seed,
                                    double tolerance) {
  const double u = sol.u_star;
  auto H = [u](double s, double r) { return (s <= u && s + r > u) ? 1.0 : 0.0; };
  auto constraint = [u](const TiltDensity& v) { return overflow_constraint(v, u); };
  return perturb(p.svc, p.T, sol.tilt, H, constraint, trials, eps, seed, tolerance);
}

PerturbationReport perturb_ruin(const RuinProblem& rp, const OptimalPath& sol,
                                std::size_t trials, double eps, std::uint64_t seed,
                                double tolerance) {
  const double u = sol.u_star;
  auto constraint = [&rp, u](const TiltDensity& v) { return ruin_constraint(rp, v, u); };
  return perturb(rp.svc, rp.T, sol.tilt, ruin_weight(rp, u), constraint, trials, eps, seed,
                 tolerance);
}

}  // namespace isqld::paths
