#pragma once

// Most likely paths for two rare events driven by Poisson (rate 1, scaled)
// arrivals into an infinite-server queue:
//   * overflow: the number in system reaches x before T;
//   * ruin: an aggregate loss with per-customer payoffs h1 / h2 reaches x
//     before T.
// Both are solved for a fixed horizon u through a Lagrange multiplier mu,
// then u is chosen by a sweep over (0, T].

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "isqld/distributions.hpp"
#include "isqld/simulator.hpp"
#include "isqld/surface.hpp"
#include "isqld/tilt.hpp"

namespace isqld::paths {

using sim::Payoff;

struct OverflowProblem {
  ServiceLaw svc;
  double x;
  double T;
  std::size_t u_points = 64;
};

struct RuinProblem {
  ServiceLaw svc;
  Payoff h1;
  Payoff h2;
  double x;
  double T;
  /// Candidate horizons; empty means T k / 64, k = 1..64.
  std::vector<double> u_grid;
};

struct HorizonPoint {
  double u;
  double mu;
  double rate;
  bool feasible;
};

/// Grid resolution for the surfaces attached to a solution.
struct SurfaceOptions {
  std::size_t nt = 32;
  std::size_t ny = 32;
};

struct OptimalPath {
  TiltDensity tilt;
  OccupancySurface surface_qbar;
  OccupancySurface surface_q;
  double mu;
  double u_star;
  double rate;
  double constraint_value;
  std::vector<HorizonPoint> sweep;

  /// {mu, u_star, rate, constraint_value}
  nlohmann::json summary() const;
};

/// Upper end of the service window: M if bounded, else the 1 - 1e-10 quantile.
double service_reach(const ServiceLaw& svc);

// ---- overflow -------------------------------------------------------------

/// mu(u) = x / int_0^u Fbar.
double overflow_multiplier(const ServiceLaw& svc, double x, double u);
/// int_0^u Fbar + x (log(x / int_0^u Fbar) - 1).
double overflow_rate(const ServiceLaw& svc, double x, double u);

/// v = f off the region {t <= u < t + r}, mu f on it.
TiltDensity overflow_tilt(const ServiceLaw& svc, double T, double u, double mu);

/// Closed-form residual surface q(t, y) (customers present at t with more
/// than y service left) and the two-parameter qbar(t, y) of the tilted path.
double overflow_q(const ServiceLaw& svc, double u, double mu, double t, double y);
double overflow_qbar(const ServiceLaw& svc, double u, double mu, double t, double y);

/// q(t_i, y_j) on `grid` (y read as residual time).
OccupancySurface overflow_surface(const OverflowProblem& p, double u, double mu,
                                  const SurfaceGrid& grid);
OccupancySurface overflow_surface_qbar(const OverflowProblem& p, double u, double mu,
                                       const SurfaceGrid& grid);

/// Number in system at u along an arbitrary tilt.
double overflow_constraint(const TiltDensity& v, double u);

/// Throws InfeasibleError when int_0^T Fbar >= x.
OptimalPath solve_overflow(const OverflowProblem& p, const SurfaceOptions& opt = {});

// ---- ruin -----------------------------------------------------------------

/// Whole-life policy: benefit b at death, premium rate p, force of interest
/// delta. h1(s, y) = b e^{-delta y} - p (e^{-delta s} - e^{-delta y}) / delta,
/// h2(s, t) = -p (e^{-delta s} - e^{-delta t}) / delta.
std::pair<Payoff, Payoff> whole_life_payoffs(double b, double p, double delta);

struct GValue {
  double value;
  double derivative;
};

/// G(mu) = int_0^u ( int_t^u f(y - t) e^{mu h1} h1 dy + Fbar(u - t) e^{mu h2} h2 ) dt
/// and G'(mu), by nested adaptive quadrature.
GValue multiplier_equation_G(const RuinProblem& rp, double u, double mu);

/// Solves G(mu) = x. InfeasibleError if G(0) >= x, BracketError if G stays
/// below x.
double solve_multiplier(const RuinProblem& rp, double u);

/// Entropy of the tilted path at horizon u:
/// int_0^u int f(r) (e^{mu H}(mu H - 1) + 1) dr dt.
double ruin_rate(const RuinProblem& rp, double u, double mu);

/// v = f e^{mu h1(t, t + r)} for t + r <= u, f e^{mu h2(t, u)} beyond, f after u.
TiltDensity ruin_tilt(const RuinProblem& rp, double u, double mu);

/// S(u) along an arbitrary tilt.
double ruin_constraint(const RuinProblem& rp, const TiltDensity& v, double u);

/// InfeasibleError if G(0) >= x for every candidate u.
OptimalPath solve_ruin(const RuinProblem& rp, const SurfaceOptions& opt = {});

/// Closed-form q(t, y) for the whole-life instance with p = 1, delta = 0,
/// uniform[0, 1] lifetimes and u = 1.
double insurance_q(double mu, double b, double t, double y);
OccupancySurface insurance_surface(double mu, double b, const SurfaceGrid& grid);
/// Residual surface by integrating the ruin tilt (any instance).
OccupancySurface insurance_surface_numeric(const RuinProblem& rp, double u, double mu,
                                           const SurfaceGrid& grid);

// ---- local optimality ------------------------------------------------------

struct PerturbationReport {
  double base_rate;
  double min_change;        // min over trials of rate(v + eps w) - rate(v)
  double max_constraint_drift;
  std::size_t trials;
  bool passed;              // min_change >= -tolerance
};

/// Random smooth perturbations w that keep the active constraint at its
/// value; the rate must not drop by more than `tolerance`.
PerturbationReport perturb_overflow(const OverflowProblem& p, const OptimalPath& sol,
                                    std::size_t trials, double eps, std::uint64_t seed,
                                    double tolerance = 1e-8);
PerturbationReport perturb_ruin(const RuinProblem& rp, const OptimalPath& sol,
                                std::size_t trials, double eps, std::uint64_t seed,
                                double tolerance = 1e-8);

}  // namespace isqld::paths
