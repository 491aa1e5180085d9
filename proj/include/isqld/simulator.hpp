#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "isqld/distributions.hpp"
#include "isqld/surface.hpp"

namespace isqld::sim {

/// One realization of the lambda-scaled system: arrival epochs A_n / lambda
/// in [0, T] (strictly increasing) with their service requirements.
struct EventLog {
  double lambda = 1.0;
  double horizon = 0.0;
  std::vector<double> arrivals;
  std::vector<double> services;
  std::uint64_t seed = 0;

  std::size_t size() const { return arrivals.size(); }
};

/// Right-continuous step path sampled at `times`.
struct StepPath {
  std::vector<double> times;
  std::vector<double> values;
};

/// Arrivals come lambda times faster: epochs are partial sums of U_n / lambda
/// up to T. Draws are keyed by (seed, replication) so any replication can be
/// regenerated on its own.
EventLog simulate(const RenewalLaw& arrivals, const ServiceLaw& service, double lambda,
                  double T, std::uint64_t seed, std::uint64_t replication = 0);

/// Exact counts #{n : a_n <= t, a_n + V_n > y} at every grid node.
OccupancySurface build_surface(const EventLog& log, const SurfaceGrid& grid);

/// Default window: Y_max = T + M for bounded service, else T plus the
/// 0.9999 quantile.
SurfaceGrid default_grid(double T, const ServiceLaw& service, std::size_t nt, std::size_t ny);

/// Q(t, u) = qbar(t, u + t) on the grid (t_nodes x u_nodes). With no
/// u_nodes, uses every y node u with t_max + u <= y_max.
OccupancySurface residual_view(const OccupancySurface& surf, std::span<const double> u_nodes = {});

/// Arrival and departure paths: N(t) = qbar(t, 0), D(t) = qbar(t, 0) - qbar(t, t).
std::pair<StepPath, StepPath> counting_processes(const OccupancySurface& surf);

/// Drops customers with service requirement above K.
EventLog truncate_events(const EventLog& log, double K);

/// Payoff of one policyholder: h(s, y) with s the arrival epoch.
using Payoff = std::function<double(double, double)>;

/// S(t) = sum over arrivals by t of h1(a, a + V) if the customer has left by
/// t, else h2(a, t).
StepPath aggregate_loss(const EventLog& log, const Payoff& h1, const Payoff& h2,
                        std::span<const double> t_nodes);

/// Number in system at time t.
std::size_t number_in_system(const EventLog& log, double t);

/// max over t in [0, T] of the number in system (attained at arrival epochs).
std::size_t max_in_system(const EventLog& log);

}  // namespace isqld::sim
