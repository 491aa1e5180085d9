#include "isqld/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "isqld/errors.hpp"
#include "isqld/rng.hpp"

namespace isqld::sim {

EventLog simulate(const RenewalLaw& arrivals, const ServiceLaw& service, double lambda,
                  double T, std::uint64_t seed, std::uint64_t replication) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (!(T >= 0.0)) throw DomainError("horizon T must be non-negative");

  EventLog log;
  log.lambda = lambda;
  log.horizon = T;
  log.seed = seed;

  Rng gaps(stream_seed(seed, replication, Stream::kArrivals));
  Rng sizes(stream_seed(seed, replication, Stream::kServices));
  // Accumulate in base time and divide once, so that epochs are exactly A_n / lambda.
  double base_time = 0.0;
  for (;;) {
    base_time += arrivals.sample(gaps);
    const double epoch = base_time / lambda;
    if (epoch > T) break;
    log.arrivals.push_back(epoch);
    log.services.push_back(service.sample(sizes));
  }
  return log;
}

OccupancySurface build_surface(const EventLog& log, const SurfaceGrid& grid) {
  const auto& ts = grid.t_nodes();
  const auto& ys = grid.y_nodes();
  const std::size_t nt = ts.size();
  const std::size_t ny = ys.size();

  // A customer (a, a + V) is counted at (t_i, y_j) iff t_i >= a and y_j < a + V:
  // a lower-left block of the grid. Mark its corner, then take the 2-D
  // cumulative sum (down in i, leftwards in j).
  Matrix marks(nt, ny);
  for (std::size_t n = 0; n < log.size(); ++n) {
    const double a = log.arrivals[n];
    const double exit = a + log.services[n];
    const auto i0 = static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), a) - ts.begin());
    const auto j1 = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), exit) - ys.begin());
    if (i0 < nt && j1 > 0) marks(i0, j1 - 1) += 1.0;
  }
  Matrix q(nt, ny);
  for (std::size_t i = 0; i < nt; ++i) {
    double run = 0.0;
    for (std::size_t j = ny; j-- > 0;) {
      run += marks(i, j);
      q(i, j) = run + (i > 0 ? q(i - 1, j) : 0.0);
    }
  }
  return OccupancySurface{grid, std::move(q), false, log.lambda};
}

SurfaceGrid default_grid(double T, const ServiceLaw& service, std::size_t nt, std::size_t ny) {
  const auto bound = service.support_bound();
  const double reach = bound ? *bound : service.quantile(0.9999);
  return SurfaceGrid::uniform(T, nt, T + reach, ny);
}

OccupancySurface residual_view(const OccupancySurface& surf, std::span<const double> u_nodes) {
  const auto& ts = surf.grid.t_nodes();
  const auto& ys = surf.grid.y_nodes();
  std::vector<double> us(u_nodes.begin(), u_nodes.end());
  if (us.empty()) {
    const double room = ys.back() - ts.back();
    for (double y : ys) {
      if (y <= room + 1e-12 * std::max(1.0, room)) us.push_back(y);
    }
    if (us.empty()) throw RangeError("surface window leaves no room for residual times");
  }
  SurfaceGrid out_grid(ts, us);
  Matrix q(ts.size(), us.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t k = 0; k < us.size(); ++k) q(i, k) = surf.lookup(i, ts[i] + us[k]);
  }
  return OccupancySurface{std::move(out_grid), std::move(q), surf.scaled, surf.lambda};
}

std::pair<StepPath, StepPath> counting_processes(const OccupancySurface& surf) {
  const auto& ts = surf.grid.t_nodes();
  StepPath arrivals{ts, std::vector<double>(ts.size())};
  StepPath departures{ts, std::vector<double>(ts.size())};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    arrivals.values[i] = surf.at(i, 0);
    departures.values[i] = surf.at(i, 0) - surf.lookup(i, ts[i]);
  }
  return {std::move(arrivals), std::move(departures)};
}

EventLog truncate_events(const EventLog& log, double K) {
  if (!(K > 0.0)) throw DomainError("truncation level K must be positive");
  EventLog out;
  out.lambda = log.lambda;
  out.horizon = log.horizon;
  out.seed = log.seed;
  for (std::size_t n = 0; n < log.size(); ++n) {
    if (log.services[n] <= K) {
      out.arrivals.push_back(log.arrivals[n]);
      out.services.push_back(log.services[n]);
    }
  }
  return out;
}

StepPath aggregate_loss(const EventLog& log, const Payoff& h1, const Payoff& h2,
                        std::span<const double> t_nodes) {
  StepPath path{std::vector<double>(t_nodes.begin(), t_nodes.end()),
                std::vector<double>(t_nodes.size(), 0.0)};
  for (std::size_t k = 0; k < t_nodes.size(); ++k) {
    const double t = t_nodes[k];
    double total = 0.0;
    for (std::size_t n = 0; n < log.size() && log.arrivals[n] <= t; ++n) {
      const double a = log.arrivals[n];
      const double exit = a + log.services[n];
      total += (exit <= t) ? h1(a, exit) : h2(a, t);
    }
    path.values[k] = total;
  }
  return path;
}

std::size_t number_in_system(const EventLog& log, double t) {
  std::size_t count = 0;
  for (std::size_t n = 0; n < log.size() && log.arrivals[n] <= t; ++n) {
    if (log.arrivals[n] + log.services[n] > t) ++count;
  }
  return count;
}

std::size_t max_in_system(const EventLog& log) {
  // Occupancy only jumps up at arrivals; check it right after each one.
  std::priority_queue<double, std::vector<double>, std::greater<>> exits;
  std::size_t best = 0;
  for (std::size_t n = 0; n < log.size(); ++n) {
    const double a = log.arrivals[n];
    while (!exits.empty() && exits.top() <= a) exits.pop();
    exits.push(a + log.services[n]);
    best = std::max(best, exits.size());
  }
  return best;
}

}  // namespace isqld::sim
