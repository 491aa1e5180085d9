#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "isqld/distributions.hpp"
#include "isqld/simulator.hpp"
#include "isqld/surface.hpp"

using namespace isqld;

namespace {

std::size_t brute_in_system(const sim::EventLog& log, double t) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    if (log.arrivals[k] <= t && log.arrivals[k] + log.services[k] > t) ++n;
  }
  return n;
}

std::size_t brute_qbar(const sim::EventLog& log, double t, double y) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    if (log.arrivals[k] <= t && log.arrivals[k] + log.services[k] > y) ++n;
  }
  return n;
}

const auto kPoisson = RenewalLaw::exponential(1.0);
const auto kU01 = ServiceLaw::uniform(0.0, 1.0);

}  // namespace

TEST_CASE("simulation is reproducible per replication") {
  const auto a = sim::simulate(kPoisson, kU01, 40.0, 2.0, 7, 3);
  const auto b = sim::simulate(kPoisson, kU01, 40.0, 2.0, 7, 3);
  const auto c = sim::simulate(kPoisson, kU01, 40.0, 2.0, 7, 4);
  CHECK(a.arrivals == b.arrivals);
  CHECK(a.services == b.services);
  CHECK(a.arrivals != c.arrivals);
}

TEST_CASE("event log is sorted and inside the horizon") {
  const auto log = sim::simulate(RenewalLaw::gamma(2.0, 2.0), kU01, 100.0, 1.5, 11);
  CHECK(std::is_sorted(log.arrivals.begin(), log.arrivals.end()));
  CHECK(log.arrivals.size() == log.services.size());
  for (double a : log.arrivals) CHECK((a > 0.0 && a <= 1.5));
  for (double v : log.services) CHECK((v >= 0.0 && v <= 1.0));
  // about lambda T arrivals
  CHECK(std::abs(static_cast<double>(log.size()) - 150.0) < 60.0);
}

TEST_CASE("deterministic gaps give exactly floor(lambda T) arrivals") {
  const auto log = sim::simulate(RenewalLaw::deterministic(1.0), kU01, 10.0, 1.0, 1);
  CHECK(log.size() == 10);
  CHECK(log.arrivals.front() == doctest::Approx(0.1));
}

TEST_CASE("surface counts match brute force") {
  const auto log = sim::simulate(kPoisson, kU01, 60.0, 1.0, 5);
  const auto grid = SurfaceGrid::uniform(1.0, 8, 2.0, 16);
  const auto surf = sim::build_surface(log, grid);
  CHECK_FALSE(surf.scaled);
  for (std::size_t i = 0; i < grid.t_nodes().size(); ++i) {
    for (std::size_t j = 0; j < grid.y_nodes().size(); ++j) {
      CHECK(surf.at(i, j) == static_cast<double>(
                                 brute_qbar(log, grid.t_nodes()[i], grid.y_nodes()[j])));
    }
  }
  const auto scaled = surf.to_scaled();
  CHECK(scaled.at(8, 0) == doctest::Approx(surf.at(8, 0) / 60.0));
}

TEST_CASE("surface is monotone: nondecreasing in t, nonincreasing in y") {
  const auto log = sim::simulate(RenewalLaw::uniform(0.5, 1.5), ServiceLaw::exponential(1.0), 80.0,
                                 1.0, 9);
  const auto surf = sim::build_surface(log, sim::default_grid(1.0, ServiceLaw::exponential(1.0), 10, 20));
  for (std::size_t i = 0; i < surf.values.rows(); ++i) {
    for (std::size_t j = 0; j < surf.values.cols(); ++j) {
      if (i > 0) CHECK(surf.at(i, j) >= surf.at(i - 1, j));
      if (j > 0) CHECK(surf.at(i, j) <= surf.at(i, j - 1));
    }
  }
}

TEST_CASE("number in system and its maximum") {
  const auto log = sim::simulate(kPoisson, kU01, 30.0, 1.0, 21);
  for (double t : {0.1, 0.35, 0.8, 1.0}) CHECK(sim::number_in_system(log, t) == brute_in_system(log, t));
  std::size_t best = 0;
  for (double a : log.arrivals) best = std::max(best, brute_in_system(log, a));
  CHECK(sim::max_in_system(log) == best);
}

TEST_CASE("residual view reads qbar(t, t + u)") {
  const auto log = sim::simulate(kPoisson, kU01, 50.0, 1.0, 2);
  const auto grid = SurfaceGrid::uniform(1.0, 4, 2.0, 8);
  const auto res = sim::residual_view(sim::build_surface(log, grid));
  for (std::size_t i = 0; i < res.grid.t_nodes().size(); ++i) {
    const double t = res.grid.t_nodes()[i];
    for (std::size_t k = 0; k < res.grid.y_nodes().size(); ++k) {
      const double u = res.grid.y_nodes()[k];
      CHECK(res.at(i, k) == static_cast<double>(brute_qbar(log, t, t + u)));
    }
  }
  CHECK(res.at(4, 0) == static_cast<double>(sim::number_in_system(log, 1.0)));
}

TEST_CASE("truncation drops exactly the long services") {
  const auto log = sim::simulate(kPoisson, ServiceLaw::exponential(1.0), 40.0, 1.0, 3);
  const auto cut = sim::truncate_events(log, 0.5);
  const auto kept = std::count_if(log.services.begin(), log.services.end(),
                                  [](double v) { return v <= 0.5; });
  CHECK(cut.size() == static_cast<std::size_t>(kept));
  for (double v : cut.services) CHECK(v <= 0.5);
}

TEST_CASE("aggregate loss with unit payoffs counts arrivals") {
  const auto log = sim::simulate(kPoisson, kU01, 25.0, 1.0, 8);
  const sim::Payoff one = [](double, double) { return 1.0; };
  const std::vector<double> nodes{0.0, 0.25, 0.5, 1.0};
  const auto s = sim::aggregate_loss(log, one, one, nodes);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto n = std::count_if(log.arrivals.begin(), log.arrivals.end(),
                                 [&](double a) { return a <= nodes[k]; });
    CHECK(s.values[k] == doctest::Approx(static_cast<double>(n)));
  }
}

TEST_CASE("counting processes: arrivals minus departures is the number in system") {
  const auto log = sim::simulate(kPoisson, kU01, 30.0, 1.0, 12);
  const auto grid = SurfaceGrid::uniform(1.0, 10, 2.0, 20);
  const auto [arr, dep] = sim::counting_processes(sim::build_surface(log, grid));
  for (std::size_t k = 0; k < arr.times.size(); ++k) {
    CHECK(arr.values[k] - dep.values[k] ==
          doctest::Approx(static_cast<double>(sim::number_in_system(log, arr.times[k]))));
  }
}
