#include <doctest.h>

#include <cmath>
#include <sstream>

#include "isqld/errors.hpp"
#include "isqld/simulator.hpp"
#include "isqld/surface_io.hpp"

using namespace isqld;

namespace {

OccupancySurface awkward_surface() {
  const SurfaceGrid grid({0.0, 0.1, 1.0 / 3.0, 1.0}, {0.0, 0.7, 2.0 / 3.0 + 1.0, 1e-300 + 3.0});
  Matrix m(4, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) m(i, j) = std::sqrt(2.0) * static_cast<double>(i) / (j + 3.0) + 1e-17 * j;
  }
  return OccupancySurface{grid, m, true, std::nullopt};
}

}  // namespace

TEST_CASE("surface CSV round trip is bit exact") {
  const auto surf = awkward_surface();
  std::stringstream ss;
  io::write_surface_csv(ss, surf);
  const auto back = io::read_surface_csv(ss);
  CHECK(back.grid == surf.grid);
  CHECK(back.values == surf.values);
  CHECK(back.scaled);
}

TEST_CASE("surface CSV header") {
  std::stringstream ss;
  io::write_surface_csv(ss, awkward_surface());
  std::string header;
  std::getline(ss, header);
  CHECK(header.rfind("t/y,0,0.7,", 0) == 0);
}

TEST_CASE("surface JSON round trip keeps lambda and scaling") {
  auto surf = awkward_surface();
  surf.scaled = false;
  surf.lambda = 250.0;
  const auto back = io::surface_from_json(io::surface_to_json(surf));
  CHECK(back.values == surf.values);
  CHECK(back.grid == surf.grid);
  CHECK_FALSE(back.scaled);
  REQUIRE(back.lambda.has_value());
  CHECK(*back.lambda == 250.0);
}

TEST_CASE("event CSV round trip") {
  const auto log = sim::simulate(RenewalLaw::exponential(1.0), ServiceLaw::exponential(2.0), 20.0, 1.0, 4);
  std::stringstream ss;
  io::write_events_csv(ss, log);
  const auto back = io::read_events_csv(ss, 20.0, 1.0);
  CHECK(back.arrivals == log.arrivals);
  CHECK(back.services == log.services);
}

TEST_CASE("malformed input is a configuration error") {
  std::stringstream ragged("t/y,0,1\n0,1\n");
  CHECK_THROWS_AS(io::read_surface_csv(ragged), ConfigError);
  std::stringstream junk("t/y,0,1\n0,1,abc\n");
  CHECK_THROWS_AS(io::read_surface_csv(junk), ConfigError);
  std::stringstream events("arrival_epoch,service_time\n0.1\n");
  CHECK_THROWS_AS(io::read_events_csv(events), ConfigError);
  CHECK_THROWS_AS(io::surface_from_json(nlohmann::json{{"grid", 3}}), ConfigError);
}

TEST_CASE("format_double is shortest round trip") {
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
