#pragma once

// CSV / JSON serialization of surfaces and event logs.
//
// Surface CSV: first row "t/y,y_0,...,y_n", then one row per t node
// "t_i,q_i0,...,q_in". Numbers are written in their shortest round-trip form,
// so a write/read cycle reproduces every value bit for bit.
//
// Surface JSON: {"grid": {"t": [...], "y": [...]}, "values": [[...], ...],
//                "lambda": number | null, "scaled": bool}

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "isqld/simulator.hpp"
#include "isqld/surface.hpp"

namespace isqld::io {

void write_surface_csv(std::ostream& os, const OccupancySurface& surf);
OccupancySurface read_surface_csv(std::istream& is, bool scaled = true);

nlohmann::json surface_to_json(const OccupancySurface& surf);
OccupancySurface surface_from_json(const nlohmann::json& j);

/// Columns arrival_epoch,service_time.
void write_events_csv(std::ostream& os, const sim::EventLog& log);
sim::EventLog read_events_csv(std::istream& is, double lambda = 1.0, double horizon = 0.0);

/// File helpers; throw Error on I/O failure.
void save_surface_csv(const std::string& path, const OccupancySurface& surf);
OccupancySurface load_surface_csv(const std::string& path, bool scaled = true);
void save_text(const std::string& path, const std::string& text);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

}  // namespace isqld::io
