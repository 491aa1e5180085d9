#include "isqld/surface_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "isqld/errors.hpp"

namespace isqld::io {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last) throw ConfigError("not a number: '" + s + "'");
  return x;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw Error("failed to format number");
  return std::string(buf, ptr);
}

void write_surface_csv(std::ostream& os, const OccupancySurface& surf) {
  const auto& ts = surf.grid.t_nodes();
  const auto& ys = surf.grid.y_nodes();
  os << "t/y";
  for (double y : ys) os << ',' << format_double(y);
  os << '\n';
  for (std::size_t i = 0; i < ts.size(); ++i) {
    os << format_double(ts[i]);
    for (std::size_t j = 0; j < ys.size(); ++j) os << ',' << format_double(surf.at(i, j));
    os << '\n';
  }
}

OccupancySurface read_surface_csv(std::istream& is, bool scaled) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("surface CSV is empty");
  auto header = split_row(line);
  if (header.size() < 2) throw ConfigError("surface CSV header has no y nodes");
  std::vector<double> ys;
  for (std::size_t k = 1; k < header.size(); ++k) ys.push_back(parse_double(header[k]));

  std::vector<double> ts;
  std::vector<double> vals;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_row(line);
    if (cells.size() != ys.size() + 1) {
      throw ConfigError("surface CSV row has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(ys.size() + 1));
    }
    ts.push_back(parse_double(cells[0]));
    for (std::size_t k = 1; k < cells.size(); ++k) vals.push_back(parse_double(cells[k]));
  }
  if (ts.empty()) throw ConfigError("surface CSV has no rows");
  Matrix m(ts.size(), ys.size());
  m.data() = std::move(vals);
  return OccupancySurface{SurfaceGrid(std::move(ts), std::move(ys)), std::move(m), scaled,
                          std::nullopt};
}

nlohmann::json surface_to_json(const OccupancySurface& surf) {
  nlohmann::json j;
  j["grid"] = {{"t", surf.grid.t_nodes()}, {"y", surf.grid.y_nodes()}};
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < surf.values.rows(); ++i) {
    auto r = surf.values.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["values"] = std::move(rows);
  j["lambda"] = surf.lambda ? nlohmann::json(*surf.lambda) : nlohmann::json(nullptr);
  j["scaled"] = surf.scaled;
  return j;
}

OccupancySurface surface_from_json(const nlohmann::json& j) {
  try {
    SurfaceGrid grid(j.at("grid").at("t").get<std::vector<double>>(),
                     j.at("grid").at("y").get<std::vector<double>>());
    const auto& rows = j.at("values");
    const std::size_t nt = grid.t_nodes().size();
    const std::size_t ny = grid.y_nodes().size();
    if (rows.size() != nt) throw ConfigError("surface JSON: values has wrong row count");
    Matrix m(nt, ny);
    for (std::size_t i = 0; i < nt; ++i) {
      auto r = rows[i].get<std::vector<double>>();
      if (r.size() != ny) throw ConfigError("surface JSON: ragged values row");
      std::copy(r.begin(), r.end(), m.row(i).begin());
    }
    std::optional<double> lambda;
    if (j.contains("lambda") && !j["lambda"].is_null()) lambda = j["lambda"].get<double>();
    return OccupancySurface{std::move(grid), std::move(m), j.value("scaled", true), lambda};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("surface JSON: ") + e.what());
  }
}

void write_events_csv(std::ostream& os, const sim::EventLog& log) {
  os << "arrival_epoch,service_time\n";
  for (std::size_t n = 0; n < log.size(); ++n) {
    os << format_double(log.arrivals[n]) << ',' << format_double(log.services[n]) << '\n';
  }
}

sim::EventLog read_events_csv(std::istream& is, double lambda, double horizon) {
  sim::EventLog log;
  log.lambda = lambda;
  log.horizon = horizon;
  std::string line;
  if (!std::getline(is, line)) return log;
  if (split_row(line).size() != 2) throw ConfigError("event CSV needs two columns");
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_row(line);
    if (cells.size() != 2) throw ConfigError("event CSV row must have two cells");
    log.arrivals.push_back(parse_double(cells[0]));
    log.services.push_back(parse_double(cells[1]));
  }
  return log;
}

void save_surface_csv(const std::string& path, const OccupancySurface& surf) {
  std::ostringstream os;
  write_surface_csv(os, surf);
  save_text(path, os.str());
}

OccupancySurface load_surface_csv(const std::string& path, bool scaled) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_surface_csv(in, scaled);
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

}  // namespace isqld::io
