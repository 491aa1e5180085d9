#include "isqld/surface.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "isqld/errors.hpp"

namespace isqld {

namespace {

void validate_nodes(const std::vector<double>& nodes, const char* name) {
  if (nodes.empty()) throw PartitionError(std::string(name) + " must not be empty");
  if (nodes.front() != 0.0) throw PartitionError(std::string(name) + " must start at 0");
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    if (!(nodes[k] > nodes[k - 1])) {
      throw PartitionError(std::string(name) + " must be strictly increasing");
    }
  }
}

std::optional<std::size_t> find_node(const std::vector<double>& nodes, double x) {
  const double tol = 1e-9 * std::max(1.0, std::abs(x));
  auto it = std::lower_bound(nodes.begin(), nodes.end(), x - tol);
  if (it != nodes.end() && std::abs(*it - x) <= tol) {
    return static_cast<std::size_t>(it - nodes.begin());
  }
  return std::nullopt;
}

}  // namespace

SurfaceGrid::SurfaceGrid(std::vector<double> t_nodes, std::vector<double> y_nodes)
    : t_(std::move(t_nodes)), y_(std::move(y_nodes)) {
  validate_nodes(t_, "t_nodes");
  validate_nodes(y_, "y_nodes");
}

SurfaceGrid SurfaceGrid::uniform(double T, std::size_t nt, double y_max, std::size_t ny) {
  if (!(T >= 0.0) || !(y_max > 0.0) || ny == 0) {
    throw PartitionError("uniform grid needs T >= 0, y_max > 0, ny >= 1");
  }
  std::vector<double> t{0.0};
  if (T > 0.0) {
    if (nt == 0) throw PartitionError("uniform grid needs nt >= 1 for T > 0");
    t.resize(nt + 1);
    for (std::size_t i = 0; i <= nt; ++i) t[i] = T * static_cast<double>(i) / static_cast<double>(nt);
  }
  std::vector<double> y(ny + 1);
  for (std::size_t j = 0; j <= ny; ++j) y[j] = y_max * static_cast<double>(j) / static_cast<double>(ny);
  return SurfaceGrid(std::move(t), std::move(y));
}

std::optional<std::size_t> SurfaceGrid::find_y(double y) const { return find_node(y_, y); }
std::optional<std::size_t> SurfaceGrid::find_t(double t) const { return find_node(t_, t); }

double OccupancySurface::lookup(std::size_t i, double y) const {
  if (auto j = grid.find_y(y)) return values(i, *j);
  const auto& ys = grid.y_nodes();
  if (y > ys.back() || y < 0.0) {
    throw RangeError("y = " + std::to_string(y) + " outside the surface window [0, " +
                     std::to_string(ys.back()) + "]");
  }
  auto it = std::upper_bound(ys.begin(), ys.end(), y);
  return values(i, static_cast<std::size_t>(it - ys.begin()) - 1);
}

OccupancySurface OccupancySurface::to_scaled() const {
  if (scaled) return *this;
  if (!lambda || !(*lambda > 0.0)) throw DomainError("cannot scale a surface without lambda");
  OccupancySurface out = *this;
  for (double& v : out.values.data()) v /= *lambda;
  out.scaled = true;
  return out;
}

double OccupancySurface::sup_distance(const OccupancySurface& a, const OccupancySurface& b) {
  if (!(a.grid == b.grid)) throw PartitionError("surfaces live on different grids");
  double d = 0.0;
  for (std::size_t k = 0; k < a.values.data().size(); ++k) {
    d = std::max(d, std::abs(a.values.data()[k] - b.values.data()[k]));
  }
  return d;
}

}  // namespace isqld
