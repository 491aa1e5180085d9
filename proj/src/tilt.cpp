#include "isqld/tilt.hpp"

#include <algorithm>
#include <cmath>

#include "isqld/errors.hpp"
#include "isqld/quadrature.hpp"

namespace isqld {

TiltDensity::TiltDensity(double horizon, double r_max, Field v, Breaks breaks)
    : horizon_(horizon), r_max_(r_max), v_(std::move(v)), breaks_(std::move(breaks)) {
  if (!(horizon >= 0.0)) throw DomainError("tilt horizon must be non-negative");
  if (!(r_max > 0.0)) throw DomainError("tilt r_max must be positive");
  if (!v_) throw DomainError("tilt field is empty");
}

TiltDensity TiltDensity::from_cells(const SurfaceGrid& grid, const Matrix& cells) {
  const auto& ts = grid.t_nodes();
  const auto& rs = grid.y_nodes();
  if (ts.size() < 2 || rs.size() < 2 || cells.rows() != ts.size() - 1 ||
      cells.cols() != rs.size() - 1) {
    throw PartitionError("tilt cells must be (nt - 1) x (nr - 1)");
  }
  for (double c : cells.data()) {
    if (!(c >= 0.0)) throw DomainError("tilt values must be non-negative");
  }
  Field v = [ts, rs, cells](double t, double r) {
    auto i = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
    auto j = static_cast<std::size_t>(std::upper_bound(rs.begin(), rs.end(), r) - rs.begin());
    i = std::clamp<std::size_t>(i, 1, ts.size() - 1) - 1;
    j = std::clamp<std::size_t>(j, 1, rs.size() - 1) - 1;
    return cells(i, j);
  };
  return TiltDensity(ts.back(), rs.back(), std::move(v), Breaks{ts, rs, {}});
}

double TiltDensity::operator()(double t, double r) const {
  if (t < 0.0 || t > horizon_ || r < 0.0 || r > r_max_) return 0.0;
  return v_(t, r);
}

TiltDensity TiltDensity::with_field(Field v) const {
  return TiltDensity(horizon_, r_max_, std::move(v), breaks_);
}

TiltDensity TiltDensity::restricted(double K) const {
  if (!(K > 0.0)) throw DomainError("truncation level K must be positive");
  return TiltDensity(horizon_, std::min(r_max_, K), v_, breaks_);
}

Matrix TiltDensity::sample(const SurfaceGrid& grid) const {
  const auto& ts = grid.t_nodes();
  const auto& rs = grid.y_nodes();
  Matrix out(ts.size(), rs.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t j = 0; j < rs.size(); ++j) out(i, j) = (*this)(ts[i], rs[j]);
  }
  return out;
}

double TiltDensity::mass() const {
  return integrate_tilt_region(
      *this, [this](double s, double r) { return (*this)(s, r); }, 0.0, horizon_, 0.0, r_max_);
}

double integrate_tilt_region(const TiltDensity& shape,
                             const std::function<double(double, double)>& g, double t0,
                             double t1, double y, double r_hi,
                             const std::vector<double>& extra_r) {
  t1 = std::min(t1, shape.horizon());
  r_hi = std::min(r_hi, shape.r_max());
  if (!(t1 > t0) || !(r_hi > 0.0)) return 0.0;

  const auto& br = shape.breaks();
  std::vector<double> r_lines = br.r;
  r_lines.insert(r_lines.end(), extra_r.begin(), extra_r.end());

  // Outer kinks: where the lower limit (y - s)^+ or a diagonal line crosses
  // a constant-r line, plus the explicit t-breaks.
  std::vector<double> s_breaks = br.t;
  std::vector<double> r_edges = r_lines;
  r_edges.push_back(0.0);
  r_edges.push_back(r_hi);
  for (double R : r_edges) {
    s_breaks.push_back(y - R);
    for (double d : br.diagonal) s_breaks.push_back(d - R);
  }

  auto outer = [&](double s) {
    const double lo = std::max(0.0, y - s);
    if (!(r_hi > lo)) return 0.0;
    std::vector<double> inner_breaks = r_lines;
    for (double d : br.diagonal) inner_breaks.push_back(d - s);
    return quad::gauss_legendre([&](double r) { return g(s, r); }, lo, r_hi, inner_breaks);
  };
  return quad::gauss_legendre(outer, t0, t1, s_breaks);
}

}  // namespace isqld
