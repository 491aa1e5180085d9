#pragma once

// Tilt densities v(t, r): the intensity of arrivals at time t whose service
// requirement is r along a deviated path. Every variational problem in the
// library is posed in terms of v.

#include <functional>
#include <vector>

#include "isqld/surface.hpp"

namespace isqld {

class TiltDensity {
 public:
  using Field = std::function<double(double t, double r)>;

  /// Lines on which v may be discontinuous or kinked. Integrals split their
  /// panels there so that Gauss-Legendre sees smooth pieces only.
  struct Breaks {
    std::vector<double> t;         // t = const
    std::vector<double> r;         // r = const
    std::vector<double> diagonal;  // t + r = const (fixed exit epochs)
  };

  /// v on [0, horizon] x [0, r_max]; zero outside.
  TiltDensity(double horizon, double r_max, Field v, Breaks breaks = {});

  /// Piecewise constant on the cells [t_i, t_{i+1}) x [r_j, r_{j+1}) of
  /// `grid` (t playing the role of t, y the role of r); `cells` is
  /// (nt - 1) x (nr - 1).
  static TiltDensity from_cells(const SurfaceGrid& grid, const Matrix& cells);

  double operator()(double t, double r) const;
  double horizon() const { return horizon_; }
  double r_max() const { return r_max_; }
  const Breaks& breaks() const { return breaks_; }
  const Field& field() const { return v_; }

  /// Same window and breaks, different field (for perturbations).
  TiltDensity with_field(Field v) const;
  /// Same field restricted to r <= K.
  TiltDensity restricted(double K) const;

  /// Values at the grid nodes, for export.
  Matrix sample(const SurfaceGrid& grid) const;

  /// Integral of v over its window.
  double mass() const;

 private:
  double horizon_;
  double r_max_;
  Field v_;
  Breaks breaks_;
};

/// Integral of g(s, r) over s in [t0, t1], r in [(y - s)^+, r_hi], with the
/// panel structure of `shape` (plus `extra_r` as additional r-breaks).
/// g is responsible for including v; `shape` only supplies the geometry.
double integrate_tilt_region(const TiltDensity& shape,
                             const std::function<double(double, double)>& g, double t0,
                             double t1, double y, double r_hi,
                             const std::vector<double>& extra_r = {});

}  // namespace isqld
