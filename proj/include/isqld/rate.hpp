#pragma once

// Large-deviations rate functional of the occupancy surface.
//
// Two evaluators are provided:
//   * the relative-entropy form for Poisson arrivals,
//       I(v) = int_0^T int_0^inf [v log(v / (rho f)) - v + rho f] dr dt;
//   * the finite-dimensional form for general renewal arrivals, the Legendre
//     transform of the increments delta_ij of the surface over a partition,
//       sup_Theta sum theta_ij delta_ij
//                 - sum_i int_{t_i}^{t_{i+1}} psi(log sum_j e^theta_ij p_j(u)) du,
//     where p_j(u) = P(y_j < u + V <= y_{j+1}).
// The finite-dimensional values increase to I as the partition refines.

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "isqld/distributions.hpp"
#include "isqld/kernels.hpp"
#include "isqld/surface.hpp"
#include "isqld/tilt.hpp"

namespace isqld::rate {

struct RateResult {
  double value = 0.0;
  bool infinite = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = true;

  static RateResult finite(double v) { return RateResult{v, false, 0, 0.0, true}; }
  static RateResult infinity() {
    return RateResult{std::numeric_limits<double>::infinity(), true, 0, 0.0, true};
  }
  nlohmann::json to_json() const;
};

/// qbar(t_i, y_j) = int_0^{t_i} int_{(y_j - s)^+}^inf v(s, r) dr ds.
OccupancySurface surface_from_tilt(const TiltDensity& v, const SurfaceGrid& grid);
/// Residual view q(t_i, u_k) = qbar(t_i, t_i + u_k), computed directly.
OccupancySurface residual_from_tilt(const TiltDensity& v, const SurfaceGrid& grid);
/// Single evaluation of qbar(t, y).
double qbar_from_tilt(const TiltDensity& v, double t, double y);

/// Relative-entropy rate for Poisson arrivals of intensity `rho` over [0, T].
/// Infinite when v > 0 where f = 0. Requires a service density.
RateResult poisson_rate(const TiltDensity& v, const ServiceLaw& svc, double T, double rho = 1.0);

/// Restriction of v to r <= K (the truncation map on tilts).
TiltDensity phi_truncate(const TiltDensity& v, double K);

/// Partition of [0, T] x [0, inf): t and y both start at 0, the last y cell
/// is (y.back(), inf).
struct Partition {
  std::vector<double> t;
  std::vector<double> y;

  /// t-step T/m, y-step y_max/n.
  static Partition uniform(double T, std::size_t m, double y_max, std::size_t n);
  void validate() const;
};

/// Mixed second differences of qbar over a partition:
/// deltas(i, j) = qbar(t_{i+1}, y_j) - qbar(t_{i+1}, y_{j+1})
///              - qbar(t_i, y_j) + qbar(t_i, y_{j+1}),  qbar(., inf) = 0.
struct IncrementTable {
  Partition partition;
  Matrix deltas;  // (t.size() - 1) x y.size()

  /// Sum of deltas(l, r) over l < i, r >= j: qbar(t_i, y_j).
  double reconstruct(std::size_t i, std::size_t j) const;
};

IncrementTable increments_from_surface(const OccupancySurface& surf, const Partition& part);

/// Increments of v computed straight from the tilt (no surface grid).
IncrementTable increments_from_tilt(const TiltDensity& v, const Partition& part);

/// The concave objective Lambda(Theta) of the finite-dimensional rate.
/// With a truncation level K the cells only see services <= K and the
/// mass Fbar(K) enters with theta = 0.
class FiniteDimObjective {
 public:
  FiniteDimObjective(const IncrementTable& d, const kernels::PsiEvaluator& ev,
                     const ServiceLaw& svc, std::optional<double> K = std::nullopt);

  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return cols_; }

  /// Total objective; cells with zero probability on their row do not
  /// contribute, whatever their theta.
  double value(const Matrix& theta) const;
  Matrix gradient(const Matrix& theta) const;

  /// Integral over row i of p_j(u) du.
  double cell_mass(std::size_t i, std::size_t j) const { return rows_[i].mass[j]; }

  /// Quadrature data of one t-interval: weights, the theta-free mass
  /// Fbar(K) and the cell probabilities p_j at each node.
  struct Row {
    std::vector<double> weight;
    std::vector<double> offset;
    Matrix prob;  // nodes x cols
    std::vector<double> mass;
  };
  const Row& row(std::size_t i) const { return rows_[i]; }
  const kernels::PsiEvaluator& psi() const { return ev_; }
  const IncrementTable& table() const { return table_; }

 private:
  std::vector<Row> rows_;
  std::size_t cols_ = 0;
  kernels::PsiEvaluator ev_;
  IncrementTable table_;
};

struct FiniteDimOptions {
  double gradient_tol = 1e-8;
  double ceiling = 1e6;
  int max_iterations = 2000;
};

/// sup_Theta Lambda(Theta) by diagonally scaled gradient ascent with Armijo
/// backtracking, row by row (rows are independent).
RateResult finite_dim_rate(const IncrementTable& d, const kernels::PsiEvaluator& ev,
                           const ServiceLaw& svc, std::optional<double> K = std::nullopt,
                           const FiniteDimOptions& opt = {});

/// I_K for a tilt. Poisson arrivals use the entropy form restricted to
/// r <= K; other arrival laws evaluate the finite-dimensional rate of the
/// truncated path on `part` (default: 16 x 32 cells over [0, T] x [0, T + K]).
RateResult truncated_rate(const TiltDensity& v, const kernels::PsiEvaluator& ev,
                          const ServiceLaw& svc, double K, double T,
                          const std::optional<Partition>& part = std::nullopt);

}  // namespace isqld::rate
