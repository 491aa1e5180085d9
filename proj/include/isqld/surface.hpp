#pragma once

// Rectangular grids and two-parameter fields sampled on them.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace isqld {

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Tensor grid over [0, T] x [0, Y_max]; both node lists start at 0 and are
/// strictly increasing.
class SurfaceGrid {
 public:
  SurfaceGrid(std::vector<double> t_nodes, std::vector<double> y_nodes);

  /// nt + 1 and ny + 1 equispaced nodes.
  static SurfaceGrid uniform(double T, std::size_t nt, double y_max, std::size_t ny);

  const std::vector<double>& t_nodes() const { return t_; }
  const std::vector<double>& y_nodes() const { return y_; }
  double horizon() const { return t_.back(); }
  double y_max() const { return y_.back(); }

  /// Index of node `y` within tolerance, if present.
  std::optional<std::size_t> find_y(double y) const;
  std::optional<std::size_t> find_t(double t) const;

  bool operator==(const SurfaceGrid&) const = default;

 private:
  std::vector<double> t_;
  std::vector<double> y_;
};

/// q(t_i, y_j) sampled on a grid. Simulated surfaces hold integer counts
/// (`scaled == false`) or counts divided by lambda; model surfaces are
/// always scaled.
struct OccupancySurface {
  SurfaceGrid grid;
  Matrix values;
  bool scaled = true;
  std::optional<double> lambda;

  double at(std::size_t i, std::size_t j) const { return values(i, j); }

  /// Step-function evaluation in y at a t-node: exact when y is a node,
  /// otherwise the value at the largest node below y. Throws RangeError
  /// beyond the grid.
  double lookup(std::size_t i, double y) const;

  /// Copy divided by lambda (no-op when already scaled).
  OccupancySurface to_scaled() const;

  /// max |a - b| over the common grid.
  static double sup_distance(const OccupancySurface& a, const OccupancySurface& b);
};

}  // namespace isqld
