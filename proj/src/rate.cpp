#include "isqld/rate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "isqld/errors.hpp"
#include "isqld/parallel.hpp"
#include "isqld/quadrature.hpp"

namespace isqld::rate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_nodes(const std::vector<double>& x, const char* name, std::size_t min_size) {
  if (x.size() < min_size) throw PartitionError(std::string(name) + " has too few nodes");
  if (x.front() != 0.0) throw PartitionError(std::string(name) + " must start at 0");
  for (std::size_t k = 1; k < x.size(); ++k) {
    if (!(x[k] > x[k - 1])) throw PartitionError(std::string(name) + " must be strictly increasing");
  }
}

// One evaluation of a row objective restricted to the cells in `active`.
struct RowEval {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> curv;
};

RowEval eval_row(const FiniteDimObjective::Row& row, const kernels::PsiEvaluator& ev,
                 const std::vector<std::size_t>& active, const std::vector<double>& delta,
                 const std::vector<double>& theta, bool want_grad) {
  RowEval out;
  const std::size_t na = active.size();
  if (want_grad) {
    out.grad.assign(na, 0.0);
    out.curv.assign(na, 0.0);
  }
  double linear = 0.0;
  double shift = 0.0;
  for (std::size_t a = 0; a < na; ++a) {
    linear += theta[a] * delta[a];
    shift = std::max(shift, theta[a]);
  }
  std::vector<double> scaled(na);
  for (std::size_t a = 0; a < na; ++a) scaled[a] = std::exp(theta[a] - shift);

  double integral = 0.0;
  const double floor_value = ev.lower_limit();
  for (std::size_t k = 0; k < row.weight.size(); ++k) {
    double inner = row.offset[k] * std::exp(-shift);
    for (std::size_t a = 0; a < na; ++a) inner += scaled[a] * row.prob(k, active[a]);
    double psi = 0.0;
    double slope = 0.0;
    if (!(inner > 0.0)) {
      // No admissible cell reachable from this arrival epoch.
      if (std::isinf(floor_value)) {
        out.value = kInf;
        return out;
      }
      psi = floor_value;
    } else {
      try {
        const auto r = ev.evaluate(shift + std::log(inner));
        psi = r.value;
        slope = r.slope;
      } catch (const Error&) {
        out.value = -kInf;
        return out;
      }
    }
    integral += row.weight[k] * psi;
    if (want_grad && inner > 0.0) {
      for (std::size_t a = 0; a < na; ++a) {
        const double share = scaled[a] * row.prob(k, active[a]) / inner;
        out.curv[a] += row.weight[k] * slope * share;
      }
    }
  }
  out.value = linear - integral;
  if (!std::isfinite(out.value) && out.value != kInf) out.value = -kInf;
  if (want_grad) {
    for (std::size_t a = 0; a < na; ++a) out.grad[a] = delta[a] - out.curv[a];
  }
  return out;
}

struct RowOutcome {
  double value = 0.0;
  bool infinite = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = true;
};

RowOutcome solve_row(const FiniteDimObjective& obj, std::size_t i, const FiniteDimOptions& opt) {
  const auto& row = obj.row(i);
  const auto& deltas = obj.table().deltas;
  const auto& ev = obj.psi();
  RowOutcome out;

  double scale = 0.0;
  for (double d : deltas.data()) scale = std::max(scale, std::abs(d));
  const double zero_tol = 1e-11 * scale;

  std::vector<std::size_t> active;
  std::vector<double> delta;
  for (std::size_t j = 0; j < obj.cols(); ++j) {
    const double d = deltas(i, j);
    if (d < -zero_tol) {
      // theta_ij -> -inf drives the objective to +inf
      out.infinite = true;
      return out;
    }
    if (d <= zero_tol) continue;
    if (!(row.mass[j] > 0.0)) {
      out.infinite = true;
      return out;
    }
    active.push_back(j);
    delta.push_back(d);
  }

  const double base_rate = 1.0 / ev.law().mean();
  std::vector<double> theta(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    theta[a] = std::log(delta[a] / (base_rate * row.mass[active[a]]));
  }

  RowEval cur = eval_row(row, ev, active, delta, theta, true);
  double alpha = 1.0;
  constexpr double kMaxStep = 2.0;
  for (int it = 0;; ++it) {
    if (cur.value == kInf || cur.value > opt.ceiling) {
      out.infinite = true;
      out.iterations = it;
      return out;
    }
    double gnorm = 0.0;
    for (double g : cur.grad) gnorm = std::max(gnorm, std::abs(g));
    out.gradient_norm = gnorm;
    out.iterations = it;
    out.value = cur.value;
    if (gnorm < opt.gradient_tol || active.empty()) return out;
    if (it >= opt.max_iterations) {
      out.converged = false;
      return out;
    }

    std::vector<double> dir(active.size());
    double slope = 0.0;
    double dmax = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      dir[a] = cur.grad[a] / std::max(cur.curv[a], 1e-300);
      slope += cur.grad[a] * dir[a];
      dmax = std::max(dmax, std::abs(dir[a]));
    }
    bool accepted = false;
    for (int halvings = 0; halvings < 80; ++halvings) {
      const double step = std::min(alpha, kMaxStep / dmax);
      std::vector<double> trial(theta);
      for (std::size_t a = 0; a < active.size(); ++a) trial[a] += step * dir[a];
      RowEval next = eval_row(row, ev, active, delta, trial, true);
      if (next.value >= cur.value + 1e-4 * step * slope) {
        theta = std::move(trial);
        cur = std::move(next);
        alpha = std::min(1.0, 2.0 * alpha);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No ascent left at working precision.
      out.converged = gnorm < 1e3 * opt.gradient_tol;
      return out;
    }
  }
}

}  // namespace

nlohmann::json RateResult::to_json() const {
  nlohmann::json j;
  if (infinite) {
    j["value"] = "infinite";
  } else {
    j["value"] = value;
  }
  j["iterations"] = iterations;
  j["gradient_norm"] = gradient_norm;
  j["converged"] = converged;
  return j;
}

double qbar_from_tilt(const TiltDensity& v, double t, double y) {
  return integrate_tilt_region(
      v, [&v](double s, double r) { return v(s, r); }, 0.0, t, std::max(0.0, y), v.r_max());
}

OccupancySurface surface_from_tilt(const TiltDensity& v, const SurfaceGrid& grid) {
  const auto& ts = grid.t_nodes();
  const auto& ys = grid.y_nodes();
  Matrix q(ts.size(), ys.size());
  parallel_for(ts.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < ys.size(); ++j) q(i, j) = qbar_from_tilt(v, ts[i], ys[j]);
  });
  return OccupancySurface{grid, std::move(q), true, std::nullopt};
}

OccupancySurface residual_from_tilt(const TiltDensity& v, const SurfaceGrid& grid) {
  const auto& ts = grid.t_nodes();
  const auto& us = grid.y_nodes();
  Matrix q(ts.size(), us.size());
  parallel_for(ts.size(), [&](std::size_t i) {
    for (std::size_t k = 0; k < us.size(); ++k) q(i, k) = qbar_from_tilt(v, ts[i], ts[i] + us[k]);
  });
  return OccupancySurface{grid, std::move(q), true, std::nullopt};
}

RateResult poisson_rate(const TiltDensity& v, const ServiceLaw& svc, double T, double rho) {
  if (!svc.has_density()) throw DomainError("poisson_rate needs a service density");
  if (!(rho > 0.0)) throw DomainError("Poisson intensity must be positive");
  if (!(T >= 0.0)) throw DomainError("horizon must be non-negative");
  bool infinite = false;
  auto integrand = [&](double s, double r) {
    const double val = v(s, r);
    const double f = *svc.density(r);
    if (val < 0.0) throw DomainError("tilt density is negative");
    if (val == 0.0) return rho * f;
    if (!(f > 0.0)) {
      infinite = true;
      return 0.0;
    }
    return val * std::log(val / (rho * f)) - val + rho * f;
  };
  const double covered = std::min(T, v.horizon());
  const double r_hi = v.r_max();
  double total = integrate_tilt_region(v, integrand, 0.0, covered, 0.0, r_hi, svc.breakpoints());
  if (infinite) return RateResult::infinity();
  total += rho * covered * svc.tail(r_hi);
  total += rho * std::max(0.0, T - covered);
  return RateResult::finite(total);
}

TiltDensity phi_truncate(const TiltDensity& v, double K) { return v.restricted(K); }

Partition Partition::uniform(double T, std::size_t m, double y_max, std::size_t n) {
  if (!(T > 0.0) || !(y_max > 0.0) || m == 0 || n == 0) {
    throw PartitionError("uniform partition needs T, y_max > 0 and m, n >= 1");
  }
  Partition p;
  for (std::size_t i = 0; i <= m; ++i) p.t.push_back(T * static_cast<double>(i) / static_cast<double>(m));
  for (std::size_t j = 0; j <= n; ++j) p.y.push_back(y_max * static_cast<double>(j) / static_cast<double>(n));
  return p;
}

void Partition::validate() const {
  check_nodes(t, "partition t", 2);
  check_nodes(y, "partition y", 1);
}

double IncrementTable::reconstruct(std::size_t i, std::size_t j) const {
  double sum = 0.0;
  for (std::size_t l = 0; l < i; ++l) {
    for (std::size_t r = j; r < deltas.cols(); ++r) sum += deltas(l, r);
  }
  return sum;
}

namespace {

IncrementTable increments_from_values(const Partition& part, const Matrix& q) {
  const std::size_t m = part.t.size() - 1;
  const std::size_t n = part.y.size();
  auto at = [&](std::size_t i, std::size_t j) { return j < n ? q(i, j) : 0.0; };
  Matrix d(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d(i, j) = at(i + 1, j) - at(i + 1, j + 1) - at(i, j) + at(i, j + 1);
    }
  }
  return IncrementTable{part, std::move(d)};
}

}  // namespace

IncrementTable increments_from_surface(const OccupancySurface& surf, const Partition& part) {
  part.validate();
  const OccupancySurface scaled = surf.scaled ? surf : surf.to_scaled();
  Matrix q(part.t.size(), part.y.size());
  for (std::size_t i = 0; i < part.t.size(); ++i) {
    const auto gi = scaled.grid.find_t(part.t[i]);
    if (!gi) throw PartitionError("partition t node not on the surface grid");
    for (std::size_t j = 0; j < part.y.size(); ++j) {
      const auto gj = scaled.grid.find_y(part.y[j]);
      if (!gj) throw PartitionError("partition y node not on the surface grid");
      q(i, j) = scaled.at(*gi, *gj);
    }
  }
  return increments_from_values(part, q);
}

IncrementTable increments_from_tilt(const TiltDensity& v, const Partition& part) {
  part.validate();
  Matrix q(part.t.size(), part.y.size());
  parallel_for(part.t.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < part.y.size(); ++j) q(i, j) = qbar_from_tilt(v, part.t[i], part.y[j]);
  });
  return increments_from_values(part, q);
}

FiniteDimObjective::FiniteDimObjective(const IncrementTable& d, const kernels::PsiEvaluator& ev,
                                       const ServiceLaw& svc, std::optional<double> K)
    : cols_(d.partition.y.size()), ev_(ev), table_(d) {
  d.partition.validate();
  if (d.deltas.rows() + 1 != d.partition.t.size() || d.deltas.cols() != cols_) {
    throw PartitionError("increment table does not match its partition");
  }
  if (K && !(*K > 0.0)) throw DomainError("truncation level K must be positive");
  const auto& ys = d.partition.y;
  const double keep_out = K ? svc.tail(*K) : 0.0;

  auto cdf = [&](double x) {
    if (K) x = std::min(x, *K);
    return x == kInf ? 1.0 : svc.cdf(x);
  };
  auto cell = [&](double u, std::size_t j) {
    const double lo = ys[j] - u;
    const double hi = j + 1 < ys.size() ? ys[j + 1] - u : kInf;
    return std::max(0.0, cdf(hi) - cdf(lo));
  };

  std::vector<double> kinks{0.0};
  for (double b : svc.breakpoints()) kinks.push_back(b);
  if (K) kinks.push_back(*K);

  rows_.resize(d.deltas.rows());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const double t0 = d.partition.t[i];
    const double t1 = d.partition.t[i + 1];
    std::vector<double> breaks;
    for (double y : ys) {
      for (double b : kinks) breaks.push_back(y - b);
    }
    const auto nodes = quad::gauss_legendre_nodes(t0, t1, breaks, 2);
    Row& row = rows_[i];
    row.weight = nodes.w;
    row.offset.assign(nodes.x.size(), keep_out);
    row.prob = Matrix(nodes.x.size(), cols_);
    row.mass.assign(cols_, 0.0);
    for (std::size_t k = 0; k < nodes.x.size(); ++k) {
      for (std::size_t j = 0; j < cols_; ++j) {
        row.prob(k, j) = cell(nodes.x[k], j);
        row.mass[j] += nodes.w[k] * row.prob(k, j);
      }
    }
  }
}

namespace {

std::vector<std::size_t> live_cells(const FiniteDimObjective& obj, std::size_t i) {
  std::vector<std::size_t> cells;
  for (std::size_t j = 0; j < obj.cols(); ++j) {
    if (obj.cell_mass(i, j) > 0.0) cells.push_back(j);
  }
  return cells;
}

}  // namespace

double FiniteDimObjective::value(const Matrix& theta) const {
  double total = 0.0;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto cells = live_cells(*this, i);
    std::vector<double> th, de;
    for (std::size_t j : cells) {
      th.push_back(theta(i, j));
      de.push_back(table_.deltas(i, j));
    }
    total += eval_row(rows_[i], ev_, cells, de, th, false).value;
  }
  return total;
}

Matrix FiniteDimObjective::gradient(const Matrix& theta) const {
  Matrix g(rows_.size(), cols_);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto cells = live_cells(*this, i);
    std::vector<double> th, de;
    for (std::size_t j : cells) {
      th.push_back(theta(i, j));
      de.push_back(table_.deltas(i, j));
    }
    const auto r = eval_row(rows_[i], ev_, cells, de, th, true);
    for (std::size_t a = 0; a < cells.size(); ++a) g(i, cells[a]) = r.grad[a];
  }
  return g;
}

RateResult finite_dim_rate(const IncrementTable& d, const kernels::PsiEvaluator& ev,
                           const ServiceLaw& svc, std::optional<double> K,
                           const FiniteDimOptions& opt) {
  const FiniteDimObjective obj(d, ev, svc, K);
  std::vector<RowOutcome> rows(obj.rows());
  parallel_for(obj.rows(), [&](std::size_t i) { rows[i] = solve_row(obj, i, opt); });

  RateResult out;
  for (const auto& r : rows) {
    if (r.infinite) {
      RateResult inf = RateResult::infinity();
      inf.iterations = r.iterations;
      return inf;
    }
    out.value += r.value;
    out.iterations += r.iterations;
    out.gradient_norm = std::max(out.gradient_norm, r.gradient_norm);
    out.converged = out.converged && r.converged;
  }
  return out;
}

RateResult truncated_rate(const TiltDensity& v, const kernels::PsiEvaluator& ev,
                          const ServiceLaw& svc, double K, double T,
                          const std::optional<Partition>& part) {
  if (!(K > 0.0)) throw DomainError("truncation level K must be positive");
  if (ev.law().is_poisson()) {
    const double rho = ev.law().poisson_rate();
    if (!svc.has_density()) throw DomainError("truncated_rate needs a service density");
    bool infinite = false;
    auto integrand = [&](double s, double r) {
      const double val = v(s, r);
      const double f = *svc.density(r);
      if (val < 0.0) throw DomainError("tilt density is negative");
      if (val == 0.0) return rho * f;
      if (!(f > 0.0)) {
        infinite = true;
        return 0.0;
      }
      return val * std::log(val / (rho * f)) - val + rho * f;
    };
    const double covered = std::min(T, v.horizon());
    const double r_hi = std::min(K, v.r_max());
    std::vector<double> extra = svc.breakpoints();
    extra.push_back(K);
    double total = integrate_tilt_region(v, integrand, 0.0, covered, 0.0, r_hi, extra);
    if (infinite) return RateResult::infinity();
    total += rho * covered * std::max(0.0, svc.cdf(K) - svc.cdf(r_hi));
    total += rho * std::max(0.0, T - covered) * svc.cdf(K);
    return RateResult::finite(total);
  }
  const Partition p = part ? *part : Partition::uniform(T, 16, T + K, 32);
  const auto table = increments_from_tilt(phi_truncate(v, K), p);
  return finite_dim_rate(table, ev, svc, K);
}

}  // namespace isqld::rate
