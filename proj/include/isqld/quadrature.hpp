#pragma once

// Small numerical integration toolkit shared by the kernels, the rate
// evaluators and the path solvers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace isqld::quad {

/// Sorted, de-duplicated breakpoints of [a, b]: a, interior points, b.
inline std::vector<double> panel_edges(double a, double b,
                                       std::span<const double> interior) {
  std::vector<double> edges;
  edges.reserve(interior.size() + 2);
  edges.push_back(a);
  for (double x : interior) {
    if (x > a && x < b) edges.push_back(x);
  }
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  auto last = std::unique(edges.begin(), edges.end(), [&](double x, double y) {
    return std::abs(x - y) <= 1e-14 * scale;
  });
  edges.erase(last, edges.end());
  if (edges.size() == 1) edges.push_back(b);
  edges.front() = a;
  edges.back() = b;
  return edges;
}

/// Composite 16-point Gauss-Legendre rule: every panel between consecutive
/// breakpoints is split into `subdivisions` equal pieces.
template <class F>
double gauss_legendre(F&& f, double a, double b,
                      std::span<const double> breaks = {},
                      int subdivisions = 2) {
  if (!(b > a)) return 0.0;
  using Rule = boost::math::quadrature::gauss<double, 16>;
  const auto edges = panel_edges(a, b, breaks);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double h = (edges[k + 1] - edges[k]) / subdivisions;
    for (int s = 0; s < subdivisions; ++s) {
      const double lo = edges[k] + s * h;
      const double hi = (s + 1 == subdivisions) ? edges[k + 1] : lo + h;
      total += Rule::integrate(f, lo, hi);
    }
  }
  return total;
}

/// Nodes and weights of the composite rule above, for integrands that are
/// evaluated many times (e.g. inside an optimizer).
struct Nodes {
  std::vector<double> x;
  std::vector<double> w;
};

inline Nodes gauss_legendre_nodes(double a, double b,
                                  std::span<const double> breaks = {},
                                  int subdivisions = 1) {
  Nodes out;
  if (!(b > a)) return out;
  using Rule = boost::math::quadrature::gauss<double, 16>;
  const auto& absc = Rule::abscissa();
  const auto& wts = Rule::weights();
  const auto edges = panel_edges(a, b, breaks);
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double h = (edges[k + 1] - edges[k]) / subdivisions;
    for (int s = 0; s < subdivisions; ++s) {
      const double lo = edges[k] + s * h;
      const double hi = (s + 1 == subdivisions) ? edges[k + 1] : lo + h;
      const double mid = 0.5 * (lo + hi);
      const double half = 0.5 * (hi - lo);
      // boost stores the non-negative half of the symmetric rule
      for (std::size_t i = 0; i < absc.size(); ++i) {
        if (absc[i] == 0.0) {
          out.x.push_back(mid);
          out.w.push_back(half * wts[i]);
          continue;
        }
        out.x.push_back(mid - half * absc[i]);
        out.w.push_back(half * wts[i]);
        out.x.push_back(mid + half * absc[i]);
        out.w.push_back(half * wts[i]);
      }
    }
  }
  return out;
}

/// Adaptive Gauss-Kronrod (G15/K31) on each panel between breakpoints.
template <class F>
double adaptive(F&& f, double a, double b, std::span<const double> breaks = {},
                double tol = 1e-13, unsigned max_depth = 18) {
  if (!(b > a)) return 0.0;
  using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  const auto edges = panel_edges(a, b, breaks);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    total += Rule::integrate(f, edges[k], edges[k + 1], max_depth, tol);
  }
  return total;
}

namespace detail {
template <class F>
double simpson_step(F& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson with Richardson correction and absolute tolerance `tol`.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-10,
                        int max_depth = 40) {
  if (!(b > a)) return 0.0;
  // Start from a handful of panels so that narrow features are not missed.
  constexpr int kPanels = 8;
  const double h = (b - a) / kPanels;
  double total = 0.0;
  for (int k = 0; k < kPanels; ++k) {
    const double lo = a + k * h;
    const double hi = (k + 1 == kPanels) ? b : lo + h;
    const double flo = f(lo);
    const double fhi = f(hi);
    const double fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    total += detail::simpson_step(f, lo, hi, flo, fm, fhi, whole,
                                  tol / kPanels, max_depth);
  }
  return total;
}

}  // namespace isqld::quad
