#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "isqld/errors.hpp"

namespace isqld {

struct RootResult {
  double x = 0.0;
  int iterations = 0;
  /// The target lies beyond what double precision can resolve next to a
  /// finite domain edge; `x` is that edge's closest representable interior
  /// point.
  bool saturated = false;
};

/// Open domain (lo, hi) of a strictly increasing function; either end may be
/// infinite. The search starts at `origin`, which must lie inside.
struct MonotoneDomain {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double origin = 0.0;
};

/// Solves f(x) = target for strictly increasing f with derivative df.
/// Brackets by geometric expansion from `origin` (towards a finite edge the
/// gap to the edge is halved instead), then runs Newton steps safeguarded by
/// bisection until the step falls below tol * max(1, |x|).
template <class F, class DF>
RootResult invert_increasing(F&& f, DF&& df, double target,
                             const MonotoneDomain& dom, double tol = 1e-12,
                             int max_iter = 200) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  RootResult res;
  double x = dom.origin;
  double fx = f(x) - target;
  if (fx == 0.0) {
    res.x = x;
    return res;
  }

  double lo = -inf, hi = inf;
  if (fx < 0.0) {
    lo = x;
    for (int k = 0;; ++k) {
      double cand = std::isfinite(dom.hi)
                        ? dom.hi - (dom.hi - dom.origin) * std::ldexp(1.0, -k - 1)
                        : dom.origin + std::ldexp(1.0, k);
      if (!std::isfinite(cand) || k > 1100) {
        throw BracketError("no bracket above origin for target " +
                           std::to_string(target));
      }
      if (cand <= lo || cand >= dom.hi) {
        // no representable point left between lo and the edge
        res.x = lo;
        res.saturated = true;
        res.iterations = k;
        return res;
      }
      const double fc = f(cand) - target;
      if (fc >= 0.0) {
        hi = cand;
        if (fc == 0.0) {
          res.x = cand;
          res.iterations = k;
          return res;
        }
        break;
      }
      lo = cand;
    }
  } else {
    hi = x;
    for (int k = 0;; ++k) {
      double cand = std::isfinite(dom.lo)
                        ? dom.lo + (dom.origin - dom.lo) * std::ldexp(1.0, -k - 1)
                        : dom.origin - std::ldexp(1.0, k);
      if (!std::isfinite(cand) || k > 1100) {
        throw BracketError("no bracket below origin for target " +
                           std::to_string(target));
      }
      if (cand >= hi || cand <= dom.lo) {
        res.x = hi;
        res.saturated = true;
        res.iterations = k;
        return res;
      }
      const double fc = f(cand) - target;
      if (fc <= 0.0) {
        lo = cand;
        if (fc == 0.0) {
          res.x = cand;
          res.iterations = k;
          return res;
        }
        break;
      }
      hi = cand;
    }
  }

  // Start from whichever bracket end has the smaller residual.
  const double flo = f(lo) - target;
  const double fhi = f(hi) - target;
  x = (std::abs(flo) < std::abs(fhi)) ? lo : hi;
  fx = (x == lo) ? flo : fhi;
  for (int it = 1; it <= max_iter; ++it) {
    res.iterations = it;
    const double d = df(x);
    double next = x - fx / d;
    if (!std::isfinite(next) || !(d > 0.0) || next <= lo || next >= hi) {
      next = 0.5 * (lo + hi);
    }
    const double step = std::abs(next - x);
    x = next;
    fx = f(x) - target;
    if (fx == 0.0) break;
    if (fx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double scale = std::max(1.0, std::abs(x));
    if (step <= tol * scale || (hi - lo) <= tol * scale) break;
  }
  res.x = x;
  return res;
}

}  // namespace isqld
