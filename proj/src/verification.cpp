#include "isqld/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "isqld/errors.hpp"
#include "isqld/parallel.hpp"
#include "isqld/rng.hpp"
#include "isqld/simulator.hpp"
#include "isqld/surface_io.hpp"

namespace isqld::verify {

namespace {

double log_term(double m, double log_m, std::uint64_t k) {
  const double kk = static_cast<double>(k);
  return kk * log_m - m - std::lgamma(kk + 1.0);
}

// log(e^a + e^b)
double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

double poisson_tail_log(double m, std::uint64_t n) {
  if (!(m > 0.0)) throw DomainError("Poisson mean must be positive");
  if (n == 0) return 0.0;
  const double log_m = std::log(m);
  constexpr double kCut = 40.0;
  if (static_cast<double>(n) > m) {
    // Terms decrease beyond the mode: sum upwards until negligible.
    double acc = -std::numeric_limits<double>::infinity();
    double peak = -std::numeric_limits<double>::infinity();
    for (std::uint64_t k = n;; ++k) {
      const double t = log_term(m, log_m, k);
      acc = log_add(acc, t);
      peak = std::max(peak, t);
      if (t < peak - kCut) break;
    }
    return acc;
  }
  // Upper tail is not small: complement of the lower sum P(X <= n - 1),
  // whose terms grow towards k = n - 1 <= m.
  double acc = -std::numeric_limits<double>::infinity();
  const double peak = log_term(m, log_m, n - 1);
  for (std::uint64_t k = n; k-- > 0;) {
    const double t = log_term(m, log_m, k);
    acc = log_add(acc, t);
    if (t < peak - kCut) break;
  }
  return std::log1p(-std::exp(acc));
}

TailOracleResult poisson_tail(double m, std::uint64_t n) {
  return TailOracleResult{poisson_tail_log(m, n), m, n};
}

std::uint64_t QueueLengthEvent::threshold(double lambda) const {
  const double n = std::ceil(level * lambda - 1e-9 * std::max(1.0, level * lambda));
  return n <= 0.0 ? 0 : static_cast<std::uint64_t>(n);
}

std::array<double, 3> fit_log_correction(const std::vector<double>& lambdas,
                                         const std::vector<double>& ys) {
  const std::size_t n = lambdas.size();
  if (n == 0 || ys.size() != n) throw DomainError("fit needs matching, non-empty samples");
  if (n == 1) return {ys[0], 0.0, 0.0};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs(n);
  for (std::size_t k = 0; k < n; ++k) {
    xs[k] = std::log(lambdas[k]) / lambdas[k];
    sx += xs[k];
    sy += ys[k];
    sxx += xs[k] * xs[k];
    sxy += xs[k] * ys[k];
  }
  const double nn = static_cast<double>(n);
  const double den = nn * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw DomainError("fit needs at least two distinct lambdas");
  const double b = (nn * sxy - sx * sy) / den;
  const double a = (sy - b * sx) / nn;
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(ys[k] - a - b * xs[k]));
  return {a, b, worst};
}

namespace {

void finish(DecayEstimate& est) {
  for (std::size_t k = 0; k < est.lambdas.size(); ++k) {
    est.neg_log_prob_over_lambda.push_back(-est.log_probs[k] / est.lambdas[k]);
  }
  const auto fit = fit_log_correction(est.lambdas, est.neg_log_prob_over_lambda);
  est.extrapolated_rate = fit[0];
  est.slope = fit[1];
  est.max_residual = fit[2];
}

void check_lambdas(const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw DomainError("decay curve needs at least one lambda");
  for (double l : lambdas) {
    if (!(l > 0.0)) throw DomainError("lambdas must be positive");
  }
}

}  // namespace

DecayEstimate decay_curve_exact(const QueueLengthEvent& ev, const std::vector<double>& lambdas) {
  check_lambdas(lambdas);
  const double fluid = ev.svc.integrated_tail(ev.u);
  DecayEstimate est;
  est.method = "exact-oracle";
  est.lambdas = lambdas;
  for (double l : lambdas) {
    const auto n = ev.threshold(l);
    est.log_probs.push_back(fluid > 0.0 ? poisson_tail_log(l * fluid, n)
                                        : (n == 0 ? 0.0 : -std::numeric_limits<double>::infinity()));
  }
  finish(est);
  return est;
}

DecayEstimate decay_curve_mc(const QueueLengthEvent& ev, const std::vector<double>& lambdas,
                             std::uint64_t reps, std::uint64_t seed, std::uint64_t min_hits) {
  check_lambdas(lambdas);
  if (reps == 0) throw DomainError("Monte Carlo needs at least one replication");
  const RenewalLaw arrivals = RenewalLaw::exponential(1.0);
  DecayEstimate est;
  est.method = "monte-carlo";
  est.lambdas = lambdas;
  est.replications = reps;
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    const double l = lambdas[li];
    const auto n = ev.threshold(l);
    const std::uint64_t lambda_seed = stream_seed(seed, li, Stream::kAux);
    std::vector<unsigned char> hit(reps, 0);
    parallel_for(reps, [&](std::size_t r) {
      const auto log = sim::simulate(arrivals, ev.svc, l, ev.u, lambda_seed, r);
      hit[r] = sim::number_in_system(log, ev.u) >= n ? 1 : 0;
    });
    std::uint64_t hits = 0;
    for (auto h : hit) hits += h;
    if (hits < min_hits) {
      throw InsufficientHitsError("only " + std::to_string(hits) + " of " + std::to_string(reps) +
                                  " replications hit the event at lambda = " + std::to_string(l));
    }
    est.hits.push_back(hits);
    est.log_probs.push_back(std::log(static_cast<double>(hits) / static_cast<double>(reps)));
  }
  finish(est);
  return est;
}

nlohmann::json DecayEstimate::to_json() const {
  nlohmann::json j{{"method", method},
                   {"lambdas", lambdas},
                   {"log_probs", log_probs},
                   {"neg_log_prob_over_lambda", neg_log_prob_over_lambda},
                   {"extrapolated_rate", extrapolated_rate},
                   {"slope", slope},
                   {"max_residual", max_residual}};
  if (method == "monte-carlo") {
    j["hits"] = hits;
    j["replications"] = replications;
  }
  return j;
}

std::string DecayEstimate::to_csv() const {
  std::ostringstream os;
  os << "lambda,log_prob,ratio\n";
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    os << io::format_double(lambdas[k]) << ',' << io::format_double(log_probs[k]) << ','
       << io::format_double(neg_log_prob_over_lambda[k]) << '\n';
  }
  return os.str();
}

MarginalReport marginal_distribution_check(const RenewalLaw& arr, const ServiceLaw& svc,
                                           double lambda, double u, std::uint64_t reps,
                                           std::uint64_t seed) {
  if (reps < 2) throw DomainError("marginal check needs at least two replications");
  if (!(u >= 0.0)) throw DomainError("u must be non-negative");
  std::vector<double> counts(reps);
  parallel_for(reps, [&](std::size_t r) {
    const auto log = sim::simulate(arr, svc, lambda, u, seed, r);
    counts[r] = static_cast<double>(sim::number_in_system(log, u));
  });
  double mean = 0.0;
  for (double c : counts) mean += c;
  mean /= static_cast<double>(reps);
  double var = 0.0;
  for (double c : counts) var += (c - mean) * (c - mean);
  var /= static_cast<double>(reps - 1);

  MarginalReport rep{};
  rep.lambda = lambda;
  rep.u = u;
  rep.reps = reps;
  rep.sample_mean = mean;
  rep.sample_variance = var;
  const double intensity = arr.is_poisson() ? arr.poisson_rate() : 1.0 / arr.mean();
  rep.expected_mean = lambda * intensity * svc.integrated_tail(u);
  rep.standard_error = std::sqrt(rep.expected_mean / static_cast<double>(reps));
  if (rep.expected_mean > 0.0) {
    rep.z_score = (mean - rep.expected_mean) / rep.standard_error;
    rep.variance_to_mean = mean > 0.0 ? var / mean : std::numeric_limits<double>::quiet_NaN();
    rep.mean_ok = std::abs(rep.z_score) <= 4.0;
    rep.dispersion_ok = rep.variance_to_mean >= 0.9 && rep.variance_to_mean <= 1.1;
  } else {
    rep.z_score = 0.0;
    rep.variance_to_mean = std::numeric_limits<double>::quiet_NaN();
    rep.mean_ok = mean == 0.0;
    rep.dispersion_ok = var == 0.0;
  }
  return rep;
}

nlohmann::json MarginalReport::to_json() const {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  return nlohmann::json{{"lambda", lambda},
                        {"u", u},
                        {"reps", reps},
                        {"sample_mean", sample_mean},
                        {"sample_variance", sample_variance},
                        {"expected_mean", expected_mean},
                        {"standard_error", standard_error},
                        {"z_score", num(z_score)},
                        {"variance_to_mean", num(variance_to_mean)},
                        {"mean_ok", mean_ok},
                        {"dispersion_ok", dispersion_ok}};
}

CouplingReport truncation_coupling_check(const RenewalLaw& arr, const ServiceLaw& svc,
                                         double lambda, double T, double K,
                                         std::uint64_t reps, std::uint64_t seed,
                                         const SurfaceGrid& grid) {
  std::vector<double> gaps(reps);
  std::vector<std::uint64_t> dropped(reps);
  parallel_for(reps, [&](std::size_t r) {
    const auto log = sim::simulate(arr, svc, lambda, T, seed, r);
    const auto kept = sim::truncate_events(log, K);
    gaps[r] = OccupancySurface::sup_distance(sim::build_surface(log, grid),
                                             sim::build_surface(kept, grid));
    dropped[r] = log.size() - kept.size();
  });
  CouplingReport rep{reps, 0, 0.0, 0};
  for (std::size_t r = 0; r < reps; ++r) {
    if (gaps[r] > static_cast<double>(dropped[r])) ++rep.violations;
    rep.max_gap = std::max(rep.max_gap, gaps[r]);
    rep.max_dropped = std::max(rep.max_dropped, dropped[r]);
  }
  return rep;
}

nlohmann::json CouplingReport::to_json() const {
  return nlohmann::json{{"reps", reps},
                        {"violations", violations},
                        {"max_gap", max_gap},
                        {"max_dropped", max_dropped}};
}

CrossCheckReport rate_cross_check(const TiltDensity& tilt, const ServiceLaw& svc, double T,
                                  const std::vector<rate::Partition>& partitions, double rho,
                                  double tol) {
  if (partitions.empty()) throw DomainError("cross check needs at least one partition");
  const kernels::PsiEvaluator ev(RenewalLaw::exponential(rho));
  CrossCheckReport rep{};
  rep.entropy_value = rate::poisson_rate(tilt, svc, T, rho).value;
  rep.bounded = true;
  rep.monotone = true;
  double previous = -std::numeric_limits<double>::infinity();
  for (const auto& part : partitions) {
    const auto table = rate::increments_from_tilt(tilt, part);
    const auto res = rate::finite_dim_rate(table, ev, svc);
    rep.entries.push_back({part.t.size() - 1, part.y.size(), res});
    const double scale = std::max(1.0, std::abs(rep.entropy_value));
    if (res.infinite || res.value > rep.entropy_value + tol * scale) rep.bounded = false;
    if (res.value < previous - tol * scale) rep.monotone = false;
    previous = res.value;
  }
  const double last = rep.entries.back().result.value;
  rep.final_relative_gap = rep.entropy_value != 0.0
                               ? std::abs(rep.entropy_value - last) / std::abs(rep.entropy_value)
                               : std::abs(last);
  rep.passed = rep.bounded && rep.monotone && rep.final_relative_gap <= 0.02;
  return rep;
}

nlohmann::json CrossCheckReport::to_json() const {
  auto rows = nlohmann::json::array();
  for (const auto& e : entries) {
    auto r = e.result.to_json();
    r["t_cells"] = e.t_cells;
    r["y_cells"] = e.y_cells;
    rows.push_back(std::move(r));
  }
  return nlohmann::json{{"entropy_value", entropy_value},
                        {"partitions", rows},
                        {"bounded", bounded},
                        {"monotone", monotone},
                        {"final_relative_gap", final_relative_gap},
                        {"passed", passed}};
}

}  // namespace isqld::verify
