#pragma once

// Exact oracles and a Monte Carlo harness for checking the asymptotics at
// finite lambda.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "isqld/distributions.hpp"
#include "isqld/rate.hpp"
#include "isqld/surface.hpp"
#include "isqld/tilt.hpp"

namespace isqld::verify {

struct TailOracleResult {
  double log_prob;
  double m;
  std::uint64_t n;
};

/// log P(Poisson(m) >= n), summed in log space.
double poisson_tail_log(double m, std::uint64_t n);
TailOracleResult poisson_tail(double m, std::uint64_t n);

/// The event {Q_lambda(u, 0) >= level * lambda}: at least level * lambda
/// customers in system at time u. Arrivals are Poisson with rate 1 in base
/// time, so Q_lambda(u, 0) ~ Poisson(lambda int_0^u Fbar).
struct QueueLengthEvent {
  ServiceLaw svc;
  double u;
  double level;

  std::uint64_t threshold(double lambda) const;
};

struct DecayEstimate {
  std::vector<double> lambdas;
  std::vector<double> log_probs;
  std::vector<double> neg_log_prob_over_lambda;
  std::vector<std::uint64_t> hits;      // Monte Carlo only
  std::uint64_t replications = 0;       // Monte Carlo only
  double extrapolated_rate = 0.0;       // a in a + b log(lambda) / lambda
  double slope = 0.0;                   // b
  double max_residual = 0.0;
  std::string method;                   // "exact-oracle" | "monte-carlo"

  nlohmann::json to_json() const;
  /// Columns lambda,log_prob,ratio.
  std::string to_csv() const;
};

/// Least-squares fit of y = a + b log(x) / x; returns {a, b, max |residual|}.
std::array<double, 3> fit_log_correction(const std::vector<double>& lambdas,
                                         const std::vector<double>& ys);

DecayEstimate decay_curve_exact(const QueueLengthEvent& ev, const std::vector<double>& lambdas);

/// Plain replication; InsufficientHitsError when any lambda sees fewer than
/// `min_hits` hits.
DecayEstimate decay_curve_mc(const QueueLengthEvent& ev, const std::vector<double>& lambdas,
                             std::uint64_t reps, std::uint64_t seed,
                             std::uint64_t min_hits = 100);

struct MarginalReport {
  double lambda;
  double u;
  std::uint64_t reps;
  double sample_mean;
  double sample_variance;
  double expected_mean;      // lambda * rate * int_0^u Fbar (Poisson arrivals)
  double standard_error;     // sqrt(expected_mean / reps)
  double z_score;
  double variance_to_mean;
  bool mean_ok;              // |z| <= 4
  bool dispersion_ok;        // variance / mean in [0.9, 1.1]

  nlohmann::json to_json() const;
};

/// Simulates `reps` copies of Q_lambda(u, 0) and compares with the Poisson
/// law of the number in system.
MarginalReport marginal_distribution_check(const RenewalLaw& arr, const ServiceLaw& svc,
                                           double lambda, double u, std::uint64_t reps,
                                           std::uint64_t seed);

struct CouplingReport {
  std::uint64_t reps;
  std::uint64_t violations;
  double max_gap;            // largest sup-norm distance seen
  std::uint64_t max_dropped;

  nlohmann::json to_json() const;
};

/// Per replication: sup |qbar - qbar_K| <= number of customers with V > K.
CouplingReport truncation_coupling_check(const RenewalLaw& arr, const ServiceLaw& svc,
                                         double lambda, double T, double K,
                                         std::uint64_t reps, std::uint64_t seed,
                                         const SurfaceGrid& grid);

struct CrossCheckEntry {
  std::size_t t_cells;
  std::size_t y_cells;
  rate::RateResult result;
};

struct CrossCheckReport {
  double entropy_value;
  std::vector<CrossCheckEntry> entries;
  bool bounded;       // every partition value <= entropy value + tol
  bool monotone;      // nondecreasing under refinement
  double final_relative_gap;
  bool passed;        // all of the above and final gap <= 2%

  nlohmann::json to_json() const;
};

/// Finite-dimensional rate on the given partitions against the entropy form
/// (Poisson arrivals with intensity rho).
CrossCheckReport rate_cross_check(const TiltDensity& tilt, const ServiceLaw& svc, double T,
                                  const std::vector<rate::Partition>& partitions,
                                  double rho = 1.0, double tol = 1e-8);

}  // namespace isqld::verify
