#pragma once

// Service-time and interarrival-time laws.
//
// JSON schema (shared by the CLI and problem files):
//   {"kind": "uniform",       "low": a, "high": b}     0 <= a < b
//   {"kind": "exponential",   "rate": r}               r > 0
//   {"kind": "gamma",         "shape": k, "rate": r}   k > 0, r > 0
//   {"kind": "deterministic", "value": d}              d > 0
// Interarrival laws additionally require a > 0 for "uniform" (non-lattice,
// strictly positive gaps). Truncated/thinned laws are derived objects and are
// serialized as {"kind": "truncated", "base": {...}, "K": K}.

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "isqld/rng.hpp"

namespace isqld {

class ServiceLaw {
 public:
  struct Uniform {
    double low;
    double high;
  };
  struct Exponential {
    double rate;
  };
  struct Gamma {
    double shape;
    double rate;
  };
  struct Deterministic {
    double value;
  };
  /// Base law conditioned on V <= K.
  struct Truncated {
    std::shared_ptr<const ServiceLaw> base;
    double K;
    double mass;  // F(K) of the base law
  };
  using Variant = std::variant<Uniform, Exponential, Gamma, Deterministic, Truncated>;

  static ServiceLaw uniform(double low, double high);
  static ServiceLaw exponential(double rate);
  static ServiceLaw gamma(double shape, double rate);
  static ServiceLaw deterministic(double value);

  double cdf(double x) const;
  double tail(double x) const;
  /// Lebesgue density; nullopt for laws without one (deterministic).
  std::optional<double> density(double x) const;
  bool has_density() const;
  double quantile(double p) const;
  /// M with F(M) = 1, when the support is bounded.
  std::optional<double> support_bound() const;
  /// Points where F or f fails to be smooth (support edges, atoms).
  std::vector<double> breakpoints() const;
  /// Integral of the tail over [0, u].
  double integrated_tail(double u) const;
  double mean() const;
  double sample(Rng& rng) const;

  std::string kind() const;
  const Variant& variant() const { return law_; }

  nlohmann::json to_json() const;
  static ServiceLaw from_json(const nlohmann::json& j);

 private:
  explicit ServiceLaw(Variant v) : law_(std::move(v)) {}
  friend ServiceLaw make_truncated_service(const ServiceLaw& base, double K);
  Variant law_;
};

/// Law conditioned on V <= K; requires F(K) > 0.
ServiceLaw make_truncated_service(const ServiceLaw& base, double K);

class RenewalLaw {
 public:
  struct Exponential {
    double rate;
  };
  struct Gamma {
    double shape;
    double rate;
  };
  struct Uniform {
    double low;
    double high;
  };
  struct Deterministic {
    double value;
  };
  /// Geometric sum of base gaps: each base arrival is kept with probability
  /// `keep` (the interarrival law of the system that ignores long services).
  struct Thinned {
    std::shared_ptr<const RenewalLaw> base;
    double keep;
  };
  using Variant = std::variant<Exponential, Gamma, Uniform, Deterministic, Thinned>;

  static RenewalLaw exponential(double rate);
  static RenewalLaw gamma(double shape, double rate);
  static RenewalLaw uniform(double low, double high);
  static RenewalLaw deterministic(double value);
  static RenewalLaw thinned(const RenewalLaw& base, double keep);

  /// log E exp(theta U); throws DomainError for theta >= theta_sup().
  double cumulant(double theta) const;
  double cumulant_derivative(double theta) const;
  /// Abscissa of convergence of the moment generating function.
  double theta_sup() const { return theta_sup_; }
  double mean() const;
  double sample(Rng& rng) const;
  /// Arrivals from a Poisson process (exponential gaps).
  bool is_poisson() const;
  /// Poisson intensity when is_poisson().
  double poisson_rate() const;

  std::string kind() const;
  const Variant& variant() const { return law_; }

  nlohmann::json to_json() const;
  static RenewalLaw from_json(const nlohmann::json& j);

 private:
  RenewalLaw(Variant v, double theta_sup) : law_(std::move(v)), theta_sup_(theta_sup) {}
  Variant law_;
  double theta_sup_;
};

}  // namespace isqld
