#pragma once

#include "isqld/distributions.hpp"

namespace isqld::kernels {

/// log E exp(theta U) for the interarrival law.
double cumulant(const RenewalLaw& law, double theta);

/// Infinitesimal log-moment generating function of the arrival counting
/// process, psi(theta) = -kappa^{-1}(-theta), obtained by inverting the
/// cumulant with a bracketed, bisection-safeguarded Newton iteration.
///
/// psi is finite on all of R for every supported family. When -theta lies
/// so far out that the root sits within one ulp of a finite abscissa of
/// convergence, the limiting value -theta_sup is returned.
class PsiEvaluator {
 public:
  explicit PsiEvaluator(RenewalLaw law, double tolerance = 1e-12);

  double operator()(double theta) const;
  /// psi'(theta) = 1 / kappa'(-psi(theta)).
  double derivative(double theta) const;

  struct ValueAndSlope {
    double value;
    double slope;
  };
  ValueAndSlope evaluate(double theta) const;

  /// lim psi(theta) as theta -> -infinity (= -theta_sup, possibly -inf).
  double lower_limit() const { return -law_.theta_sup(); }

  const RenewalLaw& law() const { return law_; }
  double tolerance() const { return tolerance_; }

 private:
  RenewalLaw law_;
  double tolerance_;
};

double psi_n(const PsiEvaluator& ev, double theta);

/// psi of the arrival stream that ignores customers with service above K:
/// psi(log(F(K) e^theta + Fbar(K))).
double psi_n_truncated(const PsiEvaluator& ev, const ServiceLaw& svc, double K,
                       double theta);

/// Cumulant of the thinned interarrival gap (geometric number of base gaps):
/// kappa(theta) + log(F(K) / (1 - Fbar(K) e^{kappa(theta)})).
double truncated_cumulant(const RenewalLaw& law, const ServiceLaw& svc, double K,
                          double theta);

/// Interarrival law of the system restricted to services <= K.
RenewalLaw truncated_renewal(const RenewalLaw& law, const ServiceLaw& svc, double K);

/// Service law conditioned on V <= K: cdf F(x)/F(K) on [0, K].
ServiceLaw service_truncate(const ServiceLaw& svc, double K);

/// Integral of the service tail over [0, u].
double integrated_tail(const ServiceLaw& svc, double u);

}  // namespace isqld::kernels
