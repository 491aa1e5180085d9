#include "isqld/kernels.hpp"

#include <cmath>
#include <limits>

#include "isqld/errors.hpp"
#include "isqld/roots.hpp"

namespace isqld::kernels {

double cumulant(const RenewalLaw& law, double theta) { return law.cumulant(theta); }

PsiEvaluator::PsiEvaluator(RenewalLaw law, double tolerance)
    : law_(std::move(law)), tolerance_(tolerance) {}

PsiEvaluator::ValueAndSlope PsiEvaluator::evaluate(double theta) const {
  if (theta == 0.0) return {0.0, 1.0 / law_.cumulant_derivative(0.0)};
  if (std::isinf(theta)) {
    if (theta < 0.0) return {lower_limit(), 0.0};
    return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  const MonotoneDomain dom{-std::numeric_limits<double>::infinity(), law_.theta_sup(), 0.0};
  const auto root = invert_increasing([this](double s) { return law_.cumulant(s); },
                                      [this](double s) { return law_.cumulant_derivative(s); },
                                      -theta, dom, tolerance_);
  const double slope = 1.0 / law_.cumulant_derivative(root.x);
  return {-root.x, slope};
}

double PsiEvaluator::operator()(double theta) const { return evaluate(theta).value; }

double PsiEvaluator::derivative(double theta) const { return evaluate(theta).slope; }

double psi_n(const PsiEvaluator& ev, double theta) { return ev(theta); }

double psi_n_truncated(const PsiEvaluator& ev, const ServiceLaw& svc, double K,
                       double theta) {
  if (!(K > 0.0)) throw DomainError("truncation level K must be positive");
  const double keep = svc.cdf(K);
  if (!(keep > 0.0)) throw DomainError("truncation level K has F(K) = 0");
  const double drop = svc.tail(K);
  // log(F(K) e^theta + Fbar(K)) via log-sum-exp
  const double a = std::log(keep) + theta;
  double arg = a;
  if (drop > 0.0) {
    const double b = std::log(drop);
    const double hi = std::max(a, b);
    arg = hi + std::log1p(std::exp(std::min(a, b) - hi));
  }
  return ev(arg);
}

double truncated_cumulant(const RenewalLaw& law, const ServiceLaw& svc, double K,
                          double theta) {
  if (!(K > 0.0)) throw DomainError("truncation level K must be positive");
  const double keep = svc.cdf(K);
  if (!(keep > 0.0)) throw DomainError("truncation level K has F(K) = 0");
  const double k = law.cumulant(theta);
  const double q = svc.tail(K) * std::exp(k);
  if (!(q < 1.0)) {
    throw DomainError("truncated cumulant: Fbar(K) e^kappa >= 1, geometric sum diverges");
  }
  return k + std::log(keep) - std::log1p(-q);
}

RenewalLaw truncated_renewal(const RenewalLaw& law, const ServiceLaw& svc, double K) {
  if (!(K > 0.0)) throw DomainError("truncation level K must be positive");
  const double keep = svc.cdf(K);
  if (!(keep > 0.0)) throw DomainError("truncation level K has F(K) = 0");
  return RenewalLaw::thinned(law, keep);
}

ServiceLaw service_truncate(const ServiceLaw& svc, double K) {
  return make_truncated_service(svc, K);
}

double integrated_tail(const ServiceLaw& svc, double u) { return svc.integrated_tail(u); }

}  // namespace isqld::kernels
