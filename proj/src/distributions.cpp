#include "isqld/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>

#include "isqld/errors.hpp"
#include "isqld/quadrature.hpp"
#include "isqld/roots.hpp"

namespace isqld {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

// log(expm1(x) / x), finite for all real x.
double log_expm1_over_x(double x) {
  if (std::abs(x) < 1e-5) return x / 2.0 + x * x / 24.0;
  if (x > 0.0) return x + std::log(-std::expm1(-x)) - std::log(x);
  return std::log(-std::expm1(x)) - std::log(-x);
}

// d/dx log(expm1(x) / x).
double d_log_expm1_over_x(double x) {
  if (std::abs(x) < 1e-3) return 0.5 + x / 12.0 - x * x * x / 720.0;
  if (x > 0.0) return 1.0 / (-std::expm1(-x)) - 1.0 / x;
  return std::exp(x) / std::expm1(x) - 1.0 / x;
}

double get_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError(std::string("distribution spec: missing numeric field '") + key + "'");
  }
  return j.at(key).get<double>();
}

std::string get_kind(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ConfigError("distribution spec must be an object with a string 'kind'");
  }
  return j.at("kind").get<std::string>();
}

}  // namespace

// ---------------------------------------------------------------- ServiceLaw

ServiceLaw ServiceLaw::uniform(double low, double high) {
  require(low >= 0.0 && high > low, "uniform service law needs 0 <= low < high");
  return ServiceLaw(Uniform{low, high});
}

ServiceLaw ServiceLaw::exponential(double rate) {
  require(rate > 0.0, "exponential service law needs rate > 0");
  return ServiceLaw(Exponential{rate});
}

ServiceLaw ServiceLaw::gamma(double shape, double rate) {
  require(shape > 0.0 && rate > 0.0, "gamma service law needs shape, rate > 0");
  return ServiceLaw(Gamma{shape, rate});
}

ServiceLaw ServiceLaw::deterministic(double value) {
  require(value > 0.0, "deterministic service law needs value > 0");
  return ServiceLaw(Deterministic{value});
}

ServiceLaw make_truncated_service(const ServiceLaw& base, double K) {
  require(K > 0.0, "truncation level K must be positive");
  const double mass = base.cdf(K);
  require(mass > 0.0, "truncation level K has F(K) = 0");
  if (mass >= 1.0) return base;
  return ServiceLaw(ServiceLaw::Truncated{std::make_shared<const ServiceLaw>(base), K, mass});
}

double ServiceLaw::cdf(double x) const {
  if (x < 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [&](const Uniform& u) {
            if (x <= u.low) return 0.0;
            if (x >= u.high) return 1.0;
            return (x - u.low) / (u.high - u.low);
          },
          [&](const Exponential& e) { return -std::expm1(-e.rate * x); },
          [&](const Gamma& g) { return boost::math::gamma_p(g.shape, g.rate * x); },
          [&](const Deterministic& d) { return x >= d.value ? 1.0 : 0.0; },
          [&](const Truncated& t) {
            if (x >= t.K) return 1.0;
            return t.base->cdf(x) / t.mass;
          },
      },
      law_);
}

double ServiceLaw::tail(double x) const {
  if (x < 0.0) return 1.0;
  return std::visit(
      Overloaded{
          [&](const Uniform& u) {
            if (x <= u.low) return 1.0;
            if (x >= u.high) return 0.0;
            return (u.high - x) / (u.high - u.low);
          },
          [&](const Exponential& e) { return std::exp(-e.rate * x); },
          [&](const Gamma& g) { return boost::math::gamma_q(g.shape, g.rate * x); },
          [&](const Deterministic& d) { return x >= d.value ? 0.0 : 1.0; },
          [&](const Truncated& t) {
            if (x >= t.K) return 0.0;
            // (F(K) - F(x)) / F(K), written with tails to keep precision
            return (t.base->tail(x) - t.base->tail(t.K)) / t.mass;
          },
      },
      law_);
}

std::optional<double> ServiceLaw::density(double x) const {
  return std::visit(
      Overloaded{
          [&](const Uniform& u) -> std::optional<double> {
            if (x < u.low || x > u.high) return 0.0;
            return 1.0 / (u.high - u.low);
          },
          [&](const Exponential& e) -> std::optional<double> {
            if (x < 0.0) return 0.0;
            return e.rate * std::exp(-e.rate * x);
          },
          [&](const Gamma& g) -> std::optional<double> {
            if (x < 0.0) return 0.0;
            if (x == 0.0) {
              if (g.shape < 1.0) return kInf;
              return g.shape == 1.0 ? g.rate : 0.0;
            }
            return g.rate * boost::math::gamma_p_derivative(g.shape, g.rate * x);
          },
          [&](const Deterministic&) -> std::optional<double> { return std::nullopt; },
          [&](const Truncated& t) -> std::optional<double> {
            if (x > t.K) return 0.0;
            auto base = t.base->density(x);
            if (!base) return std::nullopt;
            return *base / t.mass;
          },
      },
      law_);
}

bool ServiceLaw::has_density() const { return density(0.5 * mean()).has_value(); }

double ServiceLaw::quantile(double p) const {
  require(p >= 0.0 && p <= 1.0, "quantile level must lie in [0, 1]");
  return std::visit(
      Overloaded{
          [&](const Uniform& u) { return u.low + p * (u.high - u.low); },
          [&](const Exponential& e) {
            return p >= 1.0 ? kInf : -std::log1p(-p) / e.rate;
          },
          [&](const Gamma& g) {
            if (p >= 1.0) return kInf;
            if (p <= 0.0) return 0.0;
            return boost::math::gamma_p_inv(g.shape, p) / g.rate;
          },
          [&](const Deterministic& d) { return d.value; },
          [&](const Truncated& t) { return std::min(t.K, t.base->quantile(p * t.mass)); },
      },
      law_);
}

std::optional<double> ServiceLaw::support_bound() const {
  return std::visit(
      Overloaded{
          [](const Uniform& u) -> std::optional<double> { return u.high; },
          [](const Exponential&) -> std::optional<double> { return std::nullopt; },
          [](const Gamma&) -> std::optional<double> { return std::nullopt; },
          [](const Deterministic& d) -> std::optional<double> { return d.value; },
          [](const Truncated& t) -> std::optional<double> {
            auto inner = t.base->support_bound();
            return inner ? std::min(*inner, t.K) : t.K;
          },
      },
      law_);
}

std::vector<double> ServiceLaw::breakpoints() const {
  return std::visit(
      Overloaded{
          [](const Uniform& u) { return std::vector<double>{u.low, u.high}; },
          [](const Exponential&) { return std::vector<double>{0.0}; },
          [](const Gamma&) { return std::vector<double>{0.0}; },
          [](const Deterministic& d) { return std::vector<double>{0.0, d.value}; },
          [](const Truncated& t) {
            auto pts = t.base->breakpoints();
            std::erase_if(pts, [&](double x) { return x > t.K; });
            pts.push_back(t.K);
            return pts;
          },
      },
      law_);
}

double ServiceLaw::integrated_tail(double u) const {
  if (u <= 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [&](const Uniform& law) {
            const double w = law.high - law.low;
            if (u <= law.low) return u;
            if (u >= law.high) return law.low + 0.5 * w;
            const double rest = law.high - u;
            return law.low + 0.5 * (w * w - rest * rest) / w;
          },
          [&](const Exponential& e) { return -std::expm1(-e.rate * u) / e.rate; },
          [&](const Gamma&) {
            return quad::adaptive_simpson([this](double t) { return tail(t); }, 0.0, u,
                                          1e-10);
          },
          [&](const Deterministic& d) { return std::min(u, d.value); },
          [&](const Truncated& t) {
            const double m = std::min(u, t.K);
            return m - (m - t.base->integrated_tail(m)) / t.mass;
          },
      },
      law_);
}

double ServiceLaw::mean() const {
  return std::visit(
      Overloaded{
          [](const Uniform& u) { return 0.5 * (u.low + u.high); },
          [](const Exponential& e) { return 1.0 / e.rate; },
          [](const Gamma& g) { return g.shape / g.rate; },
          [](const Deterministic& d) { return d.value; },
          [this](const Truncated& t) { return integrated_tail(t.K); },
      },
      law_);
}

double ServiceLaw::sample(Rng& rng) const {
  if (const auto* d = std::get_if<Deterministic>(&law_)) return d->value;
  return quantile(rng.uniform());
}

std::string ServiceLaw::kind() const {
  return std::visit(Overloaded{
                        [](const Uniform&) { return std::string("uniform"); },
                        [](const Exponential&) { return std::string("exponential"); },
                        [](const Gamma&) { return std::string("gamma"); },
                        [](const Deterministic&) { return std::string("deterministic"); },
                        [](const Truncated&) { return std::string("truncated"); },
                    },
                    law_);
}

nlohmann::json ServiceLaw::to_json() const {
  return std::visit(
      Overloaded{
          [](const Uniform& u) {
            return nlohmann::json{{"kind", "uniform"}, {"low", u.low}, {"high", u.high}};
          },
          [](const Exponential& e) {
            return nlohmann::json{{"kind", "exponential"}, {"rate", e.rate}};
          },
          [](const Gamma& g) {
            return nlohmann::json{{"kind", "gamma"}, {"shape", g.shape}, {"rate", g.rate}};
          },
          [](const Deterministic& d) {
            return nlohmann::json{{"kind", "deterministic"}, {"value", d.value}};
          },
          [](const Truncated& t) {
            return nlohmann::json{{"kind", "truncated"}, {"base", t.base->to_json()}, {"K", t.K}};
          },
      },
      law_);
}

ServiceLaw ServiceLaw::from_json(const nlohmann::json& j) {
  const std::string kind = get_kind(j);
  try {
    if (kind == "uniform") return uniform(get_number(j, "low"), get_number(j, "high"));
    if (kind == "exponential") return exponential(get_number(j, "rate"));
    if (kind == "gamma") return gamma(get_number(j, "shape"), get_number(j, "rate"));
    if (kind == "deterministic") return deterministic(get_number(j, "value"));
    if (kind == "truncated") {
      if (!j.contains("base")) throw ConfigError("truncated service law needs 'base'");
      return make_truncated_service(from_json(j.at("base")), get_number(j, "K"));
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("service law: ") + e.what());
  }
  throw ConfigError("unknown service law kind '" + kind + "'");
}

// ---------------------------------------------------------------- RenewalLaw

RenewalLaw RenewalLaw::exponential(double rate) {
  require(rate > 0.0, "exponential interarrival law needs rate > 0");
  return RenewalLaw(Exponential{rate}, rate);
}

RenewalLaw RenewalLaw::gamma(double shape, double rate) {
  require(shape > 0.0 && rate > 0.0, "gamma interarrival law needs shape, rate > 0");
  return RenewalLaw(Gamma{shape, rate}, rate);
}

RenewalLaw RenewalLaw::uniform(double low, double high) {
  require(low > 0.0 && high > low, "uniform interarrival law needs 0 < low < high");
  return RenewalLaw(Uniform{low, high}, kInf);
}

RenewalLaw RenewalLaw::deterministic(double value) {
  require(value > 0.0, "deterministic interarrival law needs value > 0");
  return RenewalLaw(Deterministic{value}, kInf);
}

RenewalLaw RenewalLaw::thinned(const RenewalLaw& base, double keep) {
  require(keep > 0.0 && keep <= 1.0, "thinning probability must lie in (0, 1]");
  if (keep == 1.0) return base;
  // The geometric sum converges while (1 - keep) e^{kappa(theta)} < 1, i.e.
  // below the root of kappa(theta) = -log(1 - keep).
  const MonotoneDomain dom{-kInf, base.theta_sup(), 0.0};
  const auto root = invert_increasing([&](double t) { return base.cumulant(t); },
                                      [&](double t) { return base.cumulant_derivative(t); },
                                      -std::log1p(-keep), dom);
  return RenewalLaw(Thinned{std::make_shared<const RenewalLaw>(base), keep}, root.x);
}

double RenewalLaw::cumulant(double theta) const {
  if (!(theta < theta_sup_)) {
    throw DomainError("cumulant evaluated at theta = " + std::to_string(theta) +
                      " outside its domain (theta_sup = " + std::to_string(theta_sup_) + ")");
  }
  return std::visit(
      Overloaded{
          [&](const Exponential& e) { return -std::log1p(-theta / e.rate); },
          [&](const Gamma& g) { return -g.shape * std::log1p(-theta / g.rate); },
          [&](const Uniform& u) {
            return theta * u.low + log_expm1_over_x(theta * (u.high - u.low));
          },
          [&](const Deterministic& d) { return theta * d.value; },
          [&](const Thinned& t) {
            const double k = t.base->cumulant(theta);
            // log(1 - (1 - keep) e^k)
            const double denom = std::log1p(-(1.0 - t.keep) * std::exp(k));
            if (!std::isfinite(denom)) {
              throw DomainError("thinned cumulant: geometric sum diverges");
            }
            return k + std::log(t.keep) - denom;
          },
      },
      law_);
}

double RenewalLaw::cumulant_derivative(double theta) const {
  if (!(theta < theta_sup_)) {
    throw DomainError("cumulant derivative outside domain");
  }
  return std::visit(
      Overloaded{
          [&](const Exponential& e) { return 1.0 / (e.rate - theta); },
          [&](const Gamma& g) { return g.shape / (g.rate - theta); },
          [&](const Uniform& u) {
            const double w = u.high - u.low;
            return u.low + w * d_log_expm1_over_x(theta * w);
          },
          [&](const Deterministic& d) { return d.value; },
          [&](const Thinned& t) {
            const double k = t.base->cumulant(theta);
            const double q = (1.0 - t.keep) * std::exp(k);
            return t.base->cumulant_derivative(theta) / (1.0 - q);
          },
      },
      law_);
}

double RenewalLaw::mean() const {
  return std::visit(Overloaded{
                        [](const Exponential& e) { return 1.0 / e.rate; },
                        [](const Gamma& g) { return g.shape / g.rate; },
                        [](const Uniform& u) { return 0.5 * (u.low + u.high); },
                        [](const Deterministic& d) { return d.value; },
                        [](const Thinned& t) { return t.base->mean() / t.keep; },
                    },
                    law_);
}

double RenewalLaw::sample(Rng& rng) const {
  return std::visit(
      Overloaded{
          [&](const Exponential& e) { return -std::log(rng.uniform()) / e.rate; },
          [&](const Gamma& g) {
            return boost::math::gamma_p_inv(g.shape, rng.uniform()) / g.rate;
          },
          [&](const Uniform& u) { return u.low + (u.high - u.low) * rng.uniform(); },
          [&](const Deterministic& d) { return d.value; },
          [&](const Thinned& t) {
            double total = 0.0;
            do {
              total += t.base->sample(rng);
            } while (rng.uniform() >= t.keep);
            return total;
          },
      },
      law_);
}

bool RenewalLaw::is_poisson() const { return std::holds_alternative<Exponential>(law_); }

double RenewalLaw::poisson_rate() const {
  if (const auto* e = std::get_if<Exponential>(&law_)) return e->rate;
  throw DomainError("poisson_rate() requires exponential interarrivals");
}

std::string RenewalLaw::kind() const {
  return std::visit(Overloaded{
                        [](const Exponential&) { return std::string("exponential"); },
                        [](const Gamma&) { return std::string("gamma"); },
                        [](const Uniform&) { return std::string("uniform"); },
                        [](const Deterministic&) { return std::string("deterministic"); },
                        [](const Thinned&) { return std::string("thinned"); },
                    },
                    law_);
}

nlohmann::json RenewalLaw::to_json() const {
  return std::visit(
      Overloaded{
          [](const Exponential& e) {
            return nlohmann::json{{"kind", "exponential"}, {"rate", e.rate}};
          },
          [](const Gamma& g) {
            return nlohmann::json{{"kind", "gamma"}, {"shape", g.shape}, {"rate", g.rate}};
          },
          [](const Uniform& u) {
            return nlohmann::json{{"kind", "uniform"}, {"low", u.low}, {"high", u.high}};
          },
          [](const Deterministic& d) {
            return nlohmann::json{{"kind", "deterministic"}, {"value", d.value}};
          },
          [](const Thinned& t) {
            return nlohmann::json{{"kind", "thinned"}, {"base", t.base->to_json()}, {"keep", t.keep}};
          },
      },
      law_);
}

RenewalLaw RenewalLaw::from_json(const nlohmann::json& j) {
  const std::string kind = get_kind(j);
  try {
    if (kind == "exponential") return exponential(get_number(j, "rate"));
    if (kind == "gamma") return gamma(get_number(j, "shape"), get_number(j, "rate"));
    if (kind == "uniform") return uniform(get_number(j, "low"), get_number(j, "high"));
    if (kind == "deterministic") return deterministic(get_number(j, "value"));
    if (kind == "thinned") {
      if (!j.contains("base")) throw ConfigError("thinned interarrival law needs 'base'");
      return thinned(from_json(j.at("base")), get_number(j, "keep"));
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("interarrival law: ") + e.what());
  }
  throw ConfigError("unknown interarrival law kind '" + kind + "'");
}

}  // namespace isqld
