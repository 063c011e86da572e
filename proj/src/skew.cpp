#include "spider/skew.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace spider {

SkewCoefficients constant_skew(double alpha, double sigma_plus, double sigma_minus, double drift_plus,
                               double drift_minus) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("skew: alpha must lie in (0, 1)");
  if (!(sigma_plus > 0.0) || !(sigma_minus > 0.0)) throw PreconditionError("skew: sigma must be > 0");
  SkewCoefficients sk;
  sk.sigma = [=](double, double y, double) { return y >= 0.0 ? sigma_plus : sigma_minus; };
  sk.drift = [=](double, double y, double) { return y >= 0.0 ? drift_plus : drift_minus; };
  sk.sigma_plus = [=](double, double) { return sigma_plus; };
  sk.sigma_minus = [=](double, double) { return sigma_minus; };
  sk.alpha = [=](double, double) { return alpha; };
  sk.a_lower = std::min(alpha, 1.0 - alpha);
  sk.sigma_lower = std::min(sigma_plus, sigma_minus);
  sk.sigma_upper = std::max(sigma_plus, sigma_minus);
  sk.lip_sigma = sk.sigma_upper;
  sk.lip_b = std::max(std::abs(drift_plus), std::abs(drift_minus)) + 1e-12;
  sk.lip_alpha = 1e-12;
  return sk;
}

nlohmann::json normalize_skew_preset(const nlohmann::json& spec) {
  static const std::set<std::string> allowed = {"family", "alpha", "sigma_plus", "sigma_minus", "drift_plus",
                                                "drift_minus"};
  if (!spec.is_object()) throw PreconditionError("skew preset: expected a JSON object");
  for (const auto& [key, _] : spec.items())
    if (!allowed.count(key)) throw PreconditionError("skew preset: unknown key '" + key + "'");
  const std::string family = spec.value("family", std::string("skew-constant"));
  if (family != "skew-constant") throw PreconditionError("skew preset: unknown family '" + family + "'");
  return {{"family", family},
          {"alpha", spec.value("alpha", 0.5)},
          {"sigma_plus", spec.value("sigma_plus", 1.0)},
          {"sigma_minus", spec.value("sigma_minus", 1.0)},
          {"drift_plus", spec.value("drift_plus", 0.0)},
          {"drift_minus", spec.value("drift_minus", 0.0)}};
}

SkewCoefficients make_skew_preset(const nlohmann::json& spec) {
  const nlohmann::json n = normalize_skew_preset(spec);
  return constant_skew(n["alpha"].get<double>(), n["sigma_plus"].get<double>(), n["sigma_minus"].get<double>(),
                       n["drift_plus"].get<double>(), n["drift_minus"].get<double>());
}

double beta(double s, double l, const SkewCoefficients& sk) {
  const double a = sk.alpha(s, l), sp = sk.sigma_plus(s, l), sm = sk.sigma_minus(s, l);
  if (!(sp > 0.0) || !(sm > 0.0)) throw PreconditionError("beta: one-sided volatilities must be > 0");
  const double den = a * sp + (1.0 - a) * sm;
  if (den == 0.0) throw NumericalError("beta: zero denominator");
  return (a * sp - (1.0 - a) * sm) / den;
}

CoefficientSet to_spider(const SkewCoefficients& sk) {
  // Branch 1 at x = 0 must see the left limit, not y = -0.0 >= 0.
  auto left = [](double x) { return x > 0.0 ? -x : -std::numeric_limits<double>::denorm_min(); };
  auto sigma = [sk, left](int i, double t, double x, double l) {
    return i == 2 ? sk.sigma(t, x, l) : sk.sigma(t, left(x), l);
  };
  auto drift = [sk, left](int i, double t, double x, double l) {
    return i == 2 ? sk.drift(t, x, l) : -sk.drift(t, left(x), l);
  };
  auto alpha = [sk](double t, double l, std::span<double> out) {
    const double a = sk.alpha(t, l), sp = sk.sigma_plus(t, l), sm = sk.sigma_minus(t, l);
    const double den = a * sp + (1.0 - a) * sm;
    out[1] = a * sp / den;
    out[0] = 1.0 - out[1];
  };
  CoefficientBounds b;
  const double al = sk.a_lower * sk.sigma_lower;
  b.a_lower = std::min(0.5, al / (al + (1.0 - sk.a_lower) * sk.sigma_upper));
  b.sigma_lower = sk.sigma_lower;
  b.lip_b = sk.lip_b;
  b.lip_sigma = sk.lip_sigma;
  b.lip_alpha = sk.lip_alpha * sk.sigma_upper / std::max(sk.sigma_lower, 1e-300);
  CoefficientSet cs(2, sigma, drift, alpha, b, "skew");
  return cs;
}

SkewCoefficients from_spider(const CoefficientSet& cs) {
  if (cs.branches() != 2) throw PreconditionError("from_spider: need exactly two branches");
  SkewCoefficients sk;
  sk.sigma = [cs](double t, double y, double l) { return y >= 0.0 ? cs.sigma(2, t, y, l) : cs.sigma(1, t, -y, l); };
  sk.drift = [cs](double t, double y, double l) { return y >= 0.0 ? cs.drift(2, t, y, l) : -cs.drift(1, t, -y, l); };
  sk.sigma_plus = [cs](double t, double l) { return cs.sigma(2, t, 0.0, l); };
  sk.sigma_minus = [cs](double t, double l) { return cs.sigma(1, t, 0.0, l); };
  // alpha / (1 - alpha) = alpha_2 sigma_1(0) / (alpha_1 sigma_2(0)).
  sk.alpha = [cs](double t, double l) {
    const Eigen::VectorXd a = cs.alpha(t, l);
    const double num = a(1) * cs.sigma(1, t, 0.0, l);
    return num / (num + a(0) * cs.sigma(2, t, 0.0, l));
  };
  sk.a_lower = cs.bounds().a_lower;
  sk.sigma_lower = cs.bounds().sigma_lower;
  sk.sigma_upper = cs.bounds().lip_sigma;
  sk.lip_b = cs.bounds().lip_b;
  sk.lip_sigma = cs.bounds().lip_sigma;
  sk.lip_alpha = cs.bounds().lip_alpha;
  return sk;
}

SkewPath to_signed(const SpiderPath& p) {
  SkewPath s;
  s.times = p.times;
  s.l = p.l;
  s.branch = p.branch;
  s.y = p.x.array() * (2 * p.branch.array() - 3).cast<double>();
  return s;
}

namespace {

SpiderState skew_start(double y0) {
  if (!std::isfinite(y0)) throw PreconditionError("skew: y0 must be finite");
  return {0.0, JunctionPoint(y0 > 0.0 ? 2 : 1, std::abs(y0)), 0.0};
}

}  // namespace

SkewPath simulate_skew(const SkewCoefficients& sk, double y0, const SchemeConfig& cfg) {
  return to_signed(simulate_path(to_spider(sk), skew_start(y0), cfg));
}

SkewEnsemble simulate_skew_ensemble(const SkewCoefficients& sk, double y0, const SchemeConfig& cfg,
                                    std::size_t paths) {
  SkewEnsemble e;
  e.spider = simulate_ensemble(to_spider(sk), skew_start(y0), cfg, paths);
  e.y = e.spider.x.array() * (2 * e.spider.branch.array() - 3).cast<double>();
  return e;
}

}  // namespace spider
