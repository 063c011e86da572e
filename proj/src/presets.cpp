#include "spider/presets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace spider {

using nlohmann::json;

namespace {

constexpr double kSafety = 1.0 + 1e-9;

double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }
double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::fabs(a));
  return m;
}

void require_keys(const json& spec, const std::set<std::string>& allowed, const std::string& where) {
  if (!spec.is_object()) throw PreconditionError(where + ": expected a JSON object");
  for (const auto& [key, _] : spec.items())
    if (!allowed.count(key)) throw PreconditionError(where + ": unknown key '" + key + "'");
}

std::vector<double> vec(const json& spec, const char* key, std::size_t n, double fill) {
  if (!spec.contains(key)) return std::vector<double>(n, fill);
  auto v = spec.at(key).get<std::vector<double>>();
  if (v.size() != n)
    throw PreconditionError(std::string("preset: '") + key + "' must have " + std::to_string(n) + " entries");
  return v;
}

void check_simplex(const std::vector<double>& alpha, const char* what) {
  const double s = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  if (std::fabs(s - 1.0) > 1e-12) throw PreconditionError(std::string("preset: ") + what + " must sum to 1");
}

CoefficientBounds apply_overrides(CoefficientBounds b, const json& spec) {
  if (!spec.contains("bounds")) return b;
  const json& o = spec.at("bounds");
  require_keys(o, {"a_lower", "sigma_lower", "lip_b", "lip_sigma", "lip_alpha"}, "bounds");
  b.a_lower = o.value("a_lower", b.a_lower);
  b.sigma_lower = o.value("sigma_lower", b.sigma_lower);
  b.lip_b = o.value("lip_b", b.lip_b);
  b.lip_sigma = o.value("lip_sigma", b.lip_sigma);
  b.lip_alpha = o.value("lip_alpha", b.lip_alpha);
  return b;
}

int branch_count(const json& spec) {
  if (spec.contains("I")) return spec.at("I").get<int>();
  for (const char* key : {"sigma", "alpha", "drift"})
    if (spec.contains(key)) return static_cast<int>(spec.at(key).size());
  return 2;
}

}  // namespace

CoefficientSet brownian_spider(int branches, AlphaMode mode, std::vector<double> alpha, double base,
                               double amp) {
  if (branches < 2) throw PreconditionError("brownian_spider: need at least two branches");
  auto one = [](int, double, double, double) { return 1.0; };
  auto zero = [](int, double, double, double) { return 0.0; };
  CoefficientBounds b;
  b.sigma_lower = 1.0;
  b.lip_sigma = 1.0;
  b.lip_b = 1.0;
  SpinningFn spin;
  std::string name = "brownian-spider";
  switch (mode) {
    case AlphaMode::kUniform:
      alpha.assign(static_cast<std::size_t>(branches), 1.0 / branches);
      [[fallthrough]];
    case AlphaMode::kGiven: {
      if (alpha.size() != static_cast<std::size_t>(branches))
        throw PreconditionError("brownian_spider: alpha must have I entries");
      check_simplex(alpha, "alpha");
      b.a_lower = min_of(alpha);
      b.lip_alpha = 1.0;
      spin = [alpha](double, double, std::span<double> out) { std::copy(alpha.begin(), alpha.end(), out.begin()); };
      name += mode == AlphaMode::kUniform ? "/uniform" : "/constant";
      break;
    }
    case AlphaMode::kLDependent: {
      if (!(base > 0.0) || !(base + amp < 1.0) || amp < 0.0)
        throw PreconditionError("brownian_spider: need 0 < base, 0 <= amp, base + amp < 1");
      const int nb = branches;
      spin = [nb, base, amp](double, double l, std::span<double> out) {
        const double a1 = base + amp / (1.0 + l);
        out[0] = a1;
        const double rest = (1.0 - a1) / (nb - 1);
        for (int i = 1; i < nb; ++i) out[static_cast<std::size_t>(i)] = rest;
      };
      b.a_lower = std::min(base, (1.0 - base - amp) / (nb - 1));
      b.lip_alpha = std::max(amp, 1e-12) * kSafety;
      name += "/l-dependent";
      break;
    }
  }
  CoefficientSet cs(branches, one, zero, std::move(spin), b, name);
  cs.brownian = true;
  return cs;
}

CoefficientSet constant_coefficients(std::vector<double> sigma, std::vector<double> drift,
                                     std::vector<double> alpha) {
  const std::size_t n = alpha.size();
  if (sigma.size() != n || drift.size() != n) throw PreconditionError("constant: sigma, drift, alpha sizes differ");
  check_simplex(alpha, "alpha");
  CoefficientBounds b;
  b.a_lower = min_of(alpha);
  b.sigma_lower = min_of(sigma);
  b.lip_sigma = max_abs(sigma) * kSafety;
  b.lip_b = std::max(max_abs(drift), 1e-12) * kSafety;
  b.lip_alpha = 1.0;
  const bool brownian = std::all_of(sigma.begin(), sigma.end(), [](double s) { return s == 1.0; }) &&
                        std::all_of(drift.begin(), drift.end(), [](double d) { return d == 0.0; });
  CoefficientSet cs(
      static_cast<int>(n), [sigma](int i, double, double, double) { return sigma[static_cast<std::size_t>(i - 1)]; },
      [drift](int i, double, double, double) { return drift[static_cast<std::size_t>(i - 1)]; },
      [alpha](double, double, std::span<double> out) { std::copy(alpha.begin(), alpha.end(), out.begin()); }, b,
      "constant");
  cs.brownian = brownian;
  return cs;
}

json normalize_preset(const json& spec) {
  if (!spec.is_object() || !spec.contains("family")) throw PreconditionError("preset: missing 'family'");
  const auto family = spec.at("family").get<std::string>();
  const int nb = branch_count(spec);
  if (nb < 2) throw PreconditionError("preset: I must be >= 2");
  const auto n = static_cast<std::size_t>(nb);
  json out = {{"family", family}, {"I", nb}};
  if (family == "brownian-spider") {
    require_keys(spec, {"family", "I", "alpha_mode", "alpha", "alpha_base", "alpha_amp", "bounds"}, "brownian-spider");
    const auto mode = spec.value("alpha_mode", std::string("uniform"));
    if (mode != "uniform" && mode != "constant" && mode != "l-dependent")
      throw PreconditionError("brownian-spider: alpha_mode must be uniform, constant or l-dependent");
    out["alpha_mode"] = mode;
    if (mode == "constant") out["alpha"] = vec(spec, "alpha", n, 1.0 / nb);
    if (mode == "l-dependent") {
      out["alpha_base"] = spec.value("alpha_base", 0.3);
      out["alpha_amp"] = spec.value("alpha_amp", 0.3);
    }
  } else if (family == "constant") {
    require_keys(spec, {"family", "I", "sigma", "drift", "alpha", "bounds"}, "constant");
    out["sigma"] = vec(spec, "sigma", n, 1.0);
    out["drift"] = vec(spec, "drift", n, 0.0);
    out["alpha"] = vec(spec, "alpha", n, 1.0 / nb);
  } else if (family == "affine-in-l") {
    require_keys(spec,
                 {"family", "I", "sigma", "sigma_slope", "drift", "drift_slope", "alpha", "alpha_slope", "l_cap", "bounds"},
                 "affine-in-l");
    out["sigma"] = vec(spec, "sigma", n, 1.0);
    out["sigma_slope"] = vec(spec, "sigma_slope", n, 0.0);
    out["drift"] = vec(spec, "drift", n, 0.0);
    out["drift_slope"] = vec(spec, "drift_slope", n, 0.0);
    out["alpha"] = vec(spec, "alpha", n, 1.0 / nb);
    out["alpha_slope"] = vec(spec, "alpha_slope", n, 0.0);
    out["l_cap"] = spec.value("l_cap", 4.0);
  } else if (family == "trig-in-t") {
    require_keys(spec, {"family", "I", "sigma", "sigma_amp", "drift", "alpha", "alpha_amp", "omega", "bounds"},
                 "trig-in-t");
    out["sigma"] = vec(spec, "sigma", n, 1.0);
    out["sigma_amp"] = spec.value("sigma_amp", 0.0);
    out["drift"] = vec(spec, "drift", n, 0.0);
    out["alpha"] = vec(spec, "alpha", n, 1.0 / nb);
    out["alpha_amp"] = vec(spec, "alpha_amp", n, 0.0);
    out["omega"] = spec.value("omega", 2.0 * M_PI);
  } else {
    throw PreconditionError("preset: unknown family '" + family + "'");
  }
  if (spec.contains("bounds")) out["bounds"] = spec.at("bounds");
  return out;
}

CoefficientSet make_preset(const json& raw) {
  const json spec = normalize_preset(raw);
  const auto family = spec.at("family").get<std::string>();
  const int nb = spec.at("I").get<int>();

  if (family == "brownian-spider") {
    const auto mode = spec.at("alpha_mode").get<std::string>();
    CoefficientSet cs = mode == "uniform"    ? brownian_spider(nb)
                        : mode == "constant" ? brownian_spider(nb, AlphaMode::kGiven,
                                                               spec.at("alpha").get<std::vector<double>>())
                                             : brownian_spider(nb, AlphaMode::kLDependent, {},
                                                               spec.at("alpha_base").get<double>(),
                                                               spec.at("alpha_amp").get<double>());
    if (!spec.contains("bounds")) return cs;
    CoefficientSet out(nb, [](int, double, double, double) { return 1.0; },
                       [](int, double, double, double) { return 0.0; },
                       [a = cs](double t, double l, std::span<double> o) { a.alpha(t, l, o); },
                       apply_overrides(cs.bounds(), spec), cs.name());
    out.brownian = true;
    return out;
  }

  const auto sigma = spec.at("sigma").get<std::vector<double>>();
  const auto drift = spec.at("drift").get<std::vector<double>>();
  const auto alpha = spec.at("alpha").get<std::vector<double>>();
  check_simplex(alpha, "alpha");

  if (family == "constant") {
    CoefficientSet cs = constant_coefficients(sigma, drift, alpha);
    if (!spec.contains("bounds")) return cs;
    CoefficientSet out(nb, [sigma](int i, double, double, double) { return sigma[static_cast<std::size_t>(i - 1)]; },
                       [drift](int i, double, double, double) { return drift[static_cast<std::size_t>(i - 1)]; },
                       [alpha](double, double, std::span<double> o) { std::copy(alpha.begin(), alpha.end(), o.begin()); },
                       apply_overrides(cs.bounds(), spec), "constant");
    out.brownian = cs.brownian;
    return out;
  }

  if (family == "affine-in-l") {
    const auto ss = spec.at("sigma_slope").get<std::vector<double>>();
    const auto ds = spec.at("drift_slope").get<std::vector<double>>();
    const auto as = spec.at("alpha_slope").get<std::vector<double>>();
    const double cap = spec.at("l_cap").get<double>();
    if (!(cap > 0.0)) throw PreconditionError("affine-in-l: l_cap must be > 0");
    if (std::fabs(std::accumulate(as.begin(), as.end(), 0.0)) > 1e-12)
      throw PreconditionError("affine-in-l: alpha_slope must sum to 0");
    CoefficientBounds b;
    b.a_lower = 1.0;
    b.sigma_lower = 1e300;
    b.lip_alpha = std::max(max_abs(as), 1e-12) * kSafety;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
      b.a_lower = std::min({b.a_lower, alpha[i], alpha[i] + as[i] * cap});
      b.sigma_lower = std::min({b.sigma_lower, sigma[i], sigma[i] + ss[i] * cap});
      b.lip_sigma = std::max(b.lip_sigma, (std::max(std::fabs(sigma[i]), std::fabs(sigma[i] + ss[i] * cap)) +
                                           std::fabs(ss[i])) * kSafety);
      b.lip_b = std::max(b.lip_b, (std::max(std::fabs(drift[i]), std::fabs(drift[i] + ds[i] * cap)) +
                                   std::fabs(ds[i])) * kSafety);
    }
    b = apply_overrides(b, spec);
    auto capped = [cap](double l) { return std::min(l, cap); };
    return CoefficientSet(
        nb,
        [sigma, ss, capped](int i, double, double, double l) {
          const auto k = static_cast<std::size_t>(i - 1);
          return sigma[k] + ss[k] * capped(l);
        },
        [drift, ds, capped](int i, double, double, double l) {
          const auto k = static_cast<std::size_t>(i - 1);
          return drift[k] + ds[k] * capped(l);
        },
        [alpha, as, capped](double, double l, std::span<double> o) {
          for (std::size_t k = 0; k < alpha.size(); ++k) o[k] = alpha[k] + as[k] * capped(l);
        },
        b, "affine-in-l");
  }

  // trig-in-t
  const double sa = spec.at("sigma_amp").get<double>();
  const auto aa = spec.at("alpha_amp").get<std::vector<double>>();
  const double om = spec.at("omega").get<double>();
  if (std::fabs(std::accumulate(aa.begin(), aa.end(), 0.0)) > 1e-12)
    throw PreconditionError("trig-in-t: alpha_amp must sum to 0");
  CoefficientBounds b;
  b.a_lower = 1.0;
  b.sigma_lower = 1e300;
  b.lip_alpha = std::max(max_abs(aa) * std::fabs(om), 1e-12) * kSafety;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    b.a_lower = std::min(b.a_lower, alpha[i] - std::fabs(aa[i]));
    b.sigma_lower = std::min(b.sigma_lower, sigma[i] * (1.0 - std::fabs(sa)));
    b.lip_sigma = std::max(b.lip_sigma, std::fabs(sigma[i]) * (1.0 + std::fabs(sa) * (1.0 + std::fabs(om))) * kSafety);
    b.lip_b = std::max(b.lip_b, std::max(std::fabs(drift[i]) * (1.0 + std::fabs(om)), 1e-12) * kSafety);
  }
  b = apply_overrides(b, spec);
  return CoefficientSet(
      nb,
      [sigma, sa, om](int i, double t, double, double) {
        return sigma[static_cast<std::size_t>(i - 1)] * (1.0 + sa * std::sin(om * t));
      },
      [drift, om](int i, double t, double, double) { return drift[static_cast<std::size_t>(i - 1)] * std::cos(om * t); },
      [alpha, aa, om](double t, double, std::span<double> o) {
        const double s = std::sin(om * t);
        for (std::size_t k = 0; k < alpha.size(); ++k) o[k] = alpha[k] + aa[k] * s;
      },
      b, "trig-in-t");
}

}  // namespace spider
