#include "spider/junction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spider/rng.hpp"

namespace spider {

double distance(const JunctionPoint& p, const JunctionPoint& q) {
  if (p.branch == q.branch) return std::fabs(p.radial - q.radial);
  return p.radial + q.radial;
}

SpiderPath SpiderPath::single(const SpiderState& s) {
  SpiderPath p;
  p.times = Eigen::VectorXd::Constant(1, s.t);
  p.x = Eigen::VectorXd::Constant(1, s.point.radial);
  p.branch = Eigen::VectorXi::Constant(1, s.point.branch);
  p.l = Eigen::VectorXd::Constant(1, s.l);
  return p;
}

PathCheck check_path(const SpiderPath& path, double zero_tol) {
  const Eigen::Index n = path.size();
  auto fail = [](Eigen::Index k, const std::string& what) {
    std::ostringstream os;
    os << what << " at node " << k;
    return PathCheck{false, os.str()};
  };
  if (path.x.size() != n || path.l.size() != n || path.branch.size() != n)
    return {false, "column lengths differ"};
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(path.x[k] >= 0.0)) return fail(k, "negative radial");
    if (!(path.l[k] >= 0.0)) return fail(k, "negative local time");
    if (path.branch[k] < 1) return fail(k, "invalid branch label");
    if (k == 0) continue;
    if (!(path.times[k] > path.times[k - 1])) return fail(k, "time grid not increasing");
    if (path.l[k] < path.l[k - 1]) return fail(k, "local time decreased");
    const bool touches = std::min(path.x[k - 1], path.x[k]) <= zero_tol;
    if (path.l[k] > path.l[k - 1] && !touches) return fail(k, "local time grew away from the vertex");
    if (path.branch[k] != path.branch[k - 1] && !touches)
      return fail(k, "branch changed away from the vertex");
  }
  return {};
}

CoefficientSet::CoefficientSet(int branches, BranchFn sigma, BranchFn drift, SpinningFn alpha,
                               CoefficientBounds bounds, std::string name)
    : branches_(branches),
      sigma_(std::move(sigma)),
      drift_(std::move(drift)),
      alpha_(std::move(alpha)),
      bounds_(bounds),
      name_(std::move(name)) {
  if (branches_ < 2) throw PreconditionError("CoefficientSet: need at least two branches");
  if (!sigma_ || !drift_ || !alpha_) throw PreconditionError("CoefficientSet: missing coefficient");
  if (!(bounds_.a_lower > 0.0) || bounds_.a_lower > 1.0 / branches_ + 1e-15)
    throw PreconditionError("CoefficientSet: a_lower must lie in (0, 1/I]");
  if (!(bounds_.sigma_lower > 0.0) || !(bounds_.lip_b > 0.0) || !(bounds_.lip_sigma > 0.0) ||
      !(bounds_.lip_alpha > 0.0))
    throw PreconditionError("CoefficientSet: bounds must be positive");
}

Eigen::VectorXd CoefficientSet::alpha(double t, double l) const {
  Eigen::VectorXd a(branches_);
  alpha_(t, l, std::span<double>(a.data(), static_cast<std::size_t>(branches_)));
  return a;
}

namespace {

struct Sampler {
  RandomStream rng;
  ValidationWindow w;
  double t() { return w.t_max * rng.uniform(); }
  double x() { return w.x_max * rng.uniform(); }
  double l() { return w.l_max * rng.uniform(); }
};

std::string describe(double t, double x, double l) {
  std::ostringstream os;
  os << "at (t=" << t << ", x=" << x << ", l=" << l << ")";
  return os.str();
}

}  // namespace

ValidationReport validate_coefficients(const CoefficientSet& cs, std::size_t sample_budget,
                                       std::uint64_t seed, const ValidationWindow& window) {
  if (sample_budget < 1) throw PreconditionError("validate_coefficients: sample_budget must be >= 1");
  ValidationReport report;
  const auto& bd = cs.bounds();
  const int nb = cs.branches();
  Sampler smp{RandomStream(seed, 0x76616c6964ull), window};
  // Per-axis difference quotients use a fixed step relative to the window.
  const double ht = 1e-4 * window.t_max, hx = 1e-4 * window.x_max, hl = 1e-4 * window.l_max;
  Eigen::VectorXd a(nb), a_t(nb), a_l(nb);
  auto span_of = [nb](Eigen::VectorXd& v) { return std::span<double>(v.data(), static_cast<std::size_t>(nb)); };

  auto add = [&](std::string cond, int branch, double t, double x, double l, double value,
                 std::string detail) {
    report.violations.push_back(
        Violation{std::move(cond), branch, t, x, l, value, std::move(detail) + " " + describe(t, x, l)});
  };

  for (std::size_t s = 0; s < sample_budget; ++s) {
    const double t = smp.t(), x = smp.x(), l = smp.l();
    ++report.samples;
    try {
      cs.alpha(t, l, span_of(a));
      const double sum = a.sum();
      if (!std::isfinite(sum) || std::fabs(sum - 1.0) > 1e-12)
        add("simplex", 0, t, x, l, sum, "alpha does not sum to one");
      for (int i = 0; i < nb; ++i)
        if (!(a[i] >= bd.a_lower)) add("(A)", i + 1, t, x, l, a[i], "alpha below a_lower");

      const double t2 = std::min(t + ht, window.t_max), l2 = l + hl;
      cs.alpha(t2, l, span_of(a_t));
      cs.alpha(t, l2, span_of(a_l));
      for (int i = 0; i < nb; ++i) {
        double q = std::fabs(a_l[i] - a[i]) / hl;
        if (t2 > t) q += std::fabs(a_t[i] - a[i]) / (t2 - t);
        if (q > bd.lip_alpha) add("(R) lip_alpha", i + 1, t, x, l, q, "alpha difference quotient exceeds bound");
      }

      for (int i = 1; i <= nb; ++i) {
        const double sg = cs.sigma(i, t, x, l);
        if (!(sg >= bd.sigma_lower)) add("(E)", i, t, x, l, sg, "sigma below sigma_lower");
        auto regularity = [&](auto&& fn) {
          const double v = fn(i, t, x, l);
          double q = std::fabs(v) + std::fabs(fn(i, t, x + hx, l) - v) / hx + std::fabs(fn(i, t, x, l2) - v) / hl;
          if (t2 > t) q += std::fabs(fn(i, t2, x, l) - v) / (t2 - t);
          return q;
        };
        const double rs = regularity([&](int b, double tt, double xx, double ll) { return cs.sigma(b, tt, xx, ll); });
        if (!(rs <= bd.lip_sigma)) add("(R) lip_sigma", i, t, x, l, rs, "sigma sup + Lipschitz quotients exceed bound");
        const double rb = regularity([&](int b, double tt, double xx, double ll) { return cs.drift(b, tt, xx, ll); });
        if (!(rb <= bd.lip_b)) add("(R) lip_b", i, t, x, l, rb, "drift sup + Lipschitz quotients exceed bound");
      }
    } catch (const std::exception& e) {
      add("evaluation", 0, t, x, l, std::nan(""), std::string("coefficient evaluation failed: ") + e.what());
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

TestFunction TestFunction::constant(double c) {
  auto zero = [](int, double, double) { return 0.0; };
  return {"constant", [c](int, double, double) { return c; }, zero, zero, zero};
}

TestFunction TestFunction::linear() {
  auto zero = [](int, double, double) { return 0.0; };
  return {"x", [](int, double, double x) { return x; }, zero, [](int, double, double) { return 1.0; }, zero};
}

TestFunction TestFunction::quadratic() {
  return {"x^2", [](int, double, double x) { return x * x; }, [](int, double, double) { return 0.0; },
          [](int, double, double x) { return 2.0 * x; }, [](int, double, double) { return 2.0; }};
}

TestFunction TestFunction::branch_bump(std::vector<double> weights) {
  auto w = [weights](int i) { return weights.at(static_cast<std::size_t>(i - 1)); };
  return {"branch-bump",
          [w](int i, double t, double x) { return std::cos(t) + w(i) * x * std::exp(-0.5 * x * x); },
          [](int, double t, double) { return -std::sin(t); },
          [w](int i, double, double x) { return w(i) * (1.0 - x * x) * std::exp(-0.5 * x * x); },
          [w](int i, double, double x) { return w(i) * x * (x * x - 3.0) * std::exp(-0.5 * x * x); }};
}

TestFunction TestFunction::combine(double a, const TestFunction& f, double b, const TestFunction& g) {
  auto lin = [a, b](TestFn p, TestFn q) {
    return [a, b, p = std::move(p), q = std::move(q)](int i, double t, double x) {
      return a * p(i, t, x) + b * q(i, t, x);
    };
  };
  return {f.id + "+" + g.id, lin(f.f, g.f), lin(f.f_t, g.f_t), lin(f.f_x, g.f_x), lin(f.f_xx, g.f_xx)};
}

ContinuityCheck check_junction_continuity(const TestFunction& f, int branches,
                                          std::span<const double> t_samples, double tol) {
  if (!(tol > 0.0)) throw PreconditionError("check_junction_continuity: tol must be > 0");
  ContinuityCheck out;
  for (double t : t_samples) {
    double lo = f.f(1, t, 0.0), hi = lo;
    for (int i = 2; i <= branches; ++i) {
      const double v = f.f(i, t, 0.0);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.max_gap = std::max(out.max_gap, hi - lo);
  }
  out.ok = out.max_gap <= tol;
  return out;
}

}  // namespace spider
