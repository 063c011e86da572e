#include "spider/kernels.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace spider {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kTailWidth = 10.0;  // truncation in units of sqrt(tau)
constexpr int kMaxBranches = 64;

/// u = tau (1 - cos phi) / 2 removes 1/sqrt(u (tau - u)) endpoint behaviour.
template <class F>
QuadResult integrate_arcsine(F&& f, double tau, double abs_tol) {
  auto g = [&](double phi) {
    const double u = 0.5 * tau * (1.0 - std::cos(phi));
    const double jac = 0.5 * tau * std::sin(phi);
    if (jac == 0.0) return 0.0;
    return f(u) * jac;
  };
  return integrate(g, 0.0, std::numbers::pi, abs_tol, 1e-12);
}

void require_converged(const QuadResult& r, const char* what, double tol) {
  if (!r.converged) {
    std::ostringstream os;
    os << "quadrature did not converge in " << what << ": achieved error " << r.error << " (tolerance " << tol
       << ")";
    throw NumericalError(os.str());
  }
}

}  // namespace

std::string to_string(TripleDensityVariant v) {
  return v == TripleDensityVariant::kLocalTimeWeighted ? "local-time-weighted" : "unweighted";
}

std::string to_string(AlphaTimeConvention c) {
  return c == AlphaTimeConvention::kLastZero ? "last-zero-time" : "source-time";
}

double first_passage_density(double x, double u) {
  if (!(u > 0.0) || !(x > 0.0)) return 0.0;
  return x * kInvSqrt2Pi / (u * std::sqrt(u)) * std::exp(-x * x / (2.0 * u));
}

double killed_heat_kernel(double x, double y, double tau) {
  if (!(tau > 0.0) || y < 0.0 || x < 0.0) return 0.0;
  const double c = kInvSqrt2Pi / std::sqrt(tau);
  // exp(-(y-x)^2/2tau) - exp(-(y+x)^2/2tau) = exp(-(y-x)^2/2tau) (1 - exp(-2xy/tau))
  return c * std::exp(-(y - x) * (y - x) / (2.0 * tau)) * (-std::expm1(-2.0 * x * y / tau));
}

double triple_density(double x, double ell, double s, double t, TripleDensityVariant variant) {
  if (!(t > 0.0)) throw PreconditionError("triple_density: t must be > 0");
  if (!(x > 0.0) || !(ell > 0.0) || !(s > 0.0) || s > t) return 0.0;
  const double r = t - s;
  if (!(r > 0.0)) return 0.0;
  const double weight = variant == TripleDensityVariant::kLocalTimeWeighted ? 2.0 * ell : 2.0;
  return weight * kInvSqrt2Pi / (s * std::sqrt(s)) * std::exp(-ell * ell / (2.0 * s)) * x * kInvSqrt2Pi /
         (r * std::sqrt(r)) * std::exp(-x * x / (2.0 * r));
}

SpiderKernel::SpiderKernel(const CoefficientSet& cs, double s, JunctionPoint source, double l, double t,
                           KernelOptions opts)
    : cs_(&cs), branches_(cs.branches()), s_(s), t_(t), l_(l), source_(source), opts_(opts) {
  if (!cs.brownian) throw PreconditionError("kernel: coefficients must be declared Brownian (sigma = 1, b = 0)");
  if (!(t > s)) throw PreconditionError("kernel: need t > s");
  if (!(l >= 0.0)) throw PreconditionError("kernel: local time must be >= 0");
  if (branches_ > kMaxBranches) throw PreconditionError("kernel: too many branches");
  if (source_.radial <= kZeroTol) source_ = JunctionPoint(1, 0.0);
}

double SpiderKernel::alpha_j(int j, double time, double local) const {
  std::array<double, kMaxBranches> buf{};
  cs_->alpha(time, local, std::span<double>(buf.data(), static_cast<std::size_t>(branches_)));
  return buf[static_cast<std::size_t>(j - 1)];
}

double SpiderKernel::ell_factor(double ell, double v) const {
  if (!(v > 0.0) || !(ell > 0.0)) return 0.0;
  const double weight = opts_.variant == TripleDensityVariant::kLocalTimeWeighted ? 2.0 * ell : 2.0;
  return weight * kInvSqrt2Pi / (v * std::sqrt(v)) * std::exp(-ell * ell / (2.0 * v));
}

double SpiderKernel::y_factor(double y, double r) const {
  if (!(r > 0.0) || !(y > 0.0)) return 0.0;
  return y * kInvSqrt2Pi / (r * std::sqrt(r)) * std::exp(-y * y / (2.0 * r));
}

double SpiderKernel::ell_factor_mass(int j, double v, double time, double ell0, double ell1,
                                     bool /*last_zero_time*/) const {
  if (!(v > 0.0)) return 0.0;
  const double sv = std::sqrt(v);
  const double w0 = ell0 / sv, w1 = std::min(ell1 / sv, 40.0);
  if (!(w1 > w0)) return 0.0;
  auto f = [&](double w) { return alpha_j(j, time, l_ + sv * w) * ell_factor(sv * w, v) * sv; };
  const QuadResult r = integrate(f, w0, w1, opts_.inner_tol, 1e-12);
  require_converged(r, "local-time factor", opts_.inner_tol);
  return r.value;
}

double SpiderKernel::y_factor_mass(double r, double y0, double y1) const {
  if (!(r > 0.0)) return 0.0;
  const double sr = std::sqrt(r);
  const double w0 = y0 / sr, w1 = std::min(y1 / sr, 40.0);
  if (!(w1 > w0)) return 0.0;
  auto f = [&](double w) { return w * std::exp(-0.5 * w * w) * kInvSqrt2Pi / sr; };
  const QuadResult q = integrate(f, w0, w1, opts_.inner_tol, 1e-12);
  require_converged(q, "radial factor", opts_.inner_tol);
  return q.value;
}

double SpiderKernel::density(double y, int j, double ell) const {
  if (j < 1 || j > branches_) throw PreconditionError("kernel: branch out of range");
  if (!(y > 0.0) || !(ell > 0.0)) return 0.0;
  const double tau = t_ - s_;
  if (from_vertex()) {
    const bool last_zero = opts_.convention == AlphaTimeConvention::kLastZero;
    auto f = [&](double u) {
      const double time = last_zero ? s_ + u : s_;
      return alpha_j(j, time, l_ + ell) * ell_factor(ell, u) * y_factor(y, tau - u);
    };
    std::vector<double> pts = {0.0, tau};
    for (double c : {0.25, 1.0, 4.0}) {
      pts.push_back(std::min(tau, ell * ell / 3.0 * c));
      pts.push_back(std::max(0.0, tau - y * y / 3.0 * c));
    }
    const QuadResult r = integrate_pieces(f, pts, opts_.entry_tol * 1e-2, 1e-10);
    require_converged(r, "vertex kernel density", opts_.entry_tol);
    return r.value;
  }
  const double x = source_.radial;
  auto outer = [&](double u) {
    const double rem = tau - u;
    if (!(rem > 0.0)) return 0.0;
    auto inner = [&](double v) {
      return alpha_j(j, s_ + u + v, l_ + ell) * ell_factor(ell, v) * y_factor(y, rem - v);
    };
    std::vector<double> pts = {0.0, rem};
    for (double c : {0.25, 1.0, 4.0}) {
      pts.push_back(std::min(rem, ell * ell / 3.0 * c));
      pts.push_back(std::max(0.0, rem - y * y / 3.0 * c));
    }
    const QuadResult r = integrate_pieces(inner, pts, opts_.inner_tol, 1e-10);
    require_converged(r, "general kernel inner integral", opts_.inner_tol);
    return first_passage_density(x, u) * r.value;
  };
  std::vector<double> pts = {0.0, tau};
  for (double c : {0.05, 0.3, 1.0, 3.0, 10.0}) pts.push_back(std::min(tau, x * x * c));
  const QuadResult r = integrate_pieces(outer, pts, opts_.entry_tol * 1e-2, 1e-10);
  require_converged(r, "general kernel density", opts_.entry_tol);
  return r.value;
}

double SpiderKernel::atom(double y, int j) const {
  if (from_vertex() || j != source_.branch) return 0.0;
  return killed_heat_kernel(source_.radial, y, t_ - s_);
}

double SpiderKernel::truncation() const { return source_.radial + kTailWidth * std::sqrt(t_ - s_); }

KernelMass SpiderKernel::continuous_mass(int j, double y0, double y1, double ell0, double ell1) const {
  if (j < 1 || j > branches_) throw PreconditionError("kernel: branch out of range");
  const double tau = t_ - s_;
  const double tol = opts_.entry_tol * 1e-2;
  if (from_vertex()) {
    const bool last_zero = opts_.convention == AlphaTimeConvention::kLastZero;
    auto f = [&](double u) {
      const double time = last_zero ? s_ + u : s_;
      const double ym = y_factor_mass(tau - u, y0, y1);
      if (ym == 0.0) return 0.0;
      return ell_factor_mass(j, u, time, ell0, ell1, last_zero) * ym;
    };
    const QuadResult r = integrate_arcsine(f, tau, tol);
    require_converged(r, "vertex kernel mass", opts_.entry_tol);
    return {r.value, r.error};
  }
  const double x = source_.radial;
  auto outer = [&](double u) {
    const double rem = tau - u;
    if (!(rem > 0.0)) return 0.0;
    const double fp = first_passage_density(x, u);
    if (fp == 0.0) return 0.0;
    auto inner = [&](double v) {
      const double ym = y_factor_mass(rem - v, y0, y1);
      if (ym == 0.0) return 0.0;
      return ell_factor_mass(j, v, s_ + u + v, ell0, ell1, true) * ym;
    };
    const QuadResult r = integrate_arcsine(inner, rem, opts_.inner_tol);
    require_converged(r, "general kernel mass inner integral", opts_.inner_tol);
    return fp * r.value;
  };
  std::vector<double> pts = {0.0, tau};
  for (double c : {0.05, 0.3, 1.0, 3.0, 10.0}) pts.push_back(std::min(tau, x * x * c));
  const QuadResult r = integrate_pieces(outer, pts, tol, 1e-10);
  require_converged(r, "general kernel mass", opts_.entry_tol);
  return {r.value, r.error};
}

KernelMass SpiderKernel::atom_mass(int j, double y0, double y1) const {
  if (from_vertex() || j != source_.branch) return {};
  if (y1 < 0.0) y1 = truncation();
  const double x = source_.radial, tau = t_ - s_;
  auto f = [&](double y) { return killed_heat_kernel(x, y, tau); };
  std::vector<double> pts = {y0, y1};
  if (x > y0 && x < y1) pts.push_back(x);
  const QuadResult r = integrate_pieces(f, pts, opts_.entry_tol * 1e-3, 1e-13);
  require_converged(r, "atom mass", opts_.entry_tol);
  return {r.value, r.error};
}

KernelMass SpiderKernel::box_mass(int j, double y0, double y1, double ell0, double ell1) const {
  KernelMass m = continuous_mass(j, y0, y1, ell0, ell1);
  if (ell0 == 0.0) {
    const KernelMass a = atom_mass(j, y0, y1);
    m.value += a.value;
    m.error += a.error;
  }
  return m;
}

KernelMass SpiderKernel::branch_mass(int j) const {
  const double R = truncation();
  KernelMass m = box_mass(j, 0.0, R, 0.0, kTailWidth * std::sqrt(t_ - s_));
  // Gaussian tails beyond the truncation radius, for y and for ell.
  m.error += 2.0 * std::erfc(kTailWidth / std::numbers::sqrt2);
  return m;
}

KernelMass SpiderKernel::total_mass() const {
  KernelMass m;
  for (int j = 1; j <= branches_; ++j) {
    const KernelMass b = branch_mass(j);
    m.value += b.value;
    m.error += b.error;
  }
  return m;
}

double SpiderKernel::marginal_density(double y, int j) const {
  if (!(y > 0.0)) return 0.0;
  const double tau = t_ - s_;
  const double big = kTailWidth * std::sqrt(tau);
  double cont;
  if (from_vertex()) {
    const bool last_zero = opts_.convention == AlphaTimeConvention::kLastZero;
    auto f = [&](double u) {
      const double time = last_zero ? s_ + u : s_;
      return ell_factor_mass(j, u, time, 0.0, big, last_zero) * y_factor(y, tau - u);
    };
    const QuadResult r = integrate_arcsine(f, tau, opts_.entry_tol * 1e-2);
    require_converged(r, "vertex marginal density", opts_.entry_tol);
    cont = r.value;
  } else {
    const double x = source_.radial;
    auto outer = [&](double u) {
      const double rem = tau - u;
      if (!(rem > 0.0)) return 0.0;
      const double fp = first_passage_density(x, u);
      if (fp == 0.0) return 0.0;
      auto inner = [&](double v) { return ell_factor_mass(j, v, s_ + u + v, 0.0, big, true) * y_factor(y, rem - v); };
      const QuadResult r = integrate_arcsine(inner, rem, opts_.inner_tol);
      require_converged(r, "general marginal inner integral", opts_.inner_tol);
      return fp * r.value;
    };
    std::vector<double> pts = {0.0, tau};
    for (double c : {0.05, 0.3, 1.0, 3.0, 10.0}) pts.push_back(std::min(tau, x * x * c));
    const QuadResult r = integrate_pieces(outer, pts, opts_.entry_tol * 1e-2, 1e-10);
    require_converged(r, "general marginal density", opts_.entry_tol);
    cont = r.value;
  }
  return cont + atom(y, j);
}

SpiderKernel kernel_from_junction(const CoefficientSet& cs, double s, double l, double t, KernelOptions opts) {
  return SpiderKernel(cs, s, JunctionPoint(1, 0.0), l, t, opts);
}

SpiderKernel kernel_general(const CoefficientSet& cs, double s, JunctionPoint source, double l, double t,
                            KernelOptions opts) {
  if (!(source.radial > 0.0)) throw PreconditionError("kernel_general: source must be away from the vertex");
  return SpiderKernel(cs, s, source, l, t, opts);
}

BranchMarginal branch_marginal(const SpiderKernel& kernel) {
  BranchMarginal out;
  out.mass.resize(kernel.branches());
  out.error.resize(kernel.branches());
  for (int j = 1; j <= kernel.branches(); ++j) {
    const KernelMass m = kernel.branch_mass(j);
    out.mass(j - 1) = m.value;
    out.error(j - 1) = m.error;
  }
  return out;
}

KernelMass triple_density_mass(double t, TripleDensityVariant variant, double s_min) {
  if (!(t > 0.0)) throw PreconditionError("triple_density_mass: t must be > 0");
  const bool weighted = variant == TripleDensityVariant::kLocalTimeWeighted;
  // Inner integrals in scaled variables ell = sqrt(s) w and x = sqrt(t - s) w.
  auto ell_mass = [&](double s) {
    auto f = [&](double w) {
      const double ell = std::sqrt(s) * w;
      return (weighted ? 2.0 * ell : 2.0) * kInvSqrt2Pi / s * std::exp(-0.5 * w * w);
    };
    return integrate(f, 0.0, 40.0, 1e-12, 1e-12).value;
  };
  auto x_mass = [&](double r) {
    auto f = [&](double w) { return w * std::exp(-0.5 * w * w) * kInvSqrt2Pi / std::sqrt(r); };
    return integrate(f, 0.0, 40.0, 1e-12, 1e-12).value;
  };
  auto outer = [&](double s) { return ell_mass(s) * x_mass(t - s); };
  const double half = 0.5 * t;
  QuadResult low;
  if (s_min > 0.0) {
    // The unweighted integrand behaves like 1/s near 0, so integrate in log s.
    auto g = [&](double z) {
      const double s = std::exp(z);
      return outer(s) * s;
    };
    low = s_min < half ? integrate(g, std::log(s_min), std::log(half), 1e-10, 1e-12) : QuadResult{};
  } else {
    auto g = [&](double z) { return z == 0.0 ? 0.0 : outer(z * z) * 2.0 * z; };
    low = integrate(g, 0.0, std::sqrt(half), 1e-10, 1e-12);
  }
  // s = t/2 (1 + sin theta) smooths the 1/sqrt(t - s) end.
  auto h = [&](double theta) {
    const double s = half * (1.0 + std::sin(theta));
    const double jac = half * std::cos(theta);
    if (jac <= 0.0 || s < s_min) return 0.0;
    return outer(s) * jac;
  };
  const QuadResult high = integrate(h, 0.0, 0.5 * std::numbers::pi, 1e-10, 1e-12);
  QuadResult r;
  r.value = low.value + high.value;
  r.error = low.error + high.error;
  return {r.value, r.error};
}

}  // namespace spider
