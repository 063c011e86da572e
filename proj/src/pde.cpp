#include "spider/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spider/parallel.hpp"

namespace spider {

void PdeGrid::validate() const {
  if (!(x_max > 0.0) || !(l_max > 0.0) || !(horizon > 0.0))
    throw PreconditionError("pde grid: x_max, l_max and horizon must be > 0");
  if (mx < 2 || ml < 2 || mt < 2) throw PreconditionError("pde grid: at least 3 nodes per axis");
}

TerminalData TerminalData::constant(int branches, double c) {
  TerminalData g;
  g.branches = branches;
  g.g = [c](int, double, double) { return c; };
  g.g_x = [](int, double, double) { return 0.0; };
  g.g_l = [](int, double, double) { return 0.0; };
  g.name = "constant";
  return g;
}

TerminalData TerminalData::x_minus_l(int branches) {
  TerminalData g;
  g.branches = branches;
  g.g = [](int, double x, double l) { return x - l; };
  g.g_x = [](int, double, double) { return 1.0; };
  g.g_l = [](int, double, double) { return -1.0; };
  g.name = "x-minus-l";
  return g;
}

TerminalData TerminalData::heat(int branches) {
  TerminalData g;
  g.branches = branches;
  g.g = [](int, double x, double) { return std::exp(-x * x); };
  g.g_x = [](int, double x, double) { return -2.0 * x * std::exp(-x * x); };
  g.g_l = [](int, double, double) { return 0.0; };
  g.name = "heat";
  return g;
}

TerminalData TerminalData::compatible_smooth(const CoefficientSet& cs, double horizon) {
  const int branches = cs.branches();
  // c_1 = 2, c_i = (1 - 2 a_1) / (1 - a_1) for i >= 2, a_1 = alpha_1(T, l).
  auto c = [&cs, horizon](int i, double l) {
    if (i == 1) return 2.0;
    const double a1 = cs.alpha(horizon, l)(0);
    return (1.0 - 2.0 * a1) / (1.0 - a1);
  };
  auto c_l = [c](int i, double l) {
    const double h = 1e-6;
    return (c(i, l + h) - c(i, std::max(0.0, l - h))) / (l + h - std::max(0.0, l - h));
  };
  TerminalData g;
  g.branches = branches;
  g.g = [c](int i, double x, double l) { return std::exp(-l) * (1.0 + c(i, l) * x * std::exp(-x)); };
  g.g_x = [c](int i, double x, double l) { return std::exp(-l) * c(i, l) * (1.0 - x) * std::exp(-x); };
  g.g_l = [c, c_l](int i, double x, double l) {
    return -std::exp(-l) * (1.0 + c(i, l) * x * std::exp(-x)) + std::exp(-l) * c_l(i, l) * x * std::exp(-x);
  };
  g.name = "compatible-smooth";
  return g;
}

TerminalData make_terminal(const std::string& name, const CoefficientSet& cs, double horizon, double c) {
  if (name == "constant") return TerminalData::constant(cs.branches(), c);
  if (name == "x-minus-l") return TerminalData::x_minus_l(cs.branches());
  if (name == "heat") return TerminalData::heat(cs.branches());
  if (name == "compatible-smooth") return TerminalData::compatible_smooth(cs, horizon);
  throw PreconditionError("unknown terminal preset '" + name +
                          "' (expected constant, x-minus-l, heat, compatible-smooth)");
}

double check_compatibility(const TerminalData& g, const CoefficientSet& cs, const PdeGrid& grid) {
  grid.validate();
  if (g.branches != cs.branches()) throw PreconditionError("terminal data and coefficients disagree on I");
  double worst = 0.0;
  for (int k = 0; k <= grid.ml; ++k) {
    const double l = grid.l(k);
    const Eigen::VectorXd a = cs.alpha(grid.horizon, l);
    double r = g.g_l(1, 0.0, l);
    for (int i = 1; i <= cs.branches(); ++i) r += a(i - 1) * g.g_x(i, 0.0, l);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

std::string to_string(OuterBoundary b) { return b == OuterBoundary::kOutflow ? "outflow" : "neumann"; }

OuterBoundary outer_boundary_from_string(const std::string& s) {
  if (s == "outflow") return OuterBoundary::kOutflow;
  if (s == "neumann") return OuterBoundary::kNeumann;
  throw PreconditionError("unknown outer boundary '" + s + "' (expected outflow or neumann)");
}

const std::vector<Eigen::MatrixXd>& PdeSolution::level(int n) const {
  const auto it = std::lower_bound(levels.begin(), levels.end(), n);
  if (it == levels.end() || *it != n) throw PreconditionError("pde solution: time level not stored");
  return u[static_cast<std::size_t>(it - levels.begin())];
}

double PdeSolution::value(int n, const JunctionPoint& p, double l) const {
  if (p.radial > grid.x_max || l < 0.0 || l > grid.l_max)
    throw PreconditionError("pde solution: point outside the grid");
  if (p.branch < 1 || p.branch > branches) throw PreconditionError("pde solution: branch out of range");
  const Eigen::MatrixXd& s = level(n)[static_cast<std::size_t>(p.branch - 1)];
  const double fx = p.radial / grid.dx(), fl = l / grid.dl();
  const int m = std::min(static_cast<int>(fx), grid.mx - 1);
  const int k = std::min(static_cast<int>(fl), grid.ml - 1);
  const double wx = fx - m, wl = fl - k;
  return (1 - wx) * (1 - wl) * s(m, k) + wx * (1 - wl) * s(m + 1, k) + (1 - wx) * wl * s(m, k + 1) +
         wx * wl * s(m + 1, k + 1);
}

namespace {

struct Tridiagonal {
  Eigen::VectorXd lower, diag, upper;  // lower(0), upper(n-1) unused
};

/// Thomas algorithm on two right-hand sides sharing one matrix.
bool thomas(const Tridiagonal& t, Eigen::VectorXd& r1, Eigen::VectorXd& r2) {
  const Eigen::Index n = t.diag.size();
  Eigen::VectorXd c(n);
  double d = t.diag(0);
  if (d == 0.0) return false;
  c(0) = t.upper(0) / d;
  r1(0) /= d;
  r2(0) /= d;
  for (Eigen::Index i = 1; i < n; ++i) {
    d = t.diag(i) - t.lower(i) * c(i - 1);
    if (d == 0.0 || !std::isfinite(d)) return false;
    c(i) = i + 1 < n ? t.upper(i) / d : 0.0;
    r1(i) = (r1(i) - t.lower(i) * r1(i - 1)) / d;
    r2(i) = (r2(i) - t.lower(i) * r2(i - 1)) / d;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    r1(i) -= c(i) * r1(i + 1);
    r2(i) -= c(i) * r2(i + 1);
  }
  return true;
}

}  // namespace

PdeSolution solve_backward(const CoefficientSet& cs, const TerminalData& g, const PdeGrid& grid,
                           const PdeOptions& opts) {
  grid.validate();
  if (g.branches != cs.branches()) throw PreconditionError("terminal data and coefficients disagree on I");
  const int I = cs.branches(), M = grid.mx, K = grid.ml;
  const double dx = grid.dx(), dl = grid.dl(), dt = grid.dt();

  PdeSolution sol;
  sol.grid = grid;
  sol.branches = I;
  sol.trace.resize(grid.mt + 1, K + 1);
  sol.compatibility_residual = check_compatibility(g, cs, grid);
  if (sol.compatibility_residual > opts.compatibility_warn) {
    std::ostringstream os;
    os << "terminal data incompatible with the transmission condition: residual " << sol.compatibility_residual;
    sol.warnings.push_back(os.str());
  }

  // Terminal level; the trace takes branch 1's value at x = 0.
  std::vector<Eigen::MatrixXd> cur(static_cast<std::size_t>(I), Eigen::MatrixXd(M + 1, K + 1));
  for (int i = 1; i <= I; ++i)
    for (int k = 0; k <= K; ++k)
      for (int m = 0; m <= M; ++m) cur[static_cast<std::size_t>(i - 1)](m, k) = g.g(i, grid.x(m), grid.l(k));
  for (int k = 0; k <= K; ++k) {
    const double v = g.g(1, 0.0, grid.l(k));
    sol.trace(grid.mt, k) = v;
    for (int i = 1; i <= I; ++i) cur[static_cast<std::size_t>(i - 1)](0, k) = v;
  }

  std::vector<std::pair<int, std::vector<Eigen::MatrixXd>>> stored;
  stored.emplace_back(grid.mt, cur);

  std::vector<Eigen::MatrixXd> A(static_cast<std::size_t>(I), Eigen::MatrixXd(M, K + 1));
  std::vector<Eigen::MatrixXd> B(static_cast<std::size_t>(I), Eigen::MatrixXd(M, K + 1));
  Eigen::MatrixXd da(I, K + 1), db(I, K + 1);
  std::vector<double> peclet(static_cast<std::size_t>(I * (K + 1)), 0.0);
  Eigen::VectorXd trace_next = sol.trace.row(grid.mt).transpose();

  for (int n = grid.mt - 1; n >= 0; --n) {
    const double t = grid.t(n);
    const std::size_t slices = static_cast<std::size_t>(I * (K + 1));
    parallel_for(slices, opts.workers, [&](std::size_t s) {
      const int i = static_cast<int>(s) / (K + 1) + 1, k = static_cast<int>(s) % (K + 1);
      const double l = grid.l(k);
      const Eigen::MatrixXd& prev = cur[static_cast<std::size_t>(i - 1)];
      Tridiagonal tri{Eigen::VectorXd::Zero(M), Eigen::VectorXd::Zero(M), Eigen::VectorXd::Zero(M)};
      Eigen::VectorXd ra(M);
      Eigen::VectorXd rb = Eigen::VectorXd::Zero(M);
      double pe = 0.0;
      for (int m = 1; m <= M; ++m) {
        const int r = m - 1;
        const double x = grid.x(m);
        const double sig = cs.sigma(i, t, x, l), b = cs.drift(i, t, x, l);
        if (!std::isfinite(sig) || !std::isfinite(b) || !(sig > 0.0)) {
          std::ostringstream os;
          os << "pde: invalid coefficient at branch " << i << ", t=" << t << ", x=" << x << ", l=" << l;
          throw NumericalError(os.str());
        }
        const double diff = 0.5 * sig * sig / (dx * dx);
        if (m < M) {
          pe = std::max(pe, std::abs(b) * dx / (sig * sig));
          tri.lower(r) = -dt * diff;
          tri.upper(r) = -dt * diff;
          tri.diag(r) = 1.0 + 2.0 * dt * diff;
          if (b > 0.0) {
            tri.diag(r) += dt * b / dx;
            tri.upper(r) -= dt * b / dx;
          } else {
            tri.diag(r) -= dt * b / dx;
            tri.lower(r) += dt * b / dx;
          }
        } else if (opts.outer == OuterBoundary::kOutflow) {
          const double bo = std::min(b, 0.0);
          tri.diag(r) = 1.0 - dt * bo / dx;
          tri.lower(r) = dt * bo / dx;
        } else {
          tri.diag(r) = 1.0 + 2.0 * dt * diff;
          tri.lower(r) = -2.0 * dt * diff;
        }
      }
      // Increment form: d = u^n - u^{n+1} solves (I - dt L) d = dt L u^{n+1},
      // assembled from differences so that constants give exactly zero.
      for (int m = 1; m <= M; ++m) {
        const int r = m - 1;
        const double up = m < M ? prev(m + 1, k) - prev(m, k) : 0.0;
        ra(r) = -(tri.lower(r) * (prev(m - 1, k) - prev(m, k)) + tri.upper(r) * up);
      }
      // Vertex value enters row 1 through the lower coefficient.
      rb(0) -= tri.lower(0);
      tri.lower(0) = 0.0;
      if (!thomas(tri, ra, rb)) {
        std::ostringstream os;
        os << "pde: tridiagonal solve failed at time index " << n << ", branch " << i << ", l index " << k;
        throw NumericalError(os.str());
      }
      A[static_cast<std::size_t>(i - 1)].col(k) = ra;
      B[static_cast<std::size_t>(i - 1)].col(k) = rb;
      const double dp = 4.0 * (prev(1, k) - prev(0, k)) - (prev(2, k) - prev(0, k));
      da(i - 1, k) = (dp + 4.0 * ra(0) - ra(1)) / (2.0 * dx);
      db(i - 1, k) = (-3.0 + 4.0 * rb(0) - rb(1)) / (2.0 * dx);
      peclet[s] = pe;
    });
    for (double p : peclet) sol.max_peclet = std::max(sol.max_peclet, p);

    // Transport of the trace in l, swept from l_max down to 0, for the
    // vertex increment delta = u0^n - u0^{n+1}.
    Eigen::VectorXd delta(K + 1);
    auto sums = [&](int k, double& sa, double& sb) {
      const Eigen::VectorXd a = cs.alpha(t, grid.l(k));
      sa = a.dot(da.col(k));
      sb = a.dot(db.col(k));
    };
    {
      double sa, sb;
      sums(K, sa, sb);
      const double slope = (trace_next(K) - trace_next(K - 1)) / dl;
      if (sb == 0.0) throw NumericalError("pde: degenerate closure at l_max");
      delta(K) = -(slope + sa) / sb;
    }
    for (int k = K - 1; k >= 0; --k) {
      double sa, sb;
      sums(k, sa, sb);
      delta(k) = (delta(k + 1) + (trace_next(k + 1) - trace_next(k)) + dl * sa) / (1.0 - dl * sb);
    }
    const Eigen::VectorXd u0 = trace_next + delta;
    if (!u0.allFinite()) {
      std::ostringstream os;
      os << "pde: non-finite vertex trace at time index " << n;
      throw NumericalError(os.str());
    }
    for (int i = 1; i <= I; ++i) {
      Eigen::MatrixXd& c = cur[static_cast<std::size_t>(i - 1)];
      c.bottomRows(M) += A[static_cast<std::size_t>(i - 1)] + B[static_cast<std::size_t>(i - 1)] * delta.asDiagonal();
      c.row(0) = u0.transpose();
    }
    sol.trace.row(n) = u0.transpose();
    trace_next = u0;
    if (opts.keep_history || n == 0) stored.emplace_back(n, cur);
  }

  if (sol.max_peclet > opts.peclet_warn) {
    std::ostringstream os;
    os << "cell Peclet number " << sol.max_peclet << " exceeds " << opts.peclet_warn;
    sol.warnings.push_back(os.str());
  }
  std::reverse(stored.begin(), stored.end());
  for (auto& [n, slices] : stored) {
    sol.levels.push_back(n);
    sol.u.push_back(std::move(slices));
  }
  return sol;
}

FkReport feynman_kac_compare(const PdeSolution& sol, const CoefficientSet& cs, const TerminalData& g,
                             const SpiderState& init, SchemeConfig mc, std::size_t paths, double z,
                             double range_fraction) {
  if (init.t != 0.0) throw PreconditionError("feynman_kac_compare: initial time must be 0");
  if (init.point.radial > sol.grid.x_max || init.l > sol.grid.l_max)
    throw PreconditionError("feynman_kac_compare: initial state outside the pde grid");
  FkReport rep;
  rep.pde = sol.value(0, init.point, init.l);

  mc.horizon = sol.grid.horizon;
  mc.record_every = static_cast<int>(mc.total_steps());
  const PathEnsemble ens = simulate_ensemble(cs, init, mc, paths);
  const Eigen::Index last = ens.times.size() - 1;
  double sum = 0.0, sum2 = 0.0;
  std::size_t used = 0;
  for (std::size_t p = 0; p < ens.paths(); ++p) {
    if (!ens.valid[p]) continue;
    const auto r = static_cast<Eigen::Index>(p);
    const double v = g.g(ens.branch(r, last), ens.x(r, last), ens.l(r, last));
    sum += v;
    sum2 += v * v;
    ++used;
  }
  if (used < 2) throw NumericalError("feynman_kac_compare: fewer than two valid paths");
  rep.paths = used;
  rep.failed = ens.paths() - used;
  rep.mc = sum / static_cast<double>(used);
  const double var = std::max(0.0, (sum2 - static_cast<double>(used) * rep.mc * rep.mc) / static_cast<double>(used - 1));
  rep.se = std::sqrt(var / static_cast<double>(used));

  const std::vector<Eigen::MatrixXd>& terminal = sol.level(sol.grid.mt);
  double lo = terminal[0].minCoeff(), hi = terminal[0].maxCoeff();
  for (const auto& s : terminal) {
    lo = std::min(lo, s.minCoeff());
    hi = std::max(hi, s.maxCoeff());
  }
  rep.g_range = hi - lo;
  rep.discrepancy = std::abs(rep.pde - rep.mc);
  rep.tolerance = z * rep.se + range_fraction * rep.g_range;
  rep.pass = rep.discrepancy <= rep.tolerance;
  return rep;
}

}  // namespace spider
