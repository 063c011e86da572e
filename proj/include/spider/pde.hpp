// Backward parabolic system on the star graph with the local-time Kirchhoff
// condition at the vertex:
//
//   d_t u_i + 1/2 sigma_i^2 d_xx u_i + b_i d_x u_i = 0     on each branch,
//   u_i(t, 0, l) = u0(t, l)                                  (continuity),
//   d_l u0(t, l) + sum_i alpha_i(t, l) d_x u_i(t, 0+, l) = 0 (transmission),
//   u_i(T, x, l) = g_i(x, l).
#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spider/junction.hpp"
#include "spider/simulator.hpp"

namespace spider {

struct PdeGrid {
  double x_max = 6.0;
  double l_max = 5.0;
  double horizon = 1.0;
  int mx = 200;
  int ml = 100;
  int mt = 100;

  double dx() const { return x_max / mx; }
  double dl() const { return l_max / ml; }
  double dt() const { return horizon / mt; }
  double x(int m) const { return x_max * m / mx; }
  double l(int k) const { return l_max * k / ml; }
  double t(int n) const { return horizon * n / mt; }
  void validate() const;
};

/// Terminal data g_i(x, l) with its x and l derivatives.
struct TerminalData {
  using Fn = std::function<double(int branch, double x, double l)>;
  int branches = 2;
  Fn g, g_x, g_l;
  std::string name = "custom";

  static TerminalData constant(int branches, double c);
  /// g_i(x, l) = x - l.
  static TerminalData x_minus_l(int branches);
  /// g_i(x, l) = exp(-x^2): d_x g(0) = 0 on every branch.
  static TerminalData heat(int branches);
  /// exp(-l) (1 + c_i(l) x exp(-x)) with c_1 = 2 and the other c_i chosen so
  /// that sum_i alpha_i(T, l) c_i(l) = 1 (compatible at the horizon T).
  static TerminalData compatible_smooth(const CoefficientSet& cs, double horizon);
};

/// Builds terminal data from a preset name: constant, x-minus-l, heat,
/// compatible-smooth.
TerminalData make_terminal(const std::string& name, const CoefficientSet& cs, double horizon, double c = 1.0);

/// max over l-nodes of |d_l g(0, l) + sum_i alpha_i(T, l) d_x g_i(0, l)|.
double check_compatibility(const TerminalData& g, const CoefficientSet& cs, const PdeGrid& grid);

enum class OuterBoundary {
  /// u_M solves d_t u + b d_x u = 0 with a backward difference (exact for
  /// data linear in x).
  kOutflow,
  /// Homogeneous Neumann via a reflected ghost node.
  kNeumann,
};

std::string to_string(OuterBoundary b);
OuterBoundary outer_boundary_from_string(const std::string& s);

struct PdeOptions {
  OuterBoundary outer = OuterBoundary::kOutflow;
  double compatibility_warn = 1e-6;
  double peclet_warn = 2.0;
  bool keep_history = true;  // keep every time level, otherwise t = 0 and T only
  int workers = 1;
};

struct PdeSolution {
  PdeGrid grid;
  int branches = 0;
  std::vector<int> levels;                  // stored time indices, ascending
  std::vector<std::vector<Eigen::MatrixXd>> u;  // [level][branch - 1], (mx+1) x (ml+1)
  Eigen::MatrixXd trace;                    // (mt+1) x (ml+1), u0(t_n, l_k)
  double compatibility_residual = 0.0;
  double max_peclet = 0.0;
  std::vector<std::string> warnings;

  /// Stored slice at time index n (throws if n was not kept).
  const std::vector<Eigen::MatrixXd>& level(int n) const;
  /// Bilinear interpolation in (x, l) at time index n.
  double value(int n, const JunctionPoint& p, double l) const;
};

PdeSolution solve_backward(const CoefficientSet& cs, const TerminalData& g, const PdeGrid& grid,
                           const PdeOptions& opts = {});

struct FkReport {
  double pde = 0.0;
  double mc = 0.0;
  double se = 0.0;
  double discrepancy = 0.0;
  double g_range = 0.0;
  double tolerance = 0.0;  // 3 se + 0.02 range(g)
  std::size_t paths = 0;
  std::size_t failed = 0;
  bool pass = false;
};

/// Compares u(0, init) with the Monte Carlo mean of g at the horizon.
FkReport feynman_kac_compare(const PdeSolution& sol, const CoefficientSet& cs, const TerminalData& g,
                             const SpiderState& init, SchemeConfig mc, std::size_t paths, double z = 3.0,
                             double range_fraction = 0.02);

}  // namespace spider
