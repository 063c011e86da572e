// Transition kernels of the Brownian spider (sigma == 1, b == 0) whose
// spinning measure depends on time and on the vertex local time.
//
// The law of (branch, radial, local-time increment) at time t is a mixed
// measure: a density q(y, j, ell) in (y, ell) on every branch, plus, for a
// source away from the vertex, an atom on {ell = 0, j = source branch}
// carrying the paths that never reach the vertex.
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spider/junction.hpp"
#include "spider/quadrature.hpp"

namespace spider {

/// Two candidate forms of the joint density of (|W_t|, L_t, G_t), G_t the
/// last zero before t.
enum class TripleDensityVariant {
  /// 2 ell / sqrt(2 pi s^3) exp(-ell^2 / 2s) * x / sqrt(2 pi (t-s)^3) exp(-x^2 / 2(t-s)).
  /// Integrates to one.
  kLocalTimeWeighted,
  /// Same without the ell factor. Its s-marginal is not integrable at s = 0.
  kUnweighted,
};

/// Time argument of alpha in the kernel from the vertex.
enum class AlphaTimeConvention {
  kLastZero,    // alpha_j(s + u, l + ell): time of the last vertex visit
  kSourceTime,  // alpha_j(s, l + ell): source time
};

std::string to_string(TripleDensityVariant v);
std::string to_string(AlphaTimeConvention c);

/// g(x, ell, s) for horizon t; zero outside x, ell > 0, 0 < s <= t.
double triple_density(double x, double ell, double s, double t,
                      TripleDensityVariant variant = TripleDensityVariant::kLocalTimeWeighted);

/// Density of the first hitting time of 0 from x > 0.
double first_passage_density(double x, double u);

/// Heat kernel on (0, inf) killed at 0.
double killed_heat_kernel(double x, double y, double tau);

struct KernelOptions {
  TripleDensityVariant variant = TripleDensityVariant::kLocalTimeWeighted;
  AlphaTimeConvention convention = AlphaTimeConvention::kLastZero;
  double inner_tol = 1e-8;  // absolute, per inner integral
  double entry_tol = 1e-6;  // absolute, per kernel entry / mass
};

struct KernelMass {
  double value = 0.0;
  double error = 0.0;  // quadrature error estimate plus truncated tails
};

class SpiderKernel {
 public:
  SpiderKernel(const CoefficientSet& cs, double s, JunctionPoint source, double l, double t, KernelOptions opts);

  int branches() const { return branches_; }
  double source_time() const { return s_; }
  double target_time() const { return t_; }
  const JunctionPoint& source() const { return source_; }
  double source_local_time() const { return l_; }
  const KernelOptions& options() const { return opts_; }
  bool from_vertex() const { return source_.radial == 0.0; }

  /// Continuous part q(y, j, ell), per unit y and unit ell.
  double density(double y, int j, double ell) const;
  /// Atom part on {ell = 0}, per unit y.
  double atom(double y, int j) const;
  /// Density of the (y, j) marginal with ell integrated out.
  double marginal_density(double y, int j) const;

  /// Mass of the continuous part on [y0, y1] x [ell0, ell1] for branch j.
  KernelMass continuous_mass(int j, double y0, double y1, double ell0, double ell1) const;
  /// Mass of the atom on [y0, y1] (zero unless j is the source branch).
  KernelMass atom_mass(int j, double y0 = 0.0, double y1 = -1.0) const;
  /// Box mass including the atom when ell0 == 0.
  KernelMass box_mass(int j, double y0, double y1, double ell0, double ell1) const;
  /// Total mass (atom plus continuous, over the truncated domain) per branch.
  KernelMass branch_mass(int j) const;
  KernelMass total_mass() const;

  /// Truncation radius used for y and ell in whole-domain masses.
  double truncation() const;

 private:
  double alpha_j(int j, double time, double local) const;
  double ell_factor(double ell, double v) const;
  double y_factor(double y, double r) const;
  double ell_factor_mass(int j, double v, double time_shift, double ell0, double ell1, bool last_zero_time) const;
  double y_factor_mass(double r, double y0, double y1) const;

  const CoefficientSet* cs_;
  int branches_;
  double s_, t_, l_;
  JunctionPoint source_;
  KernelOptions opts_;
};

SpiderKernel kernel_from_junction(const CoefficientSet& cs, double s, double l, double t, KernelOptions opts = {});
SpiderKernel kernel_general(const CoefficientSet& cs, double s, JunctionPoint source, double l, double t,
                            KernelOptions opts = {});

struct BranchMarginal {
  Eigen::VectorXd mass;   // per branch, index 0 is branch 1
  Eigen::VectorXd error;  // per branch error budget
  double total() const { return mass.sum(); }
};

BranchMarginal branch_marginal(const SpiderKernel& kernel);

/// Normalization of the triple density over (0, xmax) x (0, lmax) x (s_min, t).
/// For the unweighted variant the result grows without bound as s_min -> 0.
KernelMass triple_density_mass(double t, TripleDensityVariant variant, double s_min = 0.0);

}  // namespace spider
