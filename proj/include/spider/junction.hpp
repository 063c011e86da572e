// Star-graph domain types: junction points, spider states and paths,
// coefficient sets with declared bounds, and test functions.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spider {

/// Radial positions at or below this value count as "at the junction".
inline constexpr double kZeroTol = 1e-12;

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point (x, i) of the star graph. Branch labels are 1-based; all labels
/// at radial 0 denote the same vertex.
struct JunctionPoint {
  int branch = 1;
  double radial = 0.0;

  JunctionPoint() = default;
  JunctionPoint(int branch_label, double r) : branch(branch_label), radial(r) {
    if (!(r >= 0.0)) throw PreconditionError("JunctionPoint: radial must be >= 0");
    if (branch_label < 1) throw PreconditionError("JunctionPoint: branch labels start at 1");
  }

  bool at_vertex(double tol = kZeroTol) const { return radial <= tol; }

  friend bool operator==(const JunctionPoint& p, const JunctionPoint& q) {
    if (p.radial == 0.0 && q.radial == 0.0) return true;
    return p.branch == q.branch && p.radial == q.radial;
  }
};

/// Graph distance: |x - y| on a common branch, x + y across branches.
double distance(const JunctionPoint& p, const JunctionPoint& q);

struct SpiderState {
  double t = 0.0;
  JunctionPoint point;
  double l = 0.0;  // local time at the vertex
};

/// Discrete trajectory on a strictly increasing time grid.
struct SpiderPath {
  Eigen::VectorXd times;
  Eigen::VectorXd x;
  Eigen::VectorXi branch;
  Eigen::VectorXd l;

  Eigen::Index size() const { return times.size(); }
  SpiderState state(Eigen::Index k) const {
    return SpiderState{times[k], JunctionPoint(branch[k], x[k]), l[k]};
  }
  static SpiderPath single(const SpiderState& s);
};

/// Result of checking the SpiderPath invariants.
struct PathCheck {
  bool ok = true;
  std::string message;
};

PathCheck check_path(const SpiderPath& path, double zero_tol = kZeroTol);

// ---------------------------------------------------------------------------
// Coefficients

using BranchFn = std::function<double(int branch, double t, double x, double l)>;
/// Writes alpha_1..alpha_I into out[0..I-1].
using SpinningFn = std::function<void(double t, double l, std::span<double> out)>;

/// Declared constants of the regularity assumption. lip_b bounds
/// sup|b| plus the t, x and l Lipschitz constants of b (same for sigma);
/// lip_alpha bounds the t and l Lipschitz constants of alpha.
struct CoefficientBounds {
  double a_lower = 0.0;
  double sigma_lower = 0.0;
  double lip_b = 1.0;
  double lip_sigma = 1.0;
  double lip_alpha = 1.0;
};

/// Per-branch volatility and drift plus the spinning measure. Evaluation
/// must be pure: the simulator calls these concurrently.
class CoefficientSet {
 public:
  CoefficientSet(int branches, BranchFn sigma, BranchFn drift, SpinningFn alpha,
                 CoefficientBounds bounds, std::string name = "custom");

  int branches() const { return branches_; }
  const CoefficientBounds& bounds() const { return bounds_; }
  const std::string& name() const { return name_; }

  double sigma(int i, double t, double x, double l) const { return sigma_(i, t, x, l); }
  double drift(int i, double t, double x, double l) const { return drift_(i, t, x, l); }
  void alpha(double t, double l, std::span<double> out) const { alpha_(t, l, out); }
  Eigen::VectorXd alpha(double t, double l) const;

  /// Declared sigma == 1 and b == 0 on every branch (required by the exact
  /// Brownian kernels).
  bool brownian = false;

 private:
  int branches_;
  BranchFn sigma_;
  BranchFn drift_;
  SpinningFn alpha_;
  CoefficientBounds bounds_;
  std::string name_;
};

/// Sampling window for randomized validation.
struct ValidationWindow {
  double t_max = 1.0;
  double x_max = 5.0;
  double l_max = 5.0;
};

struct Violation {
  std::string condition;  // "(A)", "(E)", "simplex", "(R) lip_b", ...
  int branch = 0;         // 0 when not branch specific
  double t = 0, x = 0, l = 0;
  double value = 0;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::size_t samples = 0;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_coefficients(const CoefficientSet& cs, std::size_t sample_budget,
                                       std::uint64_t seed, const ValidationWindow& window = {});

// ---------------------------------------------------------------------------
// Test functions f_i(t, x) on the junction.

using TestFn = std::function<double(int branch, double t, double x)>;

struct TestFunction {
  std::string id;
  TestFn f, f_t, f_x, f_xx;

  static TestFunction constant(double c);
  static TestFunction linear();     // f_i = x
  static TestFunction quadratic();  // f_i = x^2
  /// f_i(t, x) = cos(t) + w_i x exp(-x^2/2); continuous at the vertex.
  static TestFunction branch_bump(std::vector<double> weights);
  /// a f + b g
  static TestFunction combine(double a, const TestFunction& f, double b, const TestFunction& g);
};

struct ContinuityCheck {
  bool ok = true;
  double max_gap = 0.0;
};

ContinuityCheck check_junction_continuity(const TestFunction& f, int branches,
                                          std::span<const double> t_samples, double tol);

}  // namespace spider
