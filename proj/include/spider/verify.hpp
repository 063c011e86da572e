// Statistical checks of the defining properties of the spider diffusion:
// martingale increments of V^f, non-stickiness at the vertex and
// self-convergence of the frozen-coefficient scheme.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spider/junction.hpp"
#include "spider/simulator.hpp"

namespace spider {

struct VfOptions {
  /// Evaluate sigma, b and alpha at the frozen (knot) arguments of the
  /// scheme instead of the current time and local time. Only meaningful for
  /// streaming evaluation, where the knots are known.
  bool frozen = false;
  /// Replaces alpha inside the dl integral (negative controls).
  SpinningFn alpha_override;
};

/// V^f(t_k) along a recorded path with left-endpoint sums:
/// V^f(s) = f_{i(s)}(s, x(s)) - f(t_0, x_0) - sum [f_t + 1/2 sigma^2 f_xx + b f_x] dt
///          - sum_j sum_k alpha_j(t_k, l_k) f_x,j(t_k, 0) dl_k.
Eigen::VectorXd vf_along_path(const SpiderPath& path, const CoefficientSet& cs, const TestFunction& f,
                              const VfOptions& opts = {});

/// V^f for several test functions and the state (x, branch, l), sampled at
/// chosen times. Rows are paths.
struct VfTable {
  std::vector<double> times;
  std::vector<std::string> ids;
  std::vector<Eigen::MatrixXd> v;  // per test function, paths x times
  Eigen::MatrixXd x, l;
  Eigen::MatrixXi branch;
  std::vector<char> valid;
};

/// Builds the table from stored paths (left endpoints on the recorded grid).
VfTable vf_table(const PathEnsemble& ens, const CoefficientSet& cs, const std::vector<TestFunction>& fs,
                 const std::vector<double>& times, const VfOptions& opts = {});

/// Streaming V^f at fine-step resolution; use with simulate_ensemble.
class VfFunctional final : public EnsembleFunctional {
 public:
  VfFunctional(const CoefficientSet& cs, std::vector<TestFunction> fs, std::vector<double> times,
               const SpiderState& init, const SchemeConfig& cfg, VfOptions opts = {});
  void prepare(std::size_t paths, Eigen::Index nodes) override;
  std::unique_ptr<PathObserver> observer(std::size_t path) override;
  /// Table after simulation; `valid` must come from the ensemble.
  VfTable table(const std::vector<char>& valid) const;

 private:
  class Observer;
  const CoefficientSet* cs_;
  std::vector<TestFunction> fs_;
  std::vector<double> times_;
  std::vector<long> steps_;  // fine step count at each sampled time
  VfOptions opts_;
  std::vector<Eigen::MatrixXd> v_;
  Eigen::MatrixXd x_, l_;
  Eigen::MatrixXi branch_;
};

struct Weight {
  std::string name;
  std::function<double(double x, int branch, double l)> phi;
};

/// phi_s in {1, x(s), sin(l(s))}.
std::vector<Weight> default_weights();

struct MartingaleEntry {
  double s = 0.0, u = 0.0;
  std::string weight;
  double mean = 0.0, se = 0.0, z = 0.0;
  bool pass = false;  // |mean| <= z_level se
};

struct MartingaleReport {
  std::string id;
  std::vector<MartingaleEntry> entries;
  double z_level = 3.0;
  bool pass = false;
};

struct MartingaleSummary {
  std::vector<MartingaleReport> reports;
  std::size_t tests = 0;
  double family_alpha = 0.0;  // two-sided family-wise level
  double bonferroni_z = 0.0;
  double max_abs_z = 0.0;
  bool pass = false;  // every |z| <= bonferroni_z
};

/// Estimates E[phi_s (V^f(u) - V^f(s))] for every function, pair and weight.
/// The family-wise level is that of a single two-sided z_level test, split
/// evenly (Bonferroni) over all tests.
MartingaleSummary martingale_test(const VfTable& table, const std::vector<std::pair<double, double>>& pairs,
                                  const std::vector<Weight>& weights, double z_level = 3.0);

/// Left-endpoint occupation time of [0, eps) at fine-step resolution.
class OccupationFunctional final : public EnsembleFunctional {
 public:
  explicit OccupationFunctional(std::vector<double> eps);
  void prepare(std::size_t paths, Eigen::Index nodes) override;
  std::unique_ptr<PathObserver> observer(std::size_t path) override;
  const Eigen::MatrixXd& values() const { return occ_; }  // paths x eps
  const std::vector<double>& eps() const { return eps_; }

 private:
  class Observer;
  std::vector<double> eps_;
  Eigen::MatrixXd occ_;
};

/// E int_0^T 1{|W_t| < eps} dt for Brownian motion from 0; with steps > 0
/// the left-endpoint Riemann sum on `steps` equal cells, otherwise the integral.
double gaussian_occupation(double eps, double horizon, long steps = 0);

struct NonStickinessCurve {
  std::vector<double> eps, mean, se;
  std::vector<char> fitted;  // false when every path spent all its time below eps
  double slope = 0.0;        // least squares through the origin
  double r2 = 0.0;
  double max_ratio = 0.0;    // max mean / eps over fitted points
};

NonStickinessCurve non_stickiness_curve(const Eigen::MatrixXd& occupation, const std::vector<double>& eps,
                                        double horizon, const std::vector<char>& valid = {});

struct MarginalSample {
  double x;
  int branch;
  double l;
};

/// Energy distance under the metric d((x,i,l),(y,j,l')) = d_J + |l - l'|.
double energy_distance(const std::vector<MarginalSample>& a, const std::vector<MarginalSample>& b);

std::vector<MarginalSample> terminal_samples(const PathEnsemble& ens);

struct SelfConvergence {
  std::vector<int> n_freeze;        // level k compares n_freeze[k] with n_freeze[k+1]
  std::vector<double> distance;     // energy distance between successive levels
  std::vector<double> freq_gap;     // max branch-frequency gap
  std::vector<double> freq_gap_se;  // its standard error
  double noise_floor = 0.0;         // distance between two independent replicates
  bool monotone = false;
};

/// Doubles n_freeze `doublings` times with the fine step held fixed
/// (n_fine halves), so successive levels share their Gaussian increments.
SelfConvergence self_convergence(const CoefficientSet& cs, const SpiderState& init, const SchemeConfig& base,
                                 int doublings, std::size_t paths);

// ---------------------------------------------------------------------------
// Small statistics helpers.

Estimate mean_se(const Eigen::Ref<const Eigen::VectorXd>& v);

/// Asymptotic Kolmogorov survival function Q(lambda).
double kolmogorov_q(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

}  // namespace spider
