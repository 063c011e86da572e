// Skew SDE on the real line whose skewness depends on the local time at 0,
// and its correspondence with the two-branch spider (branch 2 is y > 0).
#pragma once

#include <functional>

#include <Eigen/Dense>
#include <json.hpp>

#include "spider/junction.hpp"
#include "spider/simulator.hpp"

namespace spider {

struct SkewCoefficients {
  using Fn = std::function<double(double t, double y, double l)>;
  using VertexFn = std::function<double(double t, double l)>;

  Fn sigma;           // sigma~(t, y, l)
  Fn drift;           // b~(t, y, l)
  VertexFn sigma_plus;   // sigma~(t, 0+, l)
  VertexFn sigma_minus;  // sigma~(t, 0-, l)
  VertexFn alpha;        // in (0, 1)
  double a_lower = 0.0;
  double sigma_lower = 0.0;
  double sigma_upper = 1.0;  // sup sigma~
  double lip_b = 1.0, lip_sigma = 1.0, lip_alpha = 1.0;
};

/// Piecewise-constant sigma~ and b~ on each half-line and constant alpha.
SkewCoefficients constant_skew(double alpha, double sigma_plus = 1.0, double sigma_minus = 1.0,
                               double drift_plus = 0.0, double drift_minus = 0.0);

/// {"family": "skew-constant", "alpha": 0.3, "sigma_plus": 1, "sigma_minus": 1,
///  "drift_plus": 0, "drift_minus": 0}
SkewCoefficients make_skew_preset(const nlohmann::json& spec);
nlohmann::json normalize_skew_preset(const nlohmann::json& spec);

double beta(double s, double l, const SkewCoefficients& sk);

/// Two-branch spider data: sigma_2(x) = sigma~(x), sigma_1(x) = sigma~(-x),
/// b_2(x) = b~(x), b_1(x) = -b~(-x), alpha_2 = alpha sigma~(0+) / (alpha sigma~(0+) + (1 - alpha) sigma~(0-)).
CoefficientSet to_spider(const SkewCoefficients& sk);

/// Inverse of to_spider for two-branch data, using sigma_i(t, 0, l) as the one-sided limits.
SkewCoefficients from_spider(const CoefficientSet& cs);

struct SkewPath {
  Eigen::VectorXd times, y, l;
  Eigen::VectorXi branch;
};

SkewPath to_signed(const SpiderPath& p);

SkewPath simulate_skew(const SkewCoefficients& sk, double y0, const SchemeConfig& cfg);

struct SkewEnsemble {
  PathEnsemble spider;
  Eigen::MatrixXd y;  // paths x nodes, (2 i - 3) x
};

SkewEnsemble simulate_skew_ensemble(const SkewCoefficients& sk, double y0, const SchemeConfig& cfg,
                                    std::size_t paths);

}  // namespace spider
