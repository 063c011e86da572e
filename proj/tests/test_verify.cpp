#include <doctest.h>

#include <cmath>

#include "spider/presets.hpp"
#include "spider/rng.hpp"
#include "spider/verify.hpp"

using namespace spider;

namespace {

SpiderState vertex() { return {0.0, JunctionPoint(1, 0.0), 0.0}; }

SchemeConfig config(int n_freeze, int n_fine, std::uint64_t seed, CrossingMode mode = CrossingMode::kGridTouch) {
  SchemeConfig c;
  c.n_freeze = n_freeze;
  c.n_fine = n_fine;
  c.seed = seed;
  c.crossing = mode;
  return c;
}

}  // namespace

TEST_CASE("V^f of a constant is identically zero") {
  const CoefficientSet cs = brownian_spider(3, AlphaMode::kLDependent);
  const PathEnsemble ens = simulate_ensemble(cs, vertex(), config(16, 16, 1), 20);
  for (std::size_t k = 0; k < ens.paths(); ++k) CHECK(vf_along_path(ens.path(k), cs, TestFunction::constant(3.5)).isZero(0.0));
}

TEST_CASE("V^x is the driving martingale when b = 0") {
  const CoefficientSet cs = brownian_spider(3, AlphaMode::kLDependent);
  const PathEnsemble ens = simulate_ensemble(cs, {0.0, JunctionPoint(2, 0.3), 0.0}, config(16, 16, 2), 20);
  for (std::size_t k = 0; k < ens.paths(); ++k) {
    const SpiderPath p = ens.path(k);
    const Eigen::VectorXd v = vf_along_path(p, cs, TestFunction::linear());
    const Eigen::VectorXd y = p.x.array() - p.x(0) - p.l.array();
    CHECK((v - y).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("V^f is linear in f and blind to constants") {
  const CoefficientSet cs = make_preset({{"family", "affine-in-l"},
                                        {"sigma", {1.0, 1.4}},
                                        {"sigma_slope", {0.1, 0.0}},
                                        {"drift", {0.2, -0.2}},
                                        {"alpha", {0.4, 0.6}},
                                        {"alpha_slope", {0.05, -0.05}}});
  const PathEnsemble ens = simulate_ensemble(cs, vertex(), config(16, 16, 3), 10);
  const TestFunction f = TestFunction::quadratic(), g = TestFunction::branch_bump({1.0, -0.5});
  const TestFunction h = TestFunction::combine(1.5, f, -2.0, g);
  const TestFunction shifted = TestFunction::combine(1.0, f, 1.0, TestFunction::constant(4.0));
  for (std::size_t k = 0; k < ens.paths(); ++k) {
    const SpiderPath p = ens.path(k);
    const Eigen::VectorXd lhs = vf_along_path(p, cs, h);
    const Eigen::VectorXd rhs = 1.5 * vf_along_path(p, cs, f) - 2.0 * vf_along_path(p, cs, g);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((vf_along_path(p, cs, shifted) - vf_along_path(p, cs, f)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("streaming V^f agrees with the stored-path computation") {
  const CoefficientSet cs = brownian_spider(2, AlphaMode::kLDependent);
  const SchemeConfig c = config(8, 8, 4);
  const std::vector<double> times = {0.0, 0.25, 0.5, 1.0};
  VfFunctional fn(cs, {TestFunction::quadratic(), TestFunction::branch_bump({1.0, -1.0})}, times, vertex(), c);
  EnsembleFunctional* list[] = {&fn};
  const PathEnsemble ens = simulate_ensemble(cs, vertex(), c, 30, list);
  const VfTable streamed = fn.table(ens.valid);
  const VfTable stored = vf_table(ens, cs, {TestFunction::quadratic(), TestFunction::branch_bump({1.0, -1.0})}, times);
  for (std::size_t q = 0; q < 2; ++q) CHECK((streamed.v[q] - stored.v[q]).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(streamed.x == stored.x);
  CHECK_THROWS_AS(VfFunctional(cs, {TestFunction::linear()}, {0.3}, vertex(), c), PreconditionError);
}

TEST_CASE("martingale test: constants, x^2 and a negative control") {
  const CoefficientSet cs = brownian_spider(2, AlphaMode::kGiven, {0.25, 0.75});
  const SchemeConfig c = config(64, 8, 5, CrossingMode::kBridgeLocalTime);
  const std::vector<double> times = {0.25, 0.5, 0.75};
  const std::vector<std::pair<double, double>> pairs = {{0.25, 0.5}, {0.25, 0.75}, {0.5, 0.75}};
  const TestFunction bump = TestFunction::branch_bump({1.0, -1.0});
  VfFunctional good(cs, {TestFunction::constant(2.0), TestFunction::quadratic(), bump}, times, vertex(), c);
  VfOptions swapped;
  swapped.alpha_override = [](double, double, std::span<double> a) {
    a[0] = 0.75;
    a[1] = 0.25;
  };
  VfFunctional bad(cs, {bump}, times, vertex(), c, swapped);
  EnsembleFunctional* list[] = {&good, &bad};
  const PathEnsemble ens = simulate_ensemble(cs, vertex(), c, 20000, list, false);

  const MartingaleSummary s = martingale_test(good.table(ens.valid), pairs, default_weights());
  CHECK(s.tests == 27);
  CHECK(s.bonferroni_z > 3.0);
  for (const auto& e : s.reports[0].entries) {
    CHECK(e.mean == 0.0);
    CHECK(e.se == 0.0);
  }
  CHECK(s.pass);
  const MartingaleSummary n = martingale_test(bad.table(ens.valid), pairs, default_weights());
  CHECK_FALSE(n.pass);
}

TEST_CASE("non-stickiness curve on reflected Brownian motion") {
  const std::vector<double> eps = {0.01, 0.02, 0.04, 0.08};
  OccupationFunctional occ(eps);
  EnsembleFunctional* list[] = {&occ};
  const SchemeConfig c = config(256, 16, 6, CrossingMode::kBridgeLocalTime);
  const PathEnsemble ens = simulate_ensemble(brownian_spider(3), vertex(), c, 5000, list, false);
  const NonStickinessCurve curve = non_stickiness_curve(occ.values(), eps, 1.0, ens.valid);
  CHECK(curve.r2 >= 0.99);
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double oracle = gaussian_occupation(eps[k], 1.0, c.total_steps());
    CHECK(std::abs(curve.mean[k] - oracle) <= 3.0 * curve.se[k]);
  }
  // An eps beyond every path's range is excluded from the fit.
  const NonStickinessCurve big = non_stickiness_curve(Eigen::MatrixXd::Constant(10, 1, 1.0), {50.0}, 1.0);
  CHECK(big.mean[0] == 1.0);
  CHECK_FALSE(big.fitted[0]);
}

TEST_CASE("self-convergence of the freezing scheme") {
  const SpiderState start = vertex();
  SchemeConfig base = config(4, 64, 7, CrossingMode::kBridgeLocalTime);
  const SelfConvergence flat = self_convergence(brownian_spider(2, AlphaMode::kGiven, {0.3, 0.7}), start, base, 3, 600);
  for (double d : flat.distance) CHECK(d <= flat.noise_floor);

  const CoefficientSet steep = brownian_spider(2, AlphaMode::kLDependent, {}, 0.1, 0.8);
  const SelfConvergence sc = self_convergence(steep, start, base, 3, 1500);
  CHECK(sc.distance.size() == 3);
  CHECK(sc.monotone);

  SchemeConfig c = base;
  c.record_every = static_cast<int>(c.total_steps());
  const auto a = terminal_samples(simulate_ensemble(brownian_spider(2, AlphaMode::kGiven, {0.2, 0.8}), start, c, 600));
  const auto b = terminal_samples(simulate_ensemble(brownian_spider(2, AlphaMode::kGiven, {0.8, 0.2}), start, c, 600));
  CHECK(energy_distance(a, b) > 5.0 * flat.noise_floor);
}

TEST_CASE("statistics helpers") {
  const Estimate e = mean_se(Eigen::Vector4d(1, 2, 3, 4));
  CHECK(e.mean == 2.5);
  CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(kolmogorov_q(0.0) == 1.0);
  CHECK(kolmogorov_q(1.36) == doctest::Approx(0.049).epsilon(0.02));
  RandomStream rng(9, 0);
  std::vector<double> u;
  for (int k = 0; k < 2000; ++k) u.push_back(rng.uniform());
  CHECK(ks_one_sample(u, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value > 0.01);
  CHECK(ks_one_sample(u, [](double x) { return std::clamp(x * x, 0.0, 1.0); }).p_value < 1e-6);
  CHECK(gaussian_occupation(0.05, 1.0) == doctest::Approx(0.0781).epsilon(0.02));
}
