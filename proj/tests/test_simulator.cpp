#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "spider/presets.hpp"
#include "spider/simulator.hpp"
#include "spider/skorokhod.hpp"

using namespace spider;

namespace {

SchemeConfig config(int n_freeze, int n_fine, std::uint64_t seed, CrossingMode mode = CrossingMode::kGridTouch) {
  SchemeConfig c;
  c.n_freeze = n_freeze;
  c.n_fine = n_fine;
  c.seed = seed;
  c.crossing = mode;
  return c;
}

SpiderState vertex() { return {0.0, JunctionPoint(1, 0.0), 0.0}; }

}  // namespace

TEST_CASE("freezing grid") {
  const FreezingGrid g(0.0, 1.0, 4);
  CHECK(g.eta(0.0) == 0.0);
  CHECK(g.eta(0.3) == 0.25);
  CHECK(g.eta(0.25) == 0.25);
  CHECK(g.eta(0.999) == 0.75);
  for (double u : {0.1, 0.5, 0.77}) CHECK(g.eta(u) <= u);
  CHECK_THROWS_AS(FreezingGrid(0.0, 1.0, 0), PreconditionError);
}

TEST_CASE("config validation and crossing names") {
  SchemeConfig c;
  c.n_fine = 0;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  for (auto m : {CrossingMode::kGridTouch, CrossingMode::kBridgeCorrected, CrossingMode::kBridgeLocalTime})
    CHECK(crossing_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(crossing_mode_from_string("teleport"), PreconditionError);
}

TEST_CASE("zero horizon returns the initial state") {
  SchemeConfig c;
  c.horizon = 0.0;
  const SpiderState s{0.0, JunctionPoint(2, 1.5), 0.3};
  const SpiderPath p = simulate_path(brownian_spider(2), s, c);
  REQUIRE(p.size() == 1);
  CHECK(p.state(0).point == s.point);
  CHECK(p.l(0) == 0.3);
}

TEST_CASE("ensemble determinism and seed derivation") {
  const CoefficientSet cs = brownian_spider(3, AlphaMode::kLDependent);
  SchemeConfig c = config(16, 8, 42);
  c.workers = 1;
  const PathEnsemble a = simulate_ensemble(cs, vertex(), c, 10);
  c.workers = 3;
  const PathEnsemble b = simulate_ensemble(cs, vertex(), c, 10);
  const PathEnsemble small = simulate_ensemble(cs, vertex(), c, 4);
  CHECK(a.x == b.x);
  CHECK(a.l == b.l);
  CHECK(a.branch == b.branch);
  CHECK(small.x == a.x.topRows(4));
  CHECK(std::set<std::uint64_t>(a.seeds.begin(), a.seeds.end()).size() == 10);

  SchemeConfig one = c;
  one.seed = path_seed(42, 0);
  const SpiderPath p = simulate_path(cs, vertex(), one);
  CHECK(p.x == a.path(0).x);
  CHECK(p.branch == a.path(0).branch);
}

TEST_CASE("paths satisfy the invariants") {
  const CoefficientSet cs = make_preset({{"family", "affine-in-l"},
                                        {"sigma", {1.0, 0.8, 1.3}},
                                        {"sigma_slope", {0.1, 0.0, -0.05}},
                                        {"drift", {0.3, -0.5, 0.0}},
                                        {"drift_slope", {0.0, 0.1, 0.0}},
                                        {"alpha", {0.2, 0.3, 0.5}},
                                        {"alpha_slope", {0.02, 0.0, -0.02}}});
  const SchemeConfig c = config(32, 32, 9);
  const PathEnsemble ens = simulate_ensemble(cs, {0.0, JunctionPoint(2, 0.2), 0.0}, c, 50);
  const double delta = 2.0 * std::sqrt(c.dt());
  for (std::size_t k = 0; k < ens.paths(); ++k) {
    const SpiderPath p = ens.path(k);
    const PathCheck chk = check_path(p);
    CHECK_MESSAGE(chk.ok, chk.message);
    CHECK(flat_off_zero_defect(p, delta) <= 1e-12);
  }
}

TEST_CASE("signed two-branch process is a Brownian motion") {
  const CoefficientSet cs = brownian_spider(2);
  SchemeConfig c = config(64, 16, 3);
  c.record_every = static_cast<int>(c.total_steps());
  const std::size_t n = 20000;
  const PathEnsemble ens = simulate_ensemble(cs, vertex(), c, n);
  const Eigen::VectorXd y = ens.x.col(1).array() * (2 * ens.branch.col(1).array() - 3).cast<double>();
  const double m = y.mean(), v = (y.array() - m).square().sum() / (n - 1);
  CHECK(std::abs(m) <= 3.0 / std::sqrt(n));
  CHECK(std::abs(v - 1.0) <= 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("far start rarely reaches the vertex") {
  SchemeConfig c = config(16, 16, 4);
  c.horizon = 0.01;
  c.record_every = static_cast<int>(c.total_steps());
  const PathEnsemble ens = simulate_ensemble(brownian_spider(2), {0.0, JunctionPoint(1, 5.0), 0.0}, c, 20000);
  CHECK((ens.l.col(1).array() > 0.0).count() == 0);
}

TEST_CASE("branch frequencies follow a constant alpha") {
  const std::vector<double> alpha = {0.2, 0.3, 0.5};
  SchemeConfig c = config(32, 8, 5);
  c.record_every = static_cast<int>(c.total_steps());
  const PathEnsemble ens = simulate_ensemble(brownian_spider(3, AlphaMode::kGiven, alpha), vertex(), c, 10000);
  const MarginalSummary s = marginal_statistics(ens, 1.0);
  REQUIRE(s.branch_frequency.size() == 3);
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(s.branch_frequency[static_cast<std::size_t>(j)].mean - alpha[static_cast<std::size_t>(j)]) <=
          3.0 * s.branch_frequency[static_cast<std::size_t>(j)].se);
}

TEST_CASE("reflected Brownian moments at t = 1") {
  SchemeConfig c = config(64, 16, 6, CrossingMode::kBridgeLocalTime);
  c.record_every = 256;
  const PathEnsemble ens = simulate_ensemble(brownian_spider(2), vertex(), c, 20000);
  const MarginalSummary s = marginal_statistics(ens, 1.0);
  const double m1 = std::sqrt(2.0 / std::numbers::pi);
  CHECK(std::abs(s.x.mean - m1) <= 3.0 * s.x.se);
  CHECK(std::abs(s.x2.mean - 1.0) <= 3.0 * s.x2.se);
  CHECK(std::abs(s.l.mean - m1) <= 3.0 * s.l.se);
  const MarginalSummary h = marginal_statistics(ens, 0.25);
  CHECK(std::abs(h.l.mean - std::sqrt(2.0 * 0.25 / std::numbers::pi)) <= 3.0 * h.l.se);
  CHECK_THROWS_AS(marginal_statistics(ens, 0.3), PreconditionError);
}

TEST_CASE("constant paths have zero variance") {
  PathEnsemble ens;
  ens.times = Eigen::Vector2d(0.0, 1.0);
  ens.x = Eigen::MatrixXd::Constant(5, 2, 2.0);
  ens.l = Eigen::MatrixXd::Constant(5, 2, 0.5);
  ens.branch = Eigen::MatrixXi::Constant(5, 2, 2);
  ens.seeds = {1, 2, 3, 4, 5};
  ens.valid.assign(5, 1);
  const MarginalSummary s = marginal_statistics(ens, 1.0);
  CHECK(s.var_x == 0.0);
  CHECK(s.var_l == 0.0);
  CHECK(s.cov_xl == 0.0);
  CHECK(s.x.se == 0.0);
  CHECK(s.branch_frequency[1].mean == 1.0);
}

TEST_CASE("permuting branches permutes the marginals") {
  SchemeConfig c = config(32, 8, 8);
  c.record_every = static_cast<int>(c.total_steps());
  const MarginalSummary a =
      marginal_statistics(simulate_ensemble(brownian_spider(3, AlphaMode::kGiven, {0.2, 0.3, 0.5}), vertex(), c, 10000), 1.0);
  c.seed = 99;
  const MarginalSummary b =
      marginal_statistics(simulate_ensemble(brownian_spider(3, AlphaMode::kGiven, {0.5, 0.3, 0.2}), vertex(), c, 10000), 1.0);
  for (int j = 0; j < 3; ++j) {
    const Estimate& p = a.branch_frequency[static_cast<std::size_t>(j)];
    const Estimate& q = b.branch_frequency[static_cast<std::size_t>(2 - j)];
    CHECK(std::abs(p.mean - q.mean) <= 3.0 * std::hypot(p.se, q.se));
  }
}

TEST_CASE("failed paths are reported") {
  CoefficientBounds bd;
  bd.a_lower = 0.5;
  bd.sigma_lower = 1.0;
  const CoefficientSet cs(
      2, [](int, double, double x, double) { return x > 1.0 ? std::nan("") : 1.0; },
      [](int, double, double, double) { return 0.0; },
      [](double, double, std::span<double> a) {
        a[0] = 0.5;
        a[1] = 0.5;
      },
      bd);
  const PathEnsemble ens = simulate_ensemble(cs, vertex(), config(16, 16, 1), 200);
  CHECK_FALSE(ens.failures.empty());
  for (const auto& f : ens.failures) {
    CHECK_FALSE(ens.valid[f.path]);
    CHECK(std::isnan(ens.x(static_cast<Eigen::Index>(f.path), 0)));
    CHECK(f.message.find("sigma") != std::string::npos);
  }
  CHECK(ens.paths() == 200);
}

TEST_CASE("bridge modes run and keep local time nondecreasing") {
  for (auto mode : {CrossingMode::kBridgeCorrected, CrossingMode::kBridgeLocalTime}) {
    const PathEnsemble ens = simulate_ensemble(brownian_spider(3), vertex(), config(8, 8, 2, mode), 50);
    for (std::size_t k = 0; k < ens.paths(); ++k) {
      const SpiderPath p = ens.path(k);
      for (Eigen::Index n = 1; n < p.size(); ++n) CHECK(p.l(n) >= p.l(n - 1));
      CHECK((p.x.array() >= 0.0).all());
    }
  }
}
