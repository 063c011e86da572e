#include <doctest.h>

#include <cmath>

#include "spider/rng.hpp"
#include "spider/skew.hpp"
#include "spider/verify.hpp"

using namespace spider;

namespace {

SchemeConfig terminal_config(std::uint64_t seed, double horizon = 1.0) {
  SchemeConfig c;
  c.n_freeze = 32;
  c.n_fine = 16;
  c.seed = seed;
  c.horizon = horizon;
  c.crossing = CrossingMode::kBridgeLocalTime;
  c.record_every = static_cast<int>(c.total_steps());
  return c;
}

}  // namespace

TEST_CASE("beta examples") {
  CHECK(beta(0.0, 0.0, constant_skew(0.5)) == 0.0);
  CHECK(beta(0.0, 0.0, constant_skew(0.75)) == doctest::Approx(0.5));
  CHECK(beta(0.0, 0.0, constant_skew(0.5, 2.0, 1.0)) == doctest::Approx(1.0 / 3.0));
  SkewCoefficients bad = constant_skew(0.5);
  bad.sigma_plus = [](double, double) { return 0.0; };
  CHECK_THROWS_AS(beta(0.0, 0.0, bad), PreconditionError);
}

TEST_CASE("spider data from skew data") {
  const CoefficientSet a = to_spider(constant_skew(0.5));
  CHECK(a.alpha(0.0, 0.0)(0) == doctest::Approx(0.5));
  CHECK(a.sigma(1, 0.0, 0.3, 0.0) == 1.0);
  CHECK(a.drift(2, 0.0, 0.3, 0.0) == 0.0);
  const CoefficientSet b = to_spider(constant_skew(0.5, 2.0, 1.0, 0.4, -0.3));
  CHECK(b.alpha(0.0, 0.0)(1) == doctest::Approx(2.0 / 3.0));
  CHECK(b.alpha(0.0, 0.0).sum() == doctest::Approx(1.0));
  CHECK(b.sigma(2, 0.0, 0.5, 0.0) == 2.0);
  CHECK(b.sigma(1, 0.0, 0.5, 0.0) == 1.0);
  CHECK(b.drift(2, 0.0, 0.5, 0.0) == 0.4);
  CHECK(b.drift(1, 0.0, 0.5, 0.0) == 0.3);  // b_1(x) = -b~(-x)
  CHECK(b.sigma(1, 0.0, 0.0, 0.0) == 1.0);
  CHECK(b.drift(1, 0.0, 0.0, 0.0) == 0.3);
  CHECK(validate_coefficients(b, 300, 1).ok());
}

TEST_CASE("beta identity and inverse transform on random samples") {
  RandomStream rng(77, 0);
  for (int n = 0; n < 1000; ++n) {
    const double alpha = 0.02 + 0.96 * rng.uniform();
    const double sp = 0.1 + 3.0 * rng.uniform(), sm = 0.1 + 3.0 * rng.uniform();
    const SkewCoefficients sk = constant_skew(alpha, sp, sm);
    const CoefficientSet cs = to_spider(sk);
    const double a2 = cs.alpha(0.0, 0.0)(1);
    const SkewCoefficients back = from_spider(cs);
    CHECK(std::abs(beta(0.0, 0.0, back) - (2.0 * a2 - 1.0)) <= 1e-12);
    CHECK(std::abs(beta(0.0, 0.0, sk) - (2.0 * a2 - 1.0)) <= 1e-12);
    CHECK(std::abs(back.alpha(0.0, 0.0) - alpha) <= 1e-12);
    const double bound = 1.0 - 2.0 * sk.a_lower * sk.sigma_lower / sk.sigma_upper;
    CHECK(std::abs(beta(0.0, 0.0, sk)) <= bound + 1e-12);
  }
}

TEST_CASE("symmetric skew SDE is a Brownian motion") {
  const SkewEnsemble e = simulate_skew_ensemble(constant_skew(0.5), 0.0, terminal_config(1), 20000);
  const Eigen::VectorXd y = e.y.col(1);
  const Estimate m = mean_se(y);
  CHECK(std::abs(m.mean) <= 3.0 * m.se);
  const Estimate v = mean_se(y.array().square().matrix());
  CHECK(std::abs(v.mean - 1.0) <= 3.0 * v.se);
}

TEST_CASE("positive side probability equals alpha") {
  for (double alpha : {0.3, 0.75}) {
    const SkewEnsemble e = simulate_skew_ensemble(constant_skew(alpha), 0.0, terminal_config(2), 20000);
    const Eigen::VectorXd pos = (e.y.col(1).array() > 0.0).cast<double>();
    const Estimate p = mean_se(pos);
    CHECK(std::abs(p.mean - alpha) <= 3.0 * p.se);
  }
}

TEST_CASE("far start keeps zero local time") {
  const SkewEnsemble e = simulate_skew_ensemble(constant_skew(0.4), 3.0, terminal_config(3, 0.01), 20000);
  CHECK((e.spider.l.col(1).array() > 0.0).count() == 0);
  CHECK((e.y.col(1).array() > 0.0).all());
}

TEST_CASE("sign mapping round trip") {
  SchemeConfig c = terminal_config(4);
  c.record_every = 1;
  const SkewPath p = simulate_skew(constant_skew(0.6, 1.5, 0.8, 0.2, -0.1), -0.4, c);
  SchemeConfig c2 = c;
  const SpiderPath s = simulate_path(to_spider(constant_skew(0.6, 1.5, 0.8, 0.2, -0.1)),
                                     {0.0, JunctionPoint(1, 0.4), 0.0}, c2);
  CHECK(p.y.cwiseAbs() == s.x);
  CHECK(p.l == s.l);
  for (Eigen::Index k = 0; k < p.y.size(); ++k)
    if (s.x(k) > 0.0) CHECK((p.y(k) > 0.0) == (s.branch(k) == 2));
  CHECK(p.y(0) == -0.4);
}

TEST_CASE("symmetric case has a symmetric law") {
  const SkewEnsemble a = simulate_skew_ensemble(constant_skew(0.5, 1.3, 1.3), 0.0, terminal_config(5), 5000);
  const SkewEnsemble b = simulate_skew_ensemble(constant_skew(0.5, 1.3, 1.3), 0.0, terminal_config(6), 5000);
  std::vector<double> ya, yb;
  for (Eigen::Index k = 0; k < a.y.rows(); ++k) {
    ya.push_back(a.y(k, 1));
    yb.push_back(-b.y(k, 1));
  }
  CHECK(ks_two_sample(ya, yb).p_value > 0.01);
}

TEST_CASE("skew presets") {
  CHECK_THROWS_AS(make_skew_preset({{"alpha", 0.3}, {"gamma", 1}}), PreconditionError);
  CHECK_THROWS_AS(make_skew_preset({{"alpha", 1.3}}), PreconditionError);
  const auto n = normalize_skew_preset({{"alpha", 0.3}});
  CHECK(n.at("sigma_plus") == 1.0);
  CHECK(beta(0.0, 0.0, make_skew_preset(n)) == doctest::Approx(-0.4));
}
