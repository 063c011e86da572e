#include <doctest.h>

#include <cmath>

#include "spider/junction.hpp"
#include "spider/presets.hpp"
#include "spider/rng.hpp"

using namespace spider;

TEST_CASE("distance examples") {
  CHECK(distance(JunctionPoint(1, 2.0), JunctionPoint(1, 3.5)) == 1.5);
  CHECK(distance(JunctionPoint(1, 2.0), JunctionPoint(2, 3.0)) == 5.0);
  CHECK(distance(JunctionPoint(1, 0.0), JunctionPoint(3, 0.0)) == 0.0);
  CHECK(JunctionPoint(1, 0.0) == JunctionPoint(4, 0.0));
  CHECK_FALSE(JunctionPoint(1, 0.5) == JunctionPoint(2, 0.5));
  CHECK_THROWS_AS(JunctionPoint(1, -0.1), PreconditionError);
  CHECK_THROWS_AS(JunctionPoint(0, 1.0), PreconditionError);
}

TEST_CASE("distance is a metric on random triples") {
  RandomStream rng(11, 0);
  auto draw = [&] {
    const int b = 1 + static_cast<int>(rng.uniform() * 3.0);
    const double x = rng.uniform() < 0.1 ? 0.0 : 3.0 * rng.uniform();
    return JunctionPoint(b, x);
  };
  for (int n = 0; n < 1000; ++n) {
    const JunctionPoint p = draw(), q = draw(), r = draw();
    CHECK(distance(p, q) == distance(q, p));
    CHECK(distance(p, p) == 0.0);
    CHECK(distance(p, r) <= distance(p, q) + distance(q, r) + 1e-15);
    if (distance(p, q) == 0.0) CHECK(p == q);
  }
}

TEST_CASE("validation examples") {
  const CoefficientSet good = constant_coefficients({1.0, 1.0}, {0.0, 0.0}, {0.3, 0.7});
  CoefficientBounds bounds;
  bounds.a_lower = 0.25;
  bounds.sigma_lower = 0.5;
  const CoefficientSet cs(
      2, [](int, double, double, double) { return 1.0; }, [](int, double, double, double) { return 0.0; },
      [](double, double, std::span<double> a) {
        a[0] = 0.3;
        a[1] = 0.7;
      },
      bounds);
  CHECK(validate_coefficients(cs, 500, 3).ok());
  CHECK(validate_coefficients(good, 500, 3).ok());

  const CoefficientSet low_alpha(
      2, [](int, double, double, double) { return 1.0; }, [](int, double, double, double) { return 0.0; },
      [](double, double, std::span<double> a) {
        a[0] = 0.1;
        a[1] = 0.9;
      },
      bounds);
  const ValidationReport r = validate_coefficients(low_alpha, 50, 3);
  REQUIRE_FALSE(r.ok());
  CHECK(r.violations.front().condition == "(A)");

  CoefficientBounds eb;
  eb.a_lower = 0.25;
  eb.sigma_lower = 0.1;
  eb.lip_sigma = 100.0;
  const CoefficientSet degenerate(
      2, [](int i, double, double x, double) { return i == 1 ? x : 1.0; },
      [](int, double, double, double) { return 0.0; },
      [](double, double, std::span<double> a) {
        a[0] = 0.5;
        a[1] = 0.5;
      },
      eb);
  const ValidationReport e = validate_coefficients(degenerate, 2000, 5);
  bool found = false;
  for (const auto& v : e.violations)
    if (v.condition == "(E)") {
      found = true;
      CHECK(v.x < 0.1);
      CHECK(v.branch == 1);
    }
  CHECK(found);
}

TEST_CASE("evaluation failures become violations") {
  CoefficientBounds b;
  b.a_lower = 0.2;
  b.sigma_lower = 0.5;
  const CoefficientSet cs(
      2, [](int, double, double x, double) -> double {
        if (x > 2.0) throw std::runtime_error("out of table");
        return 1.0;
      },
      [](int, double, double, double) { return 0.0; },
      [](double, double, std::span<double> a) {
        a[0] = 0.5;
        a[1] = 0.5;
      },
      b);
  const ValidationReport r = validate_coefficients(cs, 200, 1);
  REQUIRE_FALSE(r.ok());
  CHECK(r.violations.front().condition == "evaluation");
}

TEST_CASE("a smaller budget on the same seed finds nothing new") {
  const CoefficientSet cs = make_preset({{"family", "affine-in-l"},
                                        {"sigma", {1.0, 1.2}},
                                        {"sigma_slope", {0.1, 0.0}},
                                        {"drift", {0.1, -0.1}},
                                        {"drift_slope", {0.0, 0.05}},
                                        {"alpha", {0.4, 0.6}},
                                        {"alpha_slope", {0.03, -0.03}}});
  CHECK(validate_coefficients(cs, 1000, 9).ok());
  CHECK(validate_coefficients(cs, 100, 9).ok());
  CHECK(validate_coefficients(cs, 1, 9).ok());
  CHECK(validate_coefficients(brownian_spider(3, AlphaMode::kLDependent), 500, 2).ok());
  CHECK(validate_coefficients(make_preset({{"family", "trig-in-t"}, {"alpha", {0.5, 0.5}}, {"alpha_amp", {0.1, -0.1}}}),
                              500, 2)
            .ok());
  CHECK_THROWS_AS(validate_coefficients(cs, 0, 9), PreconditionError);
}

TEST_CASE("junction continuity") {
  const std::vector<double> ts = {0.0, 0.3, 0.7, 1.0};
  auto sq = check_junction_continuity(TestFunction::quadratic(), 3, ts, 1e-12);
  CHECK(sq.ok);
  CHECK(sq.max_gap == 0.0);

  TestFunction shifted = TestFunction::linear();
  shifted.f = [](int i, double, double x) { return i == 2 ? x + 1.0 : x; };
  auto bad = check_junction_continuity(shifted, 2, ts, 1e-9);
  CHECK_FALSE(bad.ok);
  CHECK(bad.max_gap == doctest::Approx(1.0));

  TestFunction trig = TestFunction::linear();
  trig.f = [](int i, double t, double x) { return std::sin(t) + x * i; };
  CHECK(check_junction_continuity(trig, 4, ts, 1e-12).ok);
  CHECK(check_junction_continuity(TestFunction::branch_bump({1.0, -2.0, 0.5}), 3, ts, 1e-12).ok);
  CHECK_THROWS_AS(check_junction_continuity(trig, 2, ts, 0.0), PreconditionError);
}

TEST_CASE("test function combination is linear") {
  const TestFunction a = TestFunction::quadratic(), b = TestFunction::branch_bump({1.0, 2.0});
  const TestFunction c = TestFunction::combine(2.0, a, -0.5, b);
  for (double x : {0.0, 0.4, 1.7})
    for (int i = 1; i <= 2; ++i) {
      CHECK(c.f(i, 0.3, x) == doctest::Approx(2.0 * a.f(i, 0.3, x) - 0.5 * b.f(i, 0.3, x)));
      CHECK(c.f_xx(i, 0.3, x) == doctest::Approx(2.0 * a.f_xx(i, 0.3, x) - 0.5 * b.f_xx(i, 0.3, x)));
    }
}

TEST_CASE("path invariants") {
  SpiderPath p;
  p.times = Eigen::Vector3d(0.0, 0.5, 1.0);
  p.x = Eigen::Vector3d(1.0, 0.0, 0.5);
  p.branch = Eigen::Vector3i(1, 2, 2);
  p.l = Eigen::Vector3d(0.0, 0.2, 0.2);
  CHECK(check_path(p).ok);
  p.l(2) = 0.3;
  CHECK(check_path(p).ok);  // the step starts at the vertex
  p.x(1) = 0.2;
  CHECK_FALSE(check_path(p).ok);
  p.l = Eigen::Vector3d(0.0, 0.0, 0.0);
  CHECK_FALSE(check_path(p).ok);  // label change away from the vertex
  const SpiderPath s = SpiderPath::single({0.0, JunctionPoint(2, 1.0), 0.0});
  CHECK(s.size() == 1);
  CHECK(check_path(s).ok);
}

TEST_CASE("presets reject unknown keys and normalize") {
  CHECK_THROWS_AS(make_preset({{"family", "constant"}, {"alpha", {0.5, 0.5}}, {"colour", 1}}), PreconditionError);
  CHECK_THROWS_AS(make_preset({{"family", "nope"}}), PreconditionError);
  CHECK_THROWS_AS(make_preset({{"family", "constant"}, {"alpha", {0.5, 0.6}}}), PreconditionError);
  const auto n = normalize_preset({{"family", "brownian-spider"}, {"I", 3}, {"alpha_mode", "l-dependent"}});
  CHECK(n.at("I") == 3);
  CHECK(normalize_preset(n) == n);
  const CoefficientSet cs = make_preset(n);
  CHECK(cs.brownian);
  const Eigen::VectorXd a = cs.alpha(0.0, 0.0);
  CHECK(a(0) == doctest::Approx(0.6));
  CHECK(a.sum() == doctest::Approx(1.0));
  CHECK(cs.alpha(0.0, 1.0)(0) == doctest::Approx(0.45));
}
