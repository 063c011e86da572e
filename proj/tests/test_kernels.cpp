#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spider/kernels.hpp"
#include "spider/presets.hpp"

using namespace spider;

namespace {

// Closed form of the vertex kernel when alpha is constant: the last-zero
// integral of the triple density collapses to a first-passage density in ell + y.
double constant_alpha_oracle(double y, double ell, double tau, double alpha) {
  const double z = ell + y;
  return 2.0 * alpha * z / std::sqrt(2.0 * std::numbers::pi * tau * tau * tau) * std::exp(-z * z / (2.0 * tau));
}

}  // namespace

TEST_CASE("triple density support") {
  CHECK(triple_density(1.0, 1.0, 1.5, 1.0) == 0.0);
  CHECK(triple_density(0.0, 1.0, 0.5, 1.0) == 0.0);
  CHECK(triple_density(1.0, 0.0, 0.5, 1.0) == 0.0);
  CHECK(triple_density(0.3, 0.4, 0.5, 1.0) > 0.0);
  CHECK_THROWS_AS(triple_density(1.0, 1.0, 0.5, 0.0), PreconditionError);
}

TEST_CASE("triple density normalization by variant") {
  const KernelMass w = triple_density_mass(1.0, TripleDensityVariant::kLocalTimeWeighted);
  CHECK(w.value == doctest::Approx(1.0).epsilon(1e-8));
  // Unweighted: the s-marginal is 1 / (pi s sqrt(s (1 - s))) ... grows like log(1/s_min).
  const double m1 = triple_density_mass(1.0, TripleDensityVariant::kUnweighted, 1e-2).value;
  const double m2 = triple_density_mass(1.0, TripleDensityVariant::kUnweighted, 1e-4).value;
  CHECK(m2 > m1 + 1.0);
}

TEST_CASE("vertex kernel matches the constant-alpha closed form") {
  const CoefficientSet cs = brownian_spider(3, AlphaMode::kGiven, {0.2, 0.3, 0.5});
  const SpiderKernel k = kernel_from_junction(cs, 0.0, 0.0, 0.8);
  for (double y : {0.1, 0.5, 1.3})
    for (double ell : {0.05, 0.4, 1.0})
      for (int j = 1; j <= 3; ++j) {
        const double a = cs.alpha(0.0, 0.0)(j - 1);
        CHECK(k.density(y, j, ell) == doctest::Approx(constant_alpha_oracle(y, ell, 0.8, a)).epsilon(1e-6));
      }
  CHECK(k.atom(0.5, 1) == 0.0);
}

TEST_CASE("vertex kernel branch marginal equals alpha") {
  const CoefficientSet cs = brownian_spider(3, AlphaMode::kGiven, {0.2, 0.3, 0.5});
  const BranchMarginal m = branch_marginal(kernel_from_junction(cs, 0.0, 0.0, 1.0));
  CHECK(m.mass(0) == doctest::Approx(0.2).epsilon(1e-3));
  CHECK(m.mass(1) == doctest::Approx(0.3).epsilon(1e-3));
  CHECK(m.mass(2) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(std::abs(m.total() - 1.0) < 1e-3);

  const CoefficientSet half = brownian_spider(2);
  const BranchMarginal h = branch_marginal(kernel_from_junction(half, 0.0, 0.0, 1.0));
  CHECK(std::abs(h.mass(0) - 0.5) < 1e-3);
  CHECK(std::abs(h.mass(1) - 0.5) < 1e-3);
}

TEST_CASE("general kernel: atom mass and total mass") {
  const CoefficientSet cs = brownian_spider(3, AlphaMode::kLDependent);
  for (double x : {0.1, 1.0})
    for (double tau : {0.5, 1.0}) {
      const SpiderKernel k = kernel_general(cs, 0.0, JunctionPoint(2, x), 0.0, tau);
      const double exact = std::erf(x / std::sqrt(2.0 * tau));
      CHECK(std::abs(k.atom_mass(2).value - exact) < 1e-6);
      CHECK(k.atom_mass(1).value == 0.0);
      CHECK(std::abs(k.total_mass().value - 1.0) < 1e-3);
    }
}

TEST_CASE("general kernel far from the vertex") {
  const CoefficientSet cs = brownian_spider(2);
  const double tau = 0.5, x = 10.0 * std::sqrt(tau);
  const SpiderKernel k = kernel_general(cs, 0.0, JunctionPoint(1, x), 0.0, tau);
  const double R = k.truncation();
  double cont = 0.0;
  for (int j = 1; j <= 2; ++j) cont += k.continuous_mass(j, 0.0, R, 0.0, R).value;
  CHECK(cont <= 1e-8);
  const BranchMarginal m = branch_marginal(k);
  CHECK(m.mass(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("general kernel density is the time convolution of the vertex kernel") {
  const CoefficientSet cs = brownian_spider(2, AlphaMode::kGiven, {0.4, 0.6});
  const double x = 0.5, tau = 1.0;
  const SpiderKernel k = kernel_general(cs, 0.0, JunctionPoint(1, x), 0.0, tau);
  // With constant alpha, q = alpha_j * int fp_x(u) * 2 (ell+y) / sqrt(2 pi (tau-u)^3) e^{-(ell+y)^2 / 2(tau-u)} du,
  // i.e. 2 alpha_j times the first-passage density of x + ell + y.
  for (double y : {0.2, 0.9})
    for (double ell : {0.1, 0.6}) {
      const double z = x + ell + y;
      const double fp = z / std::sqrt(2.0 * std::numbers::pi * tau * tau * tau) * std::exp(-z * z / (2.0 * tau));
      CHECK(k.density(y, 2, ell) == doctest::Approx(2.0 * 0.6 * fp).epsilon(1e-5));
    }
}

TEST_CASE("branch permutation symmetry") {
  const CoefficientSet a = brownian_spider(3, AlphaMode::kGiven, {0.2, 0.3, 0.5});
  const CoefficientSet b = brownian_spider(3, AlphaMode::kGiven, {0.5, 0.3, 0.2});
  const SpiderKernel ka = kernel_general(a, 0.0, JunctionPoint(2, 0.3), 0.0, 0.7);
  const SpiderKernel kb = kernel_general(b, 0.0, JunctionPoint(2, 0.3), 0.0, 0.7);
  for (double y : {0.2, 0.8}) {
    CHECK(ka.density(y, 1, 0.3) == doctest::Approx(kb.density(y, 3, 0.3)).epsilon(1e-12));
    CHECK(ka.marginal_density(y, 3) == doctest::Approx(kb.marginal_density(y, 1)).epsilon(1e-12));
  }
}

TEST_CASE("atom mass monotone in x and in t - s") {
  const CoefficientSet cs = brownian_spider(2);
  double prev = 0.0;
  for (double x : {0.1, 0.3, 0.9, 2.0}) {
    const double m = kernel_general(cs, 0.0, JunctionPoint(1, x), 0.0, 1.0).atom_mass(1).value;
    CHECK(m > prev);
    prev = m;
  }
  prev = 1.0;
  for (double tau : {0.2, 0.5, 1.0, 2.0}) {
    const double m = kernel_general(cs, 0.0, JunctionPoint(1, 0.5), 0.0, tau).atom_mass(1).value;
    CHECK(m < prev);
    prev = m;
  }
}

TEST_CASE("marginal density integrates to branch mass") {
  const CoefficientSet cs = brownian_spider(2, AlphaMode::kLDependent);
  const SpiderKernel k = kernel_from_junction(cs, 0.0, 0.2, 1.0);
  const QuadResult r = integrate([&](double y) { return k.marginal_density(y, 1); }, 0.0, 10.0, 1e-7, 1e-9);
  CHECK(r.value == doctest::Approx(k.branch_mass(1).value).epsilon(1e-5));
}

TEST_CASE("Chapman-Kolmogorov for constant alpha") {
  // Marginal in (y, j) only; the ell coordinate is integrated out.
  const CoefficientSet cs = brownian_spider(2, AlphaMode::kGiven, {0.35, 0.65});
  const double s = 0.0, t = 0.4, u = 1.0;
  KernelOptions loose;
  loose.inner_tol = 1e-6;
  loose.entry_tol = 1e-4;
  const SpiderKernel direct = kernel_general(cs, s, JunctionPoint(1, 0.6), 0.0, u);
  const SpiderKernel first = kernel_general(cs, s, JunctionPoint(1, 0.6), 0.0, t, loose);
  for (double y : {0.3, 0.8})
    for (int j = 1; j <= 2; ++j) {
      double composed = 0.0;
      for (int m = 1; m <= 2; ++m) {
        auto f = [&](double z) {
          if (z <= 0.0) return 0.0;
          const SpiderKernel second = kernel_general(cs, t, JunctionPoint(m, z), 0.0, u, loose);
          return first.marginal_density(z, m) * second.marginal_density(y, j);
        };
        composed += integrate(f, 0.0, 6.0, 1e-4, 1e-4).value;
      }
      // The vertex itself carries no mass at time t, so the z integral suffices.
      CHECK(std::abs(composed - direct.marginal_density(y, j)) < 5e-3);
    }
}
