#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "levyq/levy.hpp"
#include "levyq/kernel.hpp"
#include "levyq/tail.hpp"

using namespace levyq;

namespace {

// E1(x) = -gamma_E - ln x - sum_{k>=1} (-x)^k / (k k!), converges for all x > 0.
double e1_series(double x) {
  double sum = 0.0;
  double term = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= -x / k;
    sum += term / k;
  }
  return -std::numbers::egamma - std::log(x) - sum;
}

// Ein(x) = int_0^x (1 - e^{-u}) / u du = sum_{k>=1} (-1)^{k+1} x^k / (k k!).
double ein_series(double x) {
  double sum = 0.0;
  double term = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= x / k;
    sum += ((k % 2) ? 1.0 : -1.0) * term / k;
  }
  return sum;
}

}  // namespace

TEST(LevyDensity, GammaPointValues) {
  const auto g = LevyDensity::gamma();
  EXPECT_NEAR(g.density(0.5), std::exp(-0.5) / 0.5, 1e-15);
  EXPECT_NEAR(g.density(0.5), 1.21306, 1e-5);
  EXPECT_NEAR(g.zeta(1.0), std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_NEAR(g.zeta(1.0), -0.63212, 1e-5);
  EXPECT_DOUBLE_EQ(g.g0(), 1.0);
}

TEST(LevyDensity, TemperedLogAtUnitRateIsGamma) {
  const auto g = LevyDensity::gamma();
  const auto t = LevyDensity::tempered_log(1.0, 1.0);
  for (double x : {1e-9, 1e-3, 0.3, 1.0, 7.5, 40.0}) {
    EXPECT_DOUBLE_EQ(t.density(x), g.density(x));
    EXPECT_DOUBLE_EQ(t.zeta(x), g.zeta(x));
  }
}

TEST(LevyDensity, RejectsBadParameters) {
  EXPECT_THROW(LevyDensity::tempered_log(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(LevyDensity::tempered_log(1.0, -2.0), std::invalid_argument);
  LevyParams p;
  p.g0 = 1.0;
  p.custom = [](double x) { return 1.0 / (x * x); };
  EXPECT_THROW(make_levy_density(LevyFamily::Custom, p), std::invalid_argument);
}

TEST(LaplaceExponent, ClosedFormsAndFrullani) {
  const auto g = LevyDensity::gamma();
  EXPECT_EQ(laplace_exponent(g, 0.0), 0.0);
  EXPECT_NEAR(laplace_exponent(g, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(laplace_exponent(g, 1.0), 0.693147, 1e-6);
  // Frullani: int (e^{-2x} - e^{-4x}) / x dx = log 2.
  EXPECT_NEAR(laplace_exponent(LevyDensity::tempered_log(1.0, 2.0), 2.0), std::log(2.0), 1e-15);
  EXPECT_THROW(laplace_exponent(g, -1.0), std::invalid_argument);
}

TEST(LaplaceExponent, QuadratureMatchesClosedFormForCustomDensity) {
  LevyParams p;
  p.g0 = 1.5;
  p.custom = [](double x) { return 1.5 * std::exp(-2.0 * x) / x; };
  const auto c = make_levy_density(LevyFamily::Custom, p);
  for (double lam : {0.25, 1.0, 3.0}) EXPECT_NEAR(laplace_exponent(c, lam), 1.5 * std::log1p(lam / 2.0), 1e-9);
}

TEST(LaplaceExponent, NondecreasingAndConcave) {
  for (const auto& levy : {LevyDensity::gamma(), LevyDensity::tempered_log(2.0, 0.5)}) {
    double prev = -1.0;
    std::vector<double> v;
    for (int i = 0; i <= 40; ++i) {
      const double psi = laplace_exponent(levy, 0.25 * i);
      EXPECT_GE(psi, prev);
      prev = psi;
      v.push_back(psi);
    }
    for (std::size_t i = 1; i + 1 < v.size(); ++i) EXPECT_LE(v[i + 1] - 2.0 * v[i] + v[i - 1], 1e-12);
  }
}

TEST(TailFunction, ExponentialIntegralValues) {
  const TailFunction tail(LevyDensity::gamma());
  EXPECT_NEAR(tail.tail_mass(1.0), e1_series(1.0), 1e-12);
  EXPECT_NEAR(tail.tail_mass(1.0), 0.219384, 1e-6);
  // E1(x) ~ -gamma_E - ln x + x for small x.
  const double x = 1e-6;
  EXPECT_NEAR(tail.tail_mass(x), -std::numbers::egamma - std::log(x) + x, 1e-9);
  EXPECT_NEAR(tail.tail_mass(x), 13.2383, 1e-4);
}

TEST(TailFunction, InverseRoundTrip) {
  const TailFunction tail(LevyDensity::gamma());
  EXPECT_NEAR(tail.inverse_tail(e1_series(1.0)), 1.0, 1e-8);
  for (const auto& levy : {LevyDensity::gamma(), LevyDensity::tempered_log(1.5, 2.0), LevyDensity::tempered_log(0.5, 0.5)}) {
    const TailFunction tf(levy);
    for (double x : {1e-10, 1e-6, 1e-3, 0.1, 1.0, 5.0, 15.0}) {
      const double u = tf.tail_mass(x);
      EXPECT_NEAR(tf.inverse_tail(u), x, 1e-8 * x) << levy.label() << " x=" << x;
    }
  }
}

TEST(TailFunction, StrictlyDecreasing) {
  const TailFunction tail(LevyDensity::tempered_log(1.5, 2.0));
  double prev = tail.tail_mass(1e-12);
  for (int i = 1; i <= 200; ++i) {
    const double x = 1e-12 * std::pow(10.0, 13.0 * i / 200.0);
    const double v = tail.tail_mass(x);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(ValidateClassL, GammaIntegrals) {
  const auto rep = validate_class_L(LevyDensity::gamma());
  EXPECT_TRUE(rep.passed());
  EXPECT_NEAR(rep.tail_integral, e1_series(1.0), 1e-7);
  // int_0^1 |zeta| = int_0^1 (1 - e^{-x}) / x dx = Ein(1) = 0.7966.
  EXPECT_NEAR(rep.zeta_integral, ein_series(1.0), 1e-7);
  EXPECT_NEAR(rep.zeta_integral, 0.79660, 1e-5);
}

TEST(ValidateClassL, TemperedLogFamilyPasses) {
  for (double b : {0.5, 1.0, 4.0}) EXPECT_TRUE(validate_class_L(LevyDensity::tempered_log(1.0, b)).passed()) << b;
}

TEST(ValidateClassL, NonIntegrableZetaFails) {
  const auto c = LevyDensity::custom([](double x) { return 1.0 / (x * x); }, 1.0);
  const auto rep = validate_class_L(c);
  EXPECT_FALSE(rep.h2);
  EXPECT_FALSE(rep.passed());
}

TEST(IntegrateF, TrivialAndFrullani) {
  const auto g = LevyDensity::gamma();
  const auto id = integrate_F(g, identity_section(), 0.0);
  EXPECT_NEAR(id.signed_value, 0.0, 1e-15);
  EXPECT_NEAR(id.absolute, 0.0, 1e-15);
  // phi(x) = 2x: F g = (e^{-2x} - e^{-x}) / x, integral -log 2.
  const auto two = integrate_F(g, kernels::linear(2.0).section(0.0), 0.0);
  EXPECT_NEAR(two.signed_value, -std::log(2.0), 1e-9);
  const auto a1 = integrate_F(g, identity_section(), 1.0);
  EXPECT_NEAR(a1.signed_value, -std::log(2.0), 1e-9);
}

TEST(IntegrateF, IdentityAndBoundOverBattery) {
  const std::vector<Kernel> battery{kernels::linear(2.0), kernels::damped_exp(0.5, 1.0), kernels::holder(0.5),
                                    kernels::modulated_exp(0.5)};
  for (const auto& levy : {LevyDensity::gamma(), LevyDensity::tempered_log(1.5, 2.0)}) {
    for (const auto& k : battery) {
      for (double a : {0.0, 0.5, 1.0, 2.0}) {
        const Section phi = k.section(0.25);
        const auto r = integrate_F(levy, phi, a);
        const double target = -laplace_exponent(levy, a) - levy.g0() * std::log(phi.slope_at_zero());
        EXPECT_NEAR(r.signed_value, target, 1e-6) << levy.label() << " " << k.name() << " a=" << a;
        EXPECT_LE(r.absolute, integrate_F_bound(levy, k.kappa(), k.alpha(), a)) << k.name();
      }
    }
  }
}

TEST(GammaMarginal, ValuesAndMoments) {
  EXPECT_NEAR(gamma_marginal_density(1.0, 0.5), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(gamma_marginal_density(1.0, 0.5), 0.606531, 1e-6);
  EXPECT_EQ(gamma_marginal_density(2.0, -1.0), 0.0);
  for (double t : {0.5, 1.0, 3.0}) {
    const double total = quad::semi_infinite([t](double x) { return gamma_marginal_density(t, x); }, 0.0).value;
    EXPECT_NEAR(total, 1.0, 1e-8) << t;
  }
  const double mean = quad::semi_infinite([](double x) { return x * gamma_marginal_density(2.0, x); }, 0.0).value;
  EXPECT_NEAR(mean, 2.0, 1e-8);
  EXPECT_THROW(gamma_marginal_density(0.0, 1.0), std::invalid_argument);
}
