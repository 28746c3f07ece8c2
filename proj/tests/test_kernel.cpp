#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "levyq/config.hpp"
#include "levyq/kernel.hpp"
#include "levyq/path.hpp"

using namespace levyq;

namespace {

std::vector<Kernel> battery() {
  return {kernels::identity(),          kernels::linear(2.0),     kernels::linear(0.5),
          kernels::damped_exp(0.5, 1.0), kernels::holder(0.5),     kernels::modulated(1.0, 0.3),
          kernels::modulated_exp(0.5)};
}

JumpPath sample(std::uint64_t seed) { return sample_jump_path(LevyDensity::gamma(), 1.0, 1e-6, seed); }

}  // namespace

TEST(Kernel, PrimitiveClosedForms) {
  EXPECT_DOUBLE_EQ(kernels::identity().primitive(0.3, 0.7), 0.7);
  EXPECT_DOUBLE_EQ(kernels::linear(2.0).primitive(0.0, 0.3), 0.6);
  // K(x) = x + 0.5 (1 - e^{-x}).
  const auto k = kernels::damped_exp(0.5, 1.0);
  EXPECT_NEAR(k.primitive(0.0, 1.0), 1.0 + 0.5 * (1.0 - std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(k.primitive(0.0, 1.0), 1.31606, 1e-5);
}

TEST(Kernel, PrimitiveAgreesWithQuadrature) {
  for (const auto& k : battery()) {
    for (double s : {0.0, 0.3, 0.8}) {
      for (double x : {1e-8, 0.01, 0.5, 3.0}) {
        const double q = quad::finite([&](double y) { return k.derivative(s, y); }, 0.0, x, 1e-14).value;
        EXPECT_NEAR(k.primitive(s, x), q, 1e-12 * std::max(1.0, q)) << k.name() << " s=" << s << " x=" << x;
      }
    }
  }
}

TEST(Kernel, IncrementWithoutCancellation) {
  for (const auto& k : battery()) {
    for (double x : {0.0, 1e-6, 0.4, 2.0}) {
      for (double d : {1e-12, 1e-7, 0.3}) {
        const double q = quad::finite([&](double u) { return k.derivative(0.4, x + u); }, 0.0, d, 1e-15).value;
        EXPECT_NEAR(k.increment(0.4, x, d), q, 1e-10 * q) << k.name() << " x=" << x << " d=" << d;
      }
    }
  }
}

TEST(Kernel, InverseRoundTrip) {
  EXPECT_DOUBLE_EQ(kernels::identity().inverse(0.0, 0.37), 0.37);
  EXPECT_NEAR(kernels::linear(2.0).inverse(0.0, 0.8), 0.4, 1e-15);
  for (const auto& k : battery()) {
    for (double x : {1e-9, 1e-3, 0.7, 5.0}) {
      EXPECT_NEAR(k.inverse(0.6, k.primitive(0.6, x)), x, 1e-12 * x) << k.name();
    }
  }
}

TEST(Kernel, ValidationAcceptsBatteryAndRejectsUnbounded) {
  for (const auto& k : battery()) EXPECT_TRUE(validate_kernel(k).passed()) << k.name();
  const Kernel bad("unbounded", [](double, double x) { return x; }, 2.0, 0.5);
  EXPECT_FALSE(validate_kernel(bad).bounds_ok);
  EXPECT_THROW(Kernel("k", [](double, double) { return 1.0; }, 0.5, 0.5), std::invalid_argument);
  EXPECT_THROW(kernels::linear(-1.0), std::invalid_argument);
}

TEST(JumpTransform, PreservesTimesAndScales) {
  const auto p = sample(1);
  const auto id = apply_jump_transform(p, kernels::identity());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(id[i].size, p[i].size);
  const auto two = apply_jump_transform(p, kernels::linear(2.0));
  ASSERT_EQ(two.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(two[i].time, p[i].time);
    EXPECT_DOUBLE_EQ(two[i].size, 2.0 * p[i].size);
  }
  EXPECT_NEAR(two.value(1.0), 2.0 * p.value(1.0), 1e-14);
}

TEST(JumpTransform, SingleJumpOracle) {
  const JumpPath p(1.0, 1e-6, 0, {{0.5, 1.0}});
  const auto q = apply_jump_transform(p, kernels::damped_exp(0.5, 1.0));
  EXPECT_NEAR(q[0].size, 1.31606, 1e-5);
}

TEST(JumpTransform, SizesWithinKappaEnvelope) {
  const auto p = sample(2);
  for (const auto& k : battery()) {
    const auto q = apply_jump_transform(p, k);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_GE(q[i].size, p[i].size / k.kappa() * (1.0 - 1e-15));
      EXPECT_LE(q[i].size, p[i].size * k.kappa() * (1.0 + 1e-15));
    }
  }
}

TEST(JumpTransform, InverseThenForwardRestoresPath) {
  const auto p = sample(3);
  for (const auto& k : battery()) {
    const auto back = apply_jump_transform(apply_jump_transform(p, k), inverse_of(k));
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(back[i].size, p[i].size, 1e-9 * p[i].size) << k.name();
  }
}

TEST(Composition, TelescopesToPrimitiveOfValue) {
  const auto p = sample(4);
  for (const auto& k0 : battery()) {
    if (k0.time_dependent()) continue;
    const Kernel k = k0.with_mode(KernelMode::Composition);
    const auto q = apply_composition(p, k);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double target = k.primitive(p[i].time, p.value_at(i));
      EXPECT_NEAR(q.value_at(i), target, 1e-10 * std::max(target, 1e-300)) << k.name();
    }
  }
  const auto lin = apply_composition(p, kernels::linear(3.0).with_mode(KernelMode::Composition));
  EXPECT_NEAR(lin.value(1.0), 3.0 * p.value(1.0), 1e-13);
}

TEST(BridgeKernels, NormalizedAndNormalizer) {
  EXPECT_LT(bridge_normalization_error(kernels::cosine_bridge(0.4), 2.0), 1e-14);
  EXPECT_LT(bridge_normalization_error(kernels::quadratic_bridge(0.5), 2.0), 1e-14);
  const Kernel raw("raw", [](double, double x) { return 1.0 + 0.5 * x; }, 2.0, 0.5, false, {}, KernelMode::Composition);
  EXPECT_GT(bridge_normalization_error(raw, 1.0), 0.2);
  EXPECT_LT(bridge_normalization_error(normalize_bridge(raw), 1.0), 1e-12);
}

TEST(KernelRegistry, BuildsAndRejects) {
  KernelSpec s;
  s.name = "damped_exp";
  s.params = {{"a", 0.5}, {"b", 1.0}};
  EXPECT_EQ(make_kernel(s).name(), "damped_exp");
  s.params["zzz"] = 1.0;
  EXPECT_THROW(make_kernel(s), ConfigError);
  KernelSpec u;
  u.name = "no_such_kernel";
  EXPECT_THROW(make_kernel(u), ConfigError);
  KernelSpec bridge;
  bridge.name = "damped_exp";
  bridge.mode = KernelMode::Composition;
  EXPECT_THROW(make_kernel(bridge, 1.0), ConfigError);
}
