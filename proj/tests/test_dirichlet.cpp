#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "levyq/dirichlet.hpp"
#include "levyq/harness.hpp"

using namespace levyq;

namespace {

const TailFunction& gamma_tail() {
  static const TailFunction tail(LevyDensity::gamma());
  return tail;
}

DirichletPath bridge(double T, std::uint64_t seed) { return sample_dirichlet_path(gamma_tail(), T, 1e-6, seed); }

}  // namespace

TEST(DirichletPath, NormalizedAndMonotone) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto D = bridge(2.0, seed);
    EXPECT_EQ(D.value(2.0), 1.0);
    EXPECT_EQ(D.value(0.0), 0.0);
    double sum = 0.0, prev = 0.0;
    for (std::size_t i = 0; i < D.size(); ++i) {
      sum += D.increment(i);
      EXPECT_GE(D.value_at(i), prev);
      prev = D.value_at(i);
    }
    EXPECT_NEAR(sum, 1.0, 1e-15 * D.size());
  }
  EXPECT_THROW(sample_dirichlet_path(gamma_tail(), 0.0, 1e-6, 1), std::invalid_argument);
}

TEST(DirichletPath, EmptyDrawIsResampled) {
  // At eps = 0.9 and T = 0.05 most draws are empty.
  int resampled = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto D = sample_dirichlet_path(gamma_tail(), 0.05, 0.9, seed);
    EXPECT_GE(D.size(), 1u);
    resampled += D.resamples();
  }
  EXPECT_GT(resampled, 0);
}

TEST(DirichletPath, BetaMarginals) {
  const std::size_t n = 40000;
  for (auto [t, T] : {std::pair{0.5, 1.0}, std::pair{1.0, 2.0}, std::pair{1.0, 3.0}}) {
    std::vector<double> x(n), sq(n);
    const double mean = t / T;
    const double var = t * (T - t) / (T * T * (T + 1.0));
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = bridge(T, stream_seed(17, i)).value(t);
      sq[i] = (x[i] - mean) * (x[i] - mean);
    }
    const auto m = mean_estimate(x);
    const auto v = mean_estimate(sq);
    EXPECT_LE(std::abs(m.mean - mean), 4.0 * m.std_error) << t << "," << T;
    EXPECT_LE(std::abs(v.mean - var), 4.0 * v.std_error) << t << "," << T;
  }
}

TEST(BridgeComposition, IdentityIsZero) {
  const auto D = bridge(2.0, 3);
  const Kernel id = kernels::identity().with_mode(KernelMode::Composition);
  for (double t : {0.5, 1.0, 2.0}) EXPECT_NEAR(log_density_bridge_composition(D, id, t).density.log_value, 0.0, 1e-14);
}

TEST(BridgeComposition, RequiresNormalizedCompositionKernel) {
  EXPECT_THROW(require_bridge_kernel(kernels::damped_exp(0.5, 1.0), 1.0), std::invalid_argument);
  EXPECT_THROW(require_bridge_kernel(kernels::linear(2.0).with_mode(KernelMode::Composition), 1.0),
               std::invalid_argument);
  EXPECT_NO_THROW(require_bridge_kernel(kernels::cosine_bridge(0.4), 2.0));
  EXPECT_THROW(log_density_bridge_composition(bridge(1.0, 1), kernels::cosine_bridge(0.4), 1.5), std::out_of_range);
}

TEST(JumpTransformDirichlet, ScaleInvariance) {
  const auto D = bridge(1.0, 4);
  const auto same = jump_transform_dirichlet(D, kernels::identity());
  const auto scaled = jump_transform_dirichlet(D, kernels::linear(3.0));
  for (std::size_t i = 0; i < D.size(); ++i) {
    EXPECT_NEAR(same.increment(i), D.increment(i), 1e-15);
    EXPECT_NEAR(scaled.increment(i), D.increment(i), 1e-15);
  }
}

TEST(PsiZeta, LinearAndBounds) {
  const auto D = bridge(1.0, 5);
  const auto id = psi_zeta(D, kernels::identity(), 0.7);
  EXPECT_NEAR(id.psi, 0.7, 1e-14);
  EXPECT_NEAR(id.psi_prime, 1.0, 1e-14);
  const auto lin = psi_zeta(D, kernels::linear(2.0), 0.7);
  EXPECT_NEAR(lin.psi, 0.35, 1e-14);
  EXPECT_NEAR(lin.psi_prime, 0.5, 1e-14);
  const auto k = kernels::damped_exp(0.5, 1.0);
  for (double x : {0.1, 1.0, 3.0}) {
    const auto v = psi_zeta(D, k, x);
    EXPECT_GE(v.psi_prime, 1.0 / k.kappa());
    EXPECT_LE(v.psi_prime, k.kappa());
    // psi' against a central difference of psi.
    const double h = 1e-5;
    const double fd = (psi_zeta(D, k, x + h).psi - psi_zeta(D, k, x - h).psi) / (2.0 * h);
    EXPECT_NEAR(v.psi_prime, fd, 1e-7);
  }
}

TEST(BridgeJump, IdentityWeightsVanish) {
  const auto D = bridge(1.0, 6);
  const auto w = log_density_bridge_jump(D, kernels::identity());
  EXPECT_NEAR(w.lhs.log_value, 0.0, 1e-14);
  EXPECT_NEAR(w.rhs.log_value, 0.0, 1e-14);
  EXPECT_NEAR(w.zeta, 1.0, 1e-14);
}

TEST(BridgeJump, ConstantKernelWeightsAreEqualConstants) {
  // k = c, T = 1: both sides equal T log c + 1 - c; for c = 0.8 this is -0.0231435513.
  const double expected = std::log(0.8) + 0.2;
  EXPECT_NEAR(expected, -0.0231435513, 1e-10);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto D = bridge(1.0, seed);
    const auto w = log_density_bridge_jump(D, kernels::linear(0.8));
    EXPECT_NEAR(w.lhs.log_value, expected, 1e-12);
    EXPECT_NEAR(w.rhs.log_value, expected, 1e-12);
  }
  const auto D2 = bridge(2.0, 1);
  const auto w2 = log_density_bridge_jump(D2, kernels::linear(1.5));
  EXPECT_NEAR(w2.lhs.log_value, 2.0 * std::log(1.5) - 0.5, 1e-12);
  EXPECT_NEAR(w2.rhs.log_value, 2.0 * std::log(1.5) - 0.5, 1e-12);
}

TEST(BridgeJump, ZetaSolvesPsiEqualsOne) {
  const auto k = kernels::damped_exp(0.5, 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto D = bridge(1.0, seed);
    const auto w = log_density_bridge_jump(D, k);
    EXPECT_NEAR(psi_zeta(D, k, w.zeta).psi, 1.0, 1e-12);
    EXPECT_LE(w.newton_iterations, 20);
  }
}
