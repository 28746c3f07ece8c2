#pragma once

// Dirichlet (normalized gamma) bridges on [0, T] and their quasi-invariance weights.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "levyq/density.hpp"
#include "levyq/kernel.hpp"
#include "levyq/path.hpp"
#include "levyq/rng.hpp"
#include "levyq/tail.hpp"

namespace levyq {

/**
 * D_t = xi_t / xi_T for a positive jump path xi on [0, T]. Values are
 * computed from the unnormalized prefix sums, so D_T == 1 exactly.
 */
class DirichletPath {
 public:
  DirichletPath() = default;

  explicit DirichletPath(JumpPath base, int resamples = 0) : base_(std::move(base)), resamples_(resamples) {
    if (base_.empty()) throw std::invalid_argument("DirichletPath: needs at least one jump");
    if (!(base_.horizon() > 0.0)) throw std::invalid_argument("DirichletPath: T must be > 0");
    total_ = base_.total();
  }

  double T() const noexcept { return base_.horizon(); }
  double eps() const noexcept { return base_.truncation(); }
  std::uint64_t seed() const noexcept { return base_.seed(); }
  int resamples() const noexcept { return resamples_; }
  std::size_t size() const noexcept { return base_.size(); }
  const JumpPath& base() const noexcept { return base_; }
  /// xi_T of the underlying path (gamma_T for a sampled bridge).
  double base_total() const noexcept { return total_; }

  double time(std::size_t i) const { return base_[i].time; }
  /// Delta D at the i-th jump.
  double increment(std::size_t i) const { return base_[i].size / total_; }
  double value_before(std::size_t i) const { return base_.value_before(i) / total_; }
  double value_at(std::size_t i) const { return base_.value_at(i) / total_; }
  std::size_t count_until(double t) const { return base_.count_until(t); }
  double value(double t) const { return base_.value(t) / total_; }

 private:
  JumpPath base_;
  double total_ = 1.0;
  int resamples_ = 0;
};

/// Normalizes a Gamma path sampled on [0, T]; an empty draw is replaced by the next substream.
inline DirichletPath sample_dirichlet_path(const TailFunction& gamma_tail, double T, double eps, std::uint64_t seed,
                                           const SamplingOptions& opts = {}) {
  if (!(T > 0.0)) throw std::invalid_argument("sample_dirichlet_path: T must be > 0");
  std::uint64_t draw_seed = seed;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    JumpPath p = sample_jump_path(gamma_tail, T, eps, draw_seed, opts);
    if (!p.empty()) return DirichletPath(std::move(p), attempt);
    draw_seed = stream_seed(seed, static_cast<std::uint64_t>(attempt) + 1);
  }
  throw std::runtime_error("sample_dirichlet_path: 1000 consecutive empty paths; eps is far too large");
}

inline DirichletPath sample_dirichlet_path(double T, double eps, std::uint64_t seed) {
  return sample_dirichlet_path(TailFunction(LevyDensity::gamma()), T, eps, seed);
}

inline void require_bridge_kernel(const Kernel& kernel, double T) {
  if (kernel.mode() != KernelMode::Composition)
    throw std::invalid_argument("bridge kernel '" + kernel.name() + "' must be a composition kernel");
  const double err = bridge_normalization_error(kernel, T);
  if (!(err <= 1e-10))
    throw std::invalid_argument("bridge kernel '" + kernel.name() + "' has |K(s,1) - 1| = " + std::to_string(err) +
                                "; normalize it or pick another kernel");
}

struct BridgeDensity {
  LogDensity density;
  int clamped = 0;  ///< times 1 - D_t or 1 - K(t, D_t) was raised to the floor
};

/**
 * log L_t for a composition kernel with K(s, 1) = 1: boundary factor
 * ((1 - K(t, D_t)) / (1 - D_t))^{T - t - 1} for t < T and 1 / k(T, 1) at t = T,
 * times exp(int_0^t log k(s, D_s) ds) prod k(s, D_s) dD / dK.
 */
inline BridgeDensity log_density_bridge_composition(const DirichletPath& D, const Kernel& kernel, double t) {
  const double T = D.T();
  if (!(t > 0.0) || t > T) throw std::out_of_range("log_density_bridge_composition: t outside (0, T]");
  constexpr double kFloor = 1e-300;
  BridgeDensity out;
  const std::size_t n = D.count_until(t);

  double comp = 0.0;
  double start = 0.0;
  auto add_segment = [&](double a, double b, double state) {
    if (!(b > a)) return;
    if (!kernel.time_dependent()) {
      comp += (b - a) * std::log(kernel.derivative(a, state));
    } else {
      comp += detail::smooth_time_integral([&](double s) { return std::log(kernel.derivative(s, state)); }, a, b);
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    add_segment(start, D.time(i), D.value_before(i));
    start = D.time(i);
  }
  add_segment(start, t, n > 0 ? D.value_at(n - 1) : 0.0);

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = D.time(i);
    const double d = D.increment(i);
    const double dK = kernel.increment(s, D.value_before(i), d);
    sum += std::log(kernel.derivative(s, D.value_at(i))) + std::log(d) - std::log(dK);
  }

  double boundary;
  if (t < T) {
    const double Dt = n > 0 ? D.value_at(n - 1) : 0.0;
    double one_minus_D = 1.0 - Dt;
    double one_minus_K = 1.0 - kernel.primitive(t, Dt);
    if (one_minus_D < kFloor) {
      one_minus_D = kFloor;
      ++out.clamped;
    }
    if (one_minus_K < kFloor) {
      one_minus_K = kFloor;
      ++out.clamped;
    }
    boundary = (T - t - 1.0) * (std::log(one_minus_K) - std::log(one_minus_D));
  } else {
    boundary = -std::log(kernel.derivative(T, 1.0));
  }
  out.density.compensator = comp + boundary;
  out.density.jump_sum = sum;
  out.density.log_value = out.density.compensator + out.density.jump_sum;
  return out;
}

/// D^K: jump i becomes K(s_i, d_i), then renormalized.
inline DirichletPath jump_transform_dirichlet(const DirichletPath& D, const Kernel& kernel) {
  std::vector<Jump> out(D.size());
  for (std::size_t i = 0; i < D.size(); ++i) out[i] = {D.time(i), kernel.primitive(D.time(i), D.increment(i))};
  return DirichletPath(JumpPath(D.T(), D.eps(), D.seed(), std::move(out)), D.resamples());
}

struct PsiValue {
  double psi;
  double psi_prime;
};

/// psi_D(x) = sum J(s_i, x d_i), psi_D'(x) = sum d_i / k(s_i, J(s_i, x d_i)).
inline PsiValue psi_zeta(const DirichletPath& D, const Kernel& kernel, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("psi_zeta: x must be >= 0");
  PsiValue v{0.0, 0.0};
  for (std::size_t i = 0; i < D.size(); ++i) {
    const double s = D.time(i);
    const double d = D.increment(i);
    const double j = kernel.inverse(s, x * d);
    v.psi += j;
    v.psi_prime += d / kernel.derivative(s, j);
  }
  return v;
}

struct BridgeJumpWeights {
  LogDensity lhs;  ///< log U^K_T evaluated on D
  LogDensity rhs;  ///< log[p_T(zeta) / p_T(1)] + log zeta'
  double zeta = 1.0;
  int newton_iterations = 0;
};

/**
 * The two weights of the two-sided identity
 *   E[Phi(D^K) U^K_T] = E[Phi(D) p_T(zeta(1)) / p_T(1) zeta'(1)],
 * with p_T the Gamma(T, 1) density and zeta the inverse of psi_D.
 */
inline BridgeJumpWeights log_density_bridge_jump(const DirichletPath& D, const Kernel& kernel) {
  const double T = D.T();
  BridgeJumpWeights w;

  double sum_K = 0.0;
  double prod = 0.0;
  for (std::size_t i = 0; i < D.size(); ++i) {
    const double s = D.time(i);
    const double d = D.increment(i);
    const double K = kernel.primitive(s, d);
    sum_K += K;
    prod += std::log(kernel.derivative(s, d)) + std::log(d / K);
  }
  double comp = 0.0;
  if (!kernel.time_dependent()) {
    comp = T * std::log(kernel.derivative(0.0, 0.0));
  } else {
    comp = detail::smooth_time_integral([&](double s) { return std::log(kernel.derivative(s, 0.0)); }, 0.0, T);
  }
  w.lhs.compensator = comp;
  w.lhs.jump_sum = 1.0 - sum_K + prod;
  w.lhs.log_value = w.lhs.compensator + w.lhs.jump_sum;

  // psi is increasing with slope in [1/kappa, kappa], so zeta(1) lies in [1/kappa, kappa].
  const double kappa = kernel.kappa();
  double lo = 1.0 / kappa;
  double hi = kappa;
  double z = 1.0;
  PsiValue pv = psi_zeta(D, kernel, z);
  int it = 0;
  for (; it < 100; ++it) {
    const double f = pv.psi - 1.0;
    if (f > 0.0) hi = std::min(hi, z);
    else lo = std::max(lo, z);
    double next = z - f / pv.psi_prime;
    if (!(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
    const double step = next - z;
    z = next;
    pv = psi_zeta(D, kernel, z);
    if (std::abs(step) <= 1e-12 * z) break;
  }
  if (it == 100) throw std::logic_error("log_density_bridge_jump: Newton for zeta(1) did not converge");
  w.zeta = z;
  w.newton_iterations = it + 1;
  const double zeta_prime = 1.0 / pv.psi_prime;
  w.rhs.compensator = 0.0;
  w.rhs.jump_sum = (T - 1.0) * std::log(z) + 1.0 - z + std::log(zeta_prime);
  w.rhs.log_value = w.rhs.jump_sum;
  return w;
}

}  // namespace levyq
