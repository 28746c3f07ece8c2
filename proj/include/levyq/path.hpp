#pragma once

// Truncated subordinator paths: finitely many (time, size) marks with size >= eps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "levyq/levy.hpp"
#include "levyq/rng.hpp"
#include "levyq/tail.hpp"

namespace levyq {

struct Jump {
  double time = 0.0;
  double size = 0.0;
  friend bool operator==(const Jump&, const Jump&) = default;
};

/**
 * A pure-jump nondecreasing path on [0, horizon]: value(t) = sum of sizes of
 * jumps with time <= t. Jump times are strictly increasing.
 */
class JumpPath {
 public:
  JumpPath() = default;

  JumpPath(double horizon, double truncation, std::uint64_t seed, std::vector<Jump> jumps)
      : horizon_(horizon), truncation_(truncation), seed_(seed), jumps_(std::move(jumps)) {
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("JumpPath: horizon must be >= 0");
    if (!(truncation > 0.0)) throw std::invalid_argument("JumpPath: truncation must be > 0");
    prefix_.resize(jumps_.size() + 1, 0.0);
    for (std::size_t i = 0; i < jumps_.size(); ++i) {
      const auto& j = jumps_[i];
      if (!(j.time > 0.0) || j.time > horizon) throw std::invalid_argument("JumpPath: jump time outside (0, horizon]");
      if (i > 0 && !(j.time > jumps_[i - 1].time)) throw std::invalid_argument("JumpPath: jump times must strictly increase");
      if (!(j.size > 0.0) || !std::isfinite(j.size)) throw std::invalid_argument("JumpPath: jump sizes must be positive");
      prefix_[i + 1] = prefix_[i] + j.size;
    }
  }

  double horizon() const noexcept { return horizon_; }
  double truncation() const noexcept { return truncation_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const Jump> jumps() const noexcept { return jumps_; }
  std::size_t size() const noexcept { return jumps_.size(); }
  bool empty() const noexcept { return jumps_.empty(); }
  const Jump& operator[](std::size_t i) const { return jumps_[i]; }

  /// Number of jumps with time <= t.
  std::size_t count_until(double t) const {
    const auto it = std::upper_bound(jumps_.begin(), jumps_.end(), t,
                                     [](double v, const Jump& j) { return v < j.time; });
    return static_cast<std::size_t>(it - jumps_.begin());
  }

  /// xi_t; requires 0 <= t <= horizon.
  double value(double t) const {
    if (!(t >= 0.0) || t > horizon_) throw std::out_of_range("JumpPath::value: t outside [0, horizon]");
    return prefix_[count_until(t)];
  }

  /// Left limit xi_{s_i-} at the i-th jump.
  double value_before(std::size_t i) const { return prefix_[i]; }
  /// xi_{s_i} at the i-th jump.
  double value_at(std::size_t i) const { return prefix_[i + 1]; }
  double total() const noexcept { return prefix_.back(); }

  /// The path restricted to [0, t].
  JumpPath until(double t) const {
    if (!(t >= 0.0) || t > horizon_) throw std::out_of_range("JumpPath::until: t outside [0, horizon]");
    std::vector<Jump> kept(jumps_.begin(), jumps_.begin() + static_cast<std::ptrdiff_t>(count_until(t)));
    return JumpPath(t, truncation_, seed_, std::move(kept));
  }

  /// Drops jumps smaller than `eps`; the result is an eps-truncated path coupled to this one.
  JumpPath raise_truncation(double eps) const {
    if (eps < truncation_) throw std::invalid_argument("raise_truncation: eps below current truncation");
    std::vector<Jump> kept;
    kept.reserve(jumps_.size());
    for (const auto& j : jumps_)
      if (j.size >= eps) kept.push_back(j);
    return JumpPath(horizon_, eps, seed_, std::move(kept));
  }

  friend bool operator==(const JumpPath& a, const JumpPath& b) {
    return a.horizon_ == b.horizon_ && a.truncation_ == b.truncation_ && a.seed_ == b.seed_ && a.jumps_ == b.jumps_;
  }

 private:
  double horizon_ = 0.0;
  double truncation_ = 1.0;
  std::uint64_t seed_ = 0;
  std::vector<Jump> jumps_;
  std::vector<double> prefix_{0.0};
};

inline double path_value(const JumpPath& path, double t) { return path.value(t); }

struct SamplingOptions {
  double max_expected_jumps = 1e7;
};

/**
 * Samples the marks of jumps larger than eps on (0, horizon]: a Poisson number
 * of jumps with mean horizon * nu_bar(eps), sizes by inverse tail, times
 * uniform. Draw order: count, then (time, size) per jump.
 */
inline JumpPath sample_jump_path(const TailFunction& tail, double horizon, double eps, std::uint64_t seed,
                                 const SamplingOptions& opts = {}) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("sample_jump_path: horizon must be >= 0");
  if (!(eps > 0.0) || !(eps < 1.0)) throw std::invalid_argument("sample_jump_path: eps must lie in (0, 1)");
  if (horizon == 0.0) return JumpPath(0.0, eps, seed, {});
  const double mass = tail.tail_mass(eps);
  const double expected = horizon * mass;
  if (expected > opts.max_expected_jumps) {
    throw std::invalid_argument("sample_jump_path: eps = " + std::to_string(eps) + " gives " +
                                std::to_string(expected) + " expected jumps, above the budget of " +
                                std::to_string(opts.max_expected_jumps) + "; raise eps or the budget");
  }
  Engine rng = make_engine(seed);
  std::poisson_distribution<long long> count_dist(expected);
  const auto count = static_cast<std::size_t>(count_dist(rng));
  std::vector<Jump> jumps(count);
  for (auto& j : jumps) {
    j.time = horizon * uniform_open_closed(rng);
    j.size = std::max(eps, tail.inverse_tail(mass * uniform_open_closed(rng)));
  }
  std::sort(jumps.begin(), jumps.end(), [](const Jump& a, const Jump& b) { return a.time < b.time; });
  for (std::size_t i = 1; i < jumps.size(); ++i) {
    if (jumps[i].time <= jumps[i - 1].time) {
      jumps[i].time = std::nextafter(jumps[i - 1].time, std::numeric_limits<double>::infinity());
    }
  }
  // A tie at the horizon pushes past it; pull the run back below.
  for (std::size_t i = jumps.size(); i-- > 0 && jumps[i].time > horizon;) {
    jumps[i].time = (i + 1 < jumps.size()) ? std::nextafter(jumps[i + 1].time, 0.0) : horizon;
  }
  return JumpPath(horizon, eps, seed, std::move(jumps));
}

inline JumpPath sample_jump_path(const LevyDensity& levy, double horizon, double eps, std::uint64_t seed,
                                 const SamplingOptions& opts = {}) {
  return sample_jump_path(TailFunction(levy), horizon, eps, seed, opts);
}

struct TruncationDiagnostics {
  double dropped_mass = 0.0;        ///< horizon * int_0^eps x g dx
  double dropped_log_factor = 0.0;  ///< horizon * int_0^eps |F| g dx for the supplied section
};

/// int_0^eps x g(x) dx.
inline double small_jump_mass(const LevyDensity& levy, double eps) {
  if (levy.closed_form()) return -levy.g0() * std::expm1(-levy.rate() * eps) / levy.rate();
  return quad::finite([&](double x) { return levy.x_density(x); }, 0.0, eps).value;
}

inline TruncationDiagnostics small_jump_diagnostics(const LevyDensity& levy, double eps, double horizon,
                                                    const Section& phi = identity_section(), double a = 0.0) {
  if (!(eps > 0.0)) throw std::invalid_argument("small_jump_diagnostics: eps must be > 0");
  TruncationDiagnostics d;
  d.dropped_mass = horizon * small_jump_mass(levy, eps);
  d.dropped_log_factor = horizon * integrate_F(levy, phi, a, eps).absolute;
  return d;
}

}  // namespace levyq
