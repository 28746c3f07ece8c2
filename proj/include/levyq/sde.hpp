#pragma once

// Pathwise solutions of dX = m(t, X_-) dxi for a truncated subordinator and
// the change of measure that identifies their law.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "levyq/density.hpp"
#include "levyq/path.hpp"

namespace levyq {

class Coefficient {
 public:
  using Fn = std::function<double(double t, double x)>;

  Coefficient(std::string name, Fn m, double m_lo, double m_hi, double lipschitz, bool time_dependent,
              bool state_dependent)
      : name_(std::move(name)),
        m_(std::move(m)),
        m_lo_(m_lo),
        m_hi_(m_hi),
        lipschitz_(lipschitz),
        time_dependent_(time_dependent),
        state_dependent_(state_dependent) {
    if (!m_) throw std::invalid_argument("Coefficient: function is required");
    if (!(m_lo > 0.0) || !(m_hi >= m_lo) || !std::isfinite(m_hi))
      throw std::invalid_argument("Coefficient '" + name_ + "': need 0 < m_lo <= m_hi < inf");
    if (!(lipschitz >= 0.0)) throw std::invalid_argument("Coefficient '" + name_ + "': Lipschitz constant must be >= 0");
  }

  const std::string& name() const noexcept { return name_; }
  double operator()(double t, double x) const { return m_(t, x); }
  double lower() const noexcept { return m_lo_; }
  double upper() const noexcept { return m_hi_; }
  double lipschitz() const noexcept { return lipschitz_; }
  bool time_dependent() const noexcept { return time_dependent_; }
  bool state_dependent() const noexcept { return state_dependent_; }
  bool is_constant() const noexcept { return !time_dependent_ && !state_dependent_; }

 private:
  std::string name_;
  Fn m_;
  double m_lo_;
  double m_hi_;
  double lipschitz_;
  bool time_dependent_;
  bool state_dependent_;
};

namespace coefficients {

inline Coefficient constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("constant coefficient requires c > 0");
  return Coefficient("constant", [c](double, double) { return c; }, c, c, 0.0, false, false);
}

/// m(t, x) = (1 + x) / (1 + 2x), decreasing from 1 to 1/2.
inline Coefficient rational_decay() {
  return Coefficient(
      "rational_decay", [](double, double x) { return (1.0 + x) / (1.0 + 2.0 * x); }, 0.5, 1.0, 1.0, false, true);
}

/// m(t, x) = a0 + a1 cos(2 pi t).
inline Coefficient time_periodic(double a0, double a1) {
  if (!(a0 - std::abs(a1) > 0.0)) throw std::invalid_argument("time_periodic coefficient requires a0 > |a1|");
  return Coefficient(
      "time_periodic", [a0, a1](double t, double) { return a0 + a1 * std::cos(2.0 * std::numbers::pi * t); },
      a0 - std::abs(a1), a0 + std::abs(a1), 0.0, true, false);
}

}  // namespace coefficients

struct CoefficientReport {
  double min_m = std::numeric_limits<double>::infinity();
  double max_m = -std::numeric_limits<double>::infinity();
  double max_slope = 0.0;
  bool passed = false;
};

/// Grid check of the declared bounds and Lipschitz constant on [0, t_max] x [0, x_max].
inline CoefficientReport validate_coefficient(const Coefficient& m, double t_max = 2.0, double x_max = 20.0) {
  CoefficientReport rep;
  constexpr int kT = 9;
  constexpr int kX = 201;
  for (int i = 0; i < kT; ++i) {
    const double t = t_max * i / (kT - 1);
    double prev_x = 0.0;
    double prev = 0.0;
    for (int j = 0; j < kX; ++j) {
      const double x = x_max * std::pow(static_cast<double>(j) / (kX - 1), 2.0);
      const double v = m(t, x);
      if (!std::isfinite(v)) return rep;
      rep.min_m = std::min(rep.min_m, v);
      rep.max_m = std::max(rep.max_m, v);
      if (j > 0) rep.max_slope = std::max(rep.max_slope, std::abs(v - prev) / (x - prev_x));
      prev = v;
      prev_x = x;
    }
  }
  constexpr double kSlack = 1e-12;
  rep.passed = rep.min_m >= m.lower() - kSlack && rep.max_m <= m.upper() + kSlack &&
               rep.max_slope <= m.lipschitz() * (1.0 + 1e-9) + kSlack;
  return rep;
}

/// X jumps by m(s_i, X_{s_i-}) * size at each jump of the driver.
inline JumpPath solve_sde(const JumpPath& path, const Coefficient& m) {
  std::vector<Jump> out(path.jumps().begin(), path.jumps().end());
  double x = 0.0;
  for (auto& j : out) {
    j.size = m(j.time, x) * j.size;
    x += j.size;
  }
  return JumpPath(path.horizon(), path.truncation() * m.lower(), path.seed(), std::move(out));
}

/// H(s, x) = x / m(s, xi_{s-}).
inline PredictableTransform sde_transform(const Coefficient& m) {
  auto mp = std::make_shared<Coefficient>(m);
  PredictableTransform tr;
  tr.H = [mp](double s, double left, double x) { return x / (*mp)(s, left); };
  tr.log_h = [mp](double s, double left, double) { return -std::log((*mp)(s, left)); };
  tr.time_dependent = m.time_dependent();
  tr.state_dependent = m.state_dependent();
  tr.kappa = std::max({2.0, m.upper(), 1.0 / m.lower()});
  tr.alpha = 0.5;
  return tr;
}

/// log M^H_t for H(s, x) = x / m(s, xi_{s-}); E[f(X_t)] = E[f(xi_t) M^H_t].
inline LogDensity sde_change_of_measure(const JumpPath& path, const Coefficient& m, const LevyDensity& levy,
                                        std::optional<double> t = std::nullopt, const DensityOptions& opts = {}) {
  return log_density_general(path, sde_transform(m), levy, CadlagStep::constant(0.0), t, opts);
}

}  // namespace levyq
