#pragma once

/**
 * @file quadrature.hpp
 * @brief Thin adapters over Boost.Math double-exponential and Gauss rules.
 *
 * Integrals against a class-(L) Levy density carry a 1/x singularity at the
 * origin. The helpers here integrate over (0, 1] in the logarithmic variable
 * x = e^{-u}, which turns  f(x) g(x) dx  into  f(e^{-u}) * (x g(x)) du  with a
 * bounded factor x g(x) = g0 + x zeta(x).
 */

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace levyq {

/// Outcome of a numerical integration.
struct QuadResult {
  double value = 0.0;
  double error = 0.0;  ///< achieved error estimate
  double l1 = 0.0;     ///< integral of |f|, as reported by the rule
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved error " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

namespace quad {

inline constexpr double kDefaultTol = 1e-12;

// The rules grow their abscissa tables lazily, so each thread owns one.
inline boost::math::quadrature::tanh_sinh<double>& tanh_sinh_rule() {
  thread_local boost::math::quadrature::tanh_sinh<double> rule(15);
  return rule;
}

inline boost::math::quadrature::exp_sinh<double>& exp_sinh_rule() {
  thread_local boost::math::quadrature::exp_sinh<double> rule(12);
  return rule;
}

template <class F>
QuadResult finite(F&& f, double a, double b, double tol = kDefaultTol) {
  if (!(a < b)) return {};
  QuadResult r;
  try {
    r.value = tanh_sinh_rule().integrate(f, a, b, tol, &r.error, &r.l1);
  } catch (const boost::math::evaluation_error& e) {
    throw QuadratureError(e.what(), std::numeric_limits<double>::infinity());
  }
  if (!std::isfinite(r.value)) throw QuadratureError("tanh-sinh quadrature diverged", r.error);
  return r;
}

/// Integral over [a, infinity).
template <class F>
QuadResult semi_infinite(F&& f, double a, double tol = kDefaultTol) {
  QuadResult r;
  auto shifted = [&](double y) { return f(a + y); };
  try {
    r.value = exp_sinh_rule().integrate(shifted, 0.0, std::numeric_limits<double>::infinity(), tol,
                                        &r.error, &r.l1);
  } catch (const boost::math::evaluation_error& e) {
    throw QuadratureError(e.what(), std::numeric_limits<double>::infinity());
  }
  if (!std::isfinite(r.value)) throw QuadratureError("exp-sinh quadrature diverged", r.error);
  return r;
}

/// Smooth integrand on a short interval: adaptive Gauss-Kronrod (15 point).
template <class F>
QuadResult smooth(F&& f, double a, double b, double tol = kDefaultTol) {
  if (!(a < b)) return {};
  QuadResult r;
  r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 15, tol, &r.error,
                                                                          &r.l1);
  if (!std::isfinite(r.value)) throw QuadratureError("Gauss-Kronrod quadrature diverged", r.error);
  return r;
}

/// Fixed 15-point Gauss-Legendre on [a, b]; used for inter-jump compensator integrals.
template <class F>
double gauss15(F&& f, double a, double b) {
  if (!(a < b)) return 0.0;
  return boost::math::quadrature::gauss<double, 15>::integrate(f, a, b);
}

/// The 15 Gauss-Legendre nodes and weights on [-1, 1], in increasing order.
struct GaussNodes {
  std::array<double, 15> x;
  std::array<double, 15> w;
};

inline const GaussNodes& gauss15_nodes() {
  static const GaussNodes nodes = [] {
    using rule = boost::math::quadrature::gauss<double, 15>;
    const auto& a = rule::abscissa();
    const auto& wt = rule::weights();
    GaussNodes g{};
    // a[0] = 0 for odd orders; a[k] > 0 pairs with -a[k].
    g.x[7] = a[0];
    g.w[7] = wt[0];
    for (std::size_t k = 1; k < a.size(); ++k) {
      g.x[7 + k] = a[k];
      g.w[7 + k] = wt[k];
      g.x[7 - k] = -a[k];
      g.w[7 - k] = wt[k];
    }
    return g;
  }();
  return nodes;
}

/**
 * Integral of f(x) * w(x) over (0, 1], where w(x) = x g(x) is bounded near 0.
 * Evaluated in u = -log x on [0, infinity).
 */
template <class F, class XG>
QuadResult unit_log_scale(F&& f, XG&& xg, double tol = kDefaultTol) {
  QuadResult r;
  auto integrand = [&](double u) {
    const double x = std::exp(-u);
    if (x <= 0.0) return 0.0;
    return f(x) * xg(x);
  };
  try {
    r.value = exp_sinh_rule().integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), tol,
                                        &r.error, &r.l1);
  } catch (const boost::math::evaluation_error& e) {
    throw QuadratureError(e.what(), std::numeric_limits<double>::infinity());
  }
  if (!std::isfinite(r.value)) throw QuadratureError("log-scale quadrature diverged", r.error);
  return r;
}

}  // namespace quad
}  // namespace levyq
