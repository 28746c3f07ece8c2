#pragma once

// Class-(L) Levy densities: g(x) = g0/x + zeta(x) on (0,1], integrable tail.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "levyq/quadrature.hpp"

namespace levyq {

enum class LevyFamily { Gamma, TemperedLog, Custom };

inline std::string to_string(LevyFamily f) {
  switch (f) {
    case LevyFamily::Gamma: return "gamma";
    case LevyFamily::TemperedLog: return "tempered_log";
    case LevyFamily::Custom: return "custom";
  }
  return "unknown";
}

/**
 * A Levy density g with logarithmic singularity at the origin.
 *
 * Built-in families are g(x) = g0 e^{-bx} / x (Gamma is g0 = b = 1). Custom
 * densities supply g and g0; zeta is always derived as g - g0/x.
 */
class LevyDensity {
 public:
  using Fn = std::function<double(double)>;

  static LevyDensity gamma() { return LevyDensity(LevyFamily::Gamma, 1.0, 1.0, {}); }

  static LevyDensity tempered_log(double g0, double b) {
    if (!(g0 > 0.0) || !(b > 0.0) || !std::isfinite(g0) || !std::isfinite(b))
      throw std::invalid_argument("tempered_log requires g0 > 0 and b > 0");
    return LevyDensity(LevyFamily::TemperedLog, g0, b, {});
  }

  /// No validation here; use make_levy_density() for the checked path.
  static LevyDensity custom(Fn g, double g0, std::string label = "custom") {
    if (!g) throw std::invalid_argument("custom Levy density needs a density function");
    if (!(g0 >= 0.0) || !std::isfinite(g0)) throw std::invalid_argument("custom Levy density needs g0 >= 0");
    LevyDensity d(LevyFamily::Custom, g0, 0.0, std::move(g));
    d.label_ = std::move(label);
    return d;
  }

  LevyFamily family() const noexcept { return family_; }
  double g0() const noexcept { return g0_; }
  /// Exponential tempering rate b for the closed-form families, 0 for Custom.
  double rate() const noexcept { return rate_; }
  const std::string& label() const noexcept { return label_; }
  bool closed_form() const noexcept { return family_ != LevyFamily::Custom; }

  double density(double x) const {
    if (closed_form()) return g0_ * std::exp(-rate_ * x) / x;
    return custom_(x);
  }

  double log_density(double x) const {
    if (closed_form()) return std::log(g0_) - rate_ * x - std::log(x);
    return std::log(custom_(x));
  }

  /// x g(x); bounded near the origin.
  double x_density(double x) const {
    if (closed_form()) return g0_ * std::exp(-rate_ * x);
    return x * custom_(x);
  }

  double zeta(double x) const {
    if (closed_form()) return g0_ * std::expm1(-rate_ * x) / x;
    return custom_(x) - g0_ / x;
  }

  /// log g(y) - log g(x), without forming log y and log x separately.
  double log_ratio(double y, double x) const {
    if (closed_form()) return -rate_ * (y - x) - std::log(y / x);
    return std::log(custom_(y) / custom_(x));
  }

 private:
  LevyDensity(LevyFamily f, double g0, double b, Fn g)
      : family_(f), g0_(g0), rate_(b), custom_(std::move(g)), label_(to_string(f)) {}

  LevyFamily family_;
  double g0_;
  double rate_;
  Fn custom_;
  std::string label_;
};

/**
 * Integral of f(x) g(x) over (0, upper]. The (0, min(1, upper)] part runs in
 * the logarithmic variable so the g0/x singularity never meets a division.
 */
template <class F>
QuadResult integrate_against_levy(const LevyDensity& levy, F&& f,
                                  double upper = std::numeric_limits<double>::infinity(),
                                  double tol = quad::kDefaultTol) {
  const double split = std::min(1.0, upper);
  const double u0 = -std::log(split);
  QuadResult near;
  {
    auto integrand = [&](double v) {
      const double x = std::exp(-(u0 + v));
      if (x <= 0.0) return 0.0;
      return f(x) * levy.x_density(x);
    };
    near = quad::semi_infinite(integrand, 0.0, tol);
  }
  QuadResult far;
  if (upper > 1.0) {
    auto integrand = [&](double x) { return f(x) * levy.density(x); };
    far = std::isinf(upper) ? quad::semi_infinite(integrand, 1.0, tol) : quad::finite(integrand, 1.0, upper, tol);
  }
  return {near.value + far.value, near.error + far.error, near.l1 + far.l1};
}

/// Psi(lambda) = int (1 - e^{-lambda x}) g(x) dx.
inline double laplace_exponent(const LevyDensity& levy, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("laplace_exponent: lambda must be >= 0");
  if (lambda == 0.0) return 0.0;
  if (levy.closed_form()) return levy.g0() * std::log1p(lambda / levy.rate());
  auto r = integrate_against_levy(levy, [lambda](double x) { return -std::expm1(-lambda * x); });
  if (r.error > 1e-8 * std::max(1.0, std::abs(r.value)))
    throw QuadratureError("laplace_exponent: quadrature did not converge", r.error);
  return r.value;
}

struct ClassLReport {
  double tail_integral = 0.0;   ///< int_1^inf g
  double zeta_integral = 0.0;   ///< int_0^1 |zeta|
  bool positive = true;
  bool h1 = false;
  bool h2 = false;
  std::vector<std::string> messages;
  bool passed() const noexcept { return positive && h1 && h2; }
};

namespace detail {

/// Sums pieces of a nonnegative integral over a doubling partition and
/// reports whether it stabilised to `tol`.
template <class Piece>
std::pair<double, bool> doubling_sum(Piece&& piece, int max_pieces, double tol) {
  double total = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 0; k < max_pieces; ++k) {
    double p = 0.0;
    try {
      p = piece(k);
    } catch (const QuadratureError&) {
      return {total, false};
    }
    if (!std::isfinite(p)) return {total, false};
    total += p;
    if (p <= tol * std::max(1.0, total) && p <= previous) return {total, true};
    previous = p;
  }
  return {total, false};
}

}  // namespace detail

/**
 * Numerical check of (H1) and (H2): positivity of g on a log grid, finiteness
 * of int_1^inf g and int_0^1 |zeta|. Each integral is accumulated over a
 * doubling partition until the newest piece falls below `tol`.
 */
inline ClassLReport validate_class_L(const LevyDensity& levy, double tol = 1e-8) {
  ClassLReport rep;
  for (int i = 0; i <= 280; ++i) {
    const double x = std::pow(10.0, -12.0 + 14.0 * i / 280.0);
    const double g = levy.density(x);
    if (!(g > 0.0) || !std::isfinite(g)) {
      rep.positive = false;
      rep.messages.push_back("g(" + std::to_string(x) + ") is not positive and finite");
      break;
    }
  }
  // (H1): pieces [2^k, 2^{k+1}] of int_1^inf g.
  auto [tail, tail_ok] = detail::doubling_sum(
      [&](int k) {
        const double a = std::ldexp(1.0, k);
        return quad::finite([&](double x) { return levy.density(x); }, a, 2.0 * a, 1e-10).value;
      },
      64, tol);
  rep.tail_integral = tail;
  rep.h1 = tail_ok;
  if (!tail_ok) rep.messages.push_back("(H1) int_1^inf g(x) dx does not converge numerically");
  // (H2): pieces in u = -log x over [2^k - 1, 2^{k+1} - 1].
  auto [zint, zeta_ok] = detail::doubling_sum(
      [&](int k) {
        const double ua = std::ldexp(1.0, k) - 1.0;
        const double ub = std::ldexp(1.0, k + 1) - 1.0;
        return quad::finite(
                   [&](double u) {
                     const double x = std::exp(-u);
                     if (x <= 0.0) return 0.0;
                     return std::abs(levy.zeta(x)) * x;
                   },
                   ua, ub, 1e-10)
            .value;
      },
      10, tol);
  rep.zeta_integral = zint;
  rep.h2 = zeta_ok;
  if (!zeta_ok) rep.messages.push_back("(H2) int_0^1 |zeta(x)| dx does not converge numerically");
  return rep;
}

struct LevyParams {
  double g0 = 1.0;
  double b = 1.0;
  LevyDensity::Fn custom;
  std::string label = "custom";
};

inline LevyDensity make_levy_density(LevyFamily family, const LevyParams& params = {}) {
  switch (family) {
    case LevyFamily::Gamma: return LevyDensity::gamma();
    case LevyFamily::TemperedLog: return LevyDensity::tempered_log(params.g0, params.b);
    case LevyFamily::Custom: {
      if (!(params.g0 > 0.0)) throw std::invalid_argument("custom Levy density requires g0 > 0");
      auto levy = LevyDensity::custom(params.custom, params.g0, params.label);
      const auto rep = validate_class_L(levy);
      if (!rep.passed()) {
        std::string msg = "custom Levy density is not of class (L):";
        for (const auto& m : rep.messages) msg += " " + m + ";";
        throw std::invalid_argument(msg);
      }
      return levy;
    }
  }
  throw std::invalid_argument("unknown Levy family");
}

/**
 * One time-section phi = H(s, .) of a transformation: phi(0) = 0 and
 * kappa^{-1} <= phi' <= kappa with alpha-Hoelder phi'.
 */
struct Section {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  double kappa = 1.0;
  double alpha = 0.5;

  double slope_at_zero() const { return derivative(0.0); }
};

inline Section identity_section() {
  return {[](double x) { return x; }, [](double) { return 1.0; }, 1.0, 0.5};
}

/// F_{a,phi}(x) = phi'(x) g(phi(x)) / g(x) e^{-a phi(x)} - 1.
inline double f_section(const LevyDensity& levy, const Section& phi, double a, double x) {
  const double y = phi.value(x);
  return std::expm1(std::log(phi.derivative(x)) + levy.log_ratio(y, x) - a * y);
}

struct FIntegral {
  double signed_value = 0.0;
  double absolute = 0.0;
  double error = 0.0;
};

/**
 * int_0^upper F_{a,phi} g dx and int_0^upper |F_{a,phi}| g dx. Over the whole
 * half line the signed value equals -Psi(a) - g0 log phi'(0).
 */
inline FIntegral integrate_F(const LevyDensity& levy, const Section& phi, double a,
                             double upper = std::numeric_limits<double>::infinity()) {
  if (!(a >= 0.0)) throw std::invalid_argument("integrate_F: a must be >= 0");
  auto F = [&](double x) { return f_section(levy, phi, a, x); };
  const auto s = integrate_against_levy(levy, F, upper);
  const auto m = integrate_against_levy(levy, [&](double x) { return std::abs(F(x)); }, upper);
  if (!std::isfinite(m.value)) throw QuadratureError("integrate_F: |F| g is not integrable", m.error);
  return {s.value, m.value, s.error + m.error};
}

/// Target of integrate_F over (0, inf): -Psi(a) - g0 log phi'(0).
inline double integrate_F_target(const LevyDensity& levy, const Section& phi, double a) {
  return -laplace_exponent(levy, a) - levy.g0() * std::log(phi.slope_at_zero());
}

/// Explicit constant bounding int |F_{a,phi}| g dx:
/// 2 a g0 + g0 kappa^2 / (alpha (1 + alpha)) + 2 int_{1/kappa}^inf g + 4 int_0^1 |zeta|.
inline double integrate_F_bound(const LevyDensity& levy, double kappa, double alpha, double a) {
  const double lower = 1.0 / kappa;
  double tail = 0.0;
  if (lower < 1.0) {
    tail = quad::finite([&](double x) { return levy.density(x); }, lower, 1.0).value;
  }
  tail += quad::semi_infinite([&](double x) { return levy.density(x); }, 1.0).value;
  if (lower > 1.0) tail -= quad::finite([&](double x) { return levy.density(x); }, 1.0, lower).value;
  const double zeta_l1 =
      integrate_against_levy(
          levy, [&](double x) { return std::abs(levy.zeta(x)) / levy.density(x); }, 1.0)
          .value;
  const double g0 = levy.g0();
  return 2.0 * a * g0 + g0 * kappa * kappa / (alpha * (1.0 + alpha)) + 2.0 * tail + 4.0 * zeta_l1;
}

/// Gamma(t, 1) density p_t(x).
inline double gamma_marginal_density(double t, double x) {
  if (!(t > 0.0)) throw std::invalid_argument("gamma_marginal_density: t must be > 0");
  if (x < 0.0) return 0.0;
  if (x == 0.0) {
    if (t < 1.0) return std::numeric_limits<double>::infinity();
    return t == 1.0 ? 1.0 : 0.0;
  }
  return std::exp((t - 1.0) * std::log(x) - x - std::lgamma(t));
}

}  // namespace levyq
