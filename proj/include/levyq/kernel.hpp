#pragma once

/**
 * @file kernel.hpp
 * @brief Transformation kernels k(s, x) with primitive K(s, x) = int_0^x k(s, y) dy.
 *
 * A kernel satisfies kappa^{-1} <= k <= kappa and an alpha-Hoelder bound with
 * constant kappa. It is applied to a path either jump by jump,
 *     size_i -> K(s_i, size_i),
 * or by composition with the running value,
 *     xi_t -> K(t, xi_t),
 * in which case jump i becomes K(s_i, xi_{s_i-} + size_i) - K(s_i, xi_{s_i-}).
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "levyq/levy.hpp"
#include "levyq/path.hpp"
#include "levyq/quadrature.hpp"

namespace levyq {

enum class KernelMode { JumpWise, Composition };

inline std::string to_string(KernelMode m) { return m == KernelMode::JumpWise ? "jump" : "composition"; }

class Kernel {
 public:
  using Fn2 = std::function<double(double, double)>;
  using Fn3 = std::function<double(double, double, double)>;

  /// Optional closed forms; anything missing falls back to quadrature.
  struct Hints {
    Fn2 primitive;
    Fn3 increment;  ///< K(s, x + d) - K(s, x) without cancellation
  };

  Kernel(std::string name, Fn2 k, double kappa, double alpha, bool time_dependent = false, Hints hints = {},
         KernelMode mode = KernelMode::JumpWise)
      : name_(std::move(name)),
        k_(std::move(k)),
        hints_(std::move(hints)),
        kappa_(kappa),
        alpha_(alpha),
        time_dependent_(time_dependent),
        mode_(mode) {
    if (!k_) throw std::invalid_argument("Kernel: derivative function is required");
    if (!(kappa > 1.0) || !std::isfinite(kappa)) throw std::invalid_argument("Kernel: kappa must be > 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("Kernel: alpha must lie in (0, 1)");
  }

  const std::string& name() const noexcept { return name_; }
  double kappa() const noexcept { return kappa_; }
  double alpha() const noexcept { return alpha_; }
  KernelMode mode() const noexcept { return mode_; }
  bool time_dependent() const noexcept { return time_dependent_; }
  bool has_primitive() const noexcept { return static_cast<bool>(hints_.primitive); }

  Kernel with_mode(KernelMode m) const {
    Kernel copy = *this;
    copy.mode_ = m;
    return copy;
  }

  double derivative(double s, double x) const { return k_(s, x); }

  double primitive(double s, double x) const {
    if (!(x >= 0.0)) throw std::invalid_argument("Kernel::primitive: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (hints_.primitive) return hints_.primitive(s, x);
    return quad::smooth([&](double y) { return k_(s, y); }, 0.0, x, 1e-13).value;
  }

  double increment(double s, double x, double d) const {
    if (d == 0.0) return 0.0;
    if (hints_.increment) return hints_.increment(s, x, d);
    if (x == 0.0) return primitive(s, d);
    if (hints_.primitive && d > 1e-3 * x) return hints_.primitive(s, x + d) - hints_.primitive(s, x);
    return quad::smooth([&](double y) { return k_(s, y); }, x, x + d, 1e-13).value;
  }

  /// J(s, y): the x with K(s, x) = y. Safeguarded Newton inside [y/kappa, kappa y].
  double inverse(double s, double y) const {
    if (!(y >= 0.0)) throw std::invalid_argument("inverse_kernel: y must be >= 0");
    if (y == 0.0) return 0.0;
    double lo = y / kappa_;
    double hi = y * kappa_;
    double x = std::clamp(y / k_(s, 0.0), lo, hi);
    for (int iter = 0; iter < 200; ++iter) {
      const double r = primitive(s, x) - y;
      if (r > 0.0) hi = std::min(hi, x);
      else lo = std::max(lo, x);
      double next = x - r / k_(s, x);
      if (!(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
      const double step = std::abs(next - x);
      x = next;
      if (step <= 1e-15 * x || hi - lo <= 1e-15 * x) break;
    }
    return x;
  }

  /// phi = K(s, .) as a Section for integrate_F.
  Section section(double s) const {
    return {[this, s](double x) { return primitive(s, x); }, [this, s](double x) { return k_(s, x); }, kappa_,
            alpha_};
  }

  /// phi(x) = K(s, base + x) - K(s, base).
  Section shifted_section(double s, double base) const {
    return {[this, s, base](double x) { return increment(s, base, x); },
            [this, s, base](double x) { return k_(s, base + x); }, kappa_, alpha_};
  }

 private:
  std::string name_;
  Fn2 k_;
  Hints hints_;
  double kappa_;
  double alpha_;
  bool time_dependent_;
  KernelMode mode_;
};

inline double kernel_primitive(const Kernel& kernel, double s, double x) { return kernel.primitive(s, x); }
inline double inverse_kernel(const Kernel& kernel, double s, double y) { return kernel.inverse(s, y); }

/// The inverse transformation J(s, .) packaged as a kernel: j(s, y) = 1 / k(s, J(s, y)).
inline Kernel inverse_of(const Kernel& kernel) {
  auto base = std::make_shared<Kernel>(kernel);
  Kernel::Hints hints;
  hints.primitive = [base](double s, double y) { return base->inverse(s, y); };
  hints.increment = [base](double s, double y, double d) {
    const double x0 = base->inverse(s, y);
    // J(s, y + d) - x0 solves K(s, x0 + e) - K(s, x0) = d for e.
    double lo = d / base->kappa();
    double hi = d * base->kappa();
    double e = std::clamp(d / base->derivative(s, x0), lo, hi);
    for (int iter = 0; iter < 200; ++iter) {
      const double r = base->increment(s, x0, e) - d;
      if (r > 0.0) hi = std::min(hi, e);
      else lo = std::max(lo, e);
      double next = e - r / base->derivative(s, x0 + e);
      if (!(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
      const double step = std::abs(next - e);
      e = next;
      if (step <= 1e-15 * e || hi - lo <= 1e-15 * e) break;
    }
    return e;
  };
  return Kernel(
      "inverse(" + kernel.name() + ")", [base](double s, double y) { return 1.0 / base->derivative(s, base->inverse(s, y)); },
      kernel.kappa(), kernel.alpha(), kernel.time_dependent(), std::move(hints), kernel.mode());
}

// ---------------------------------------------------------------------------
// Built-in kernels

namespace kernels {

inline Kernel identity() {
  return Kernel("identity", [](double, double) { return 1.0; }, 2.0, 0.5, false,
                {[](double, double x) { return x; }, [](double, double, double d) { return d; }});
}

inline Kernel linear(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("linear kernel requires c > 0");
  const double kappa = std::max({c, 1.0 / c, 1.5});
  return Kernel("linear", [c](double, double) { return c; }, kappa, 0.5, false,
                {[c](double, double x) { return c * x; }, [c](double, double, double d) { return c * d; }});
}

/// k(s, x) = 1 + a e^{-b x}.
inline Kernel damped_exp(double a, double b) {
  if (!(a > -1.0) || !(b > 0.0)) throw std::invalid_argument("damped_exp kernel requires a > -1 and b > 0");
  double kappa = std::max({2.0, 1.0 + std::abs(a), std::abs(a) * std::max(1.0, b)});
  if (a < 0.0) kappa = std::max(kappa, 1.0 / (1.0 + a));
  return Kernel(
      "damped_exp", [a, b](double, double x) { return 1.0 + a * std::exp(-b * x); }, kappa, 0.9, false,
      {[a, b](double, double x) { return x - (a / b) * std::expm1(-b * x); },
       [a, b](double, double x, double d) { return d - (a / b) * std::exp(-b * x) * std::expm1(-b * d); }});
}

namespace detail {
/// q(u) = 1 - (1 + u) e^{-u}, accurate for small u.
inline double one_minus_poly_exp(double u) {
  if (u < 0.1) {
    // sum_{n >= 2} (-1)^n (n - 1) u^n / n!
    double term = u * u / 2.0;  // u^n / n! at n = 2
    double sum = 0.0;
    for (int n = 2; n < 30; ++n) {
      sum += ((n % 2 == 0) ? 1.0 : -1.0) * (n - 1) * term;
      term *= u / (n + 1);
    }
    return sum;
  }
  return 1.0 - (1.0 + u) * std::exp(-u);
}
}  // namespace detail

/// k(s, x) = 1 + a (1 - e^{-sqrt x}); 1/2-Hoelder at the origin.
inline Kernel holder(double a) {
  if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("holder kernel requires a >= 0");
  return Kernel(
      "holder", [a](double, double x) { return 1.0 - a * std::expm1(-std::sqrt(x)); }, std::max(2.0, 1.0 + a), 0.5,
      false,
      {[a](double, double x) { return (1.0 + a) * x - 2.0 * a * detail::one_minus_poly_exp(std::sqrt(x)); },
       [a](double, double x, double d) {
         // q(v) - q(u) = e^{-u} (q(h) - u expm1(-h)) with u = sqrt x, v = sqrt(x + d), h = v - u.
         const double u = std::sqrt(x);
         const double v = std::sqrt(x + d);
         const double h = d / (u + v);
         const double dq = std::exp(-u) * (detail::one_minus_poly_exp(h) - u * std::expm1(-h));
         return (1.0 + a) * d - 2.0 * a * dq;
       }});
}

/// k(s, x) = c0 + c1 sin(2 pi s); deterministic time scaling.
inline Kernel modulated(double c0, double c1) {
  if (!(c0 - std::abs(c1) > 0.0)) throw std::invalid_argument("modulated kernel requires c0 > |c1|");
  const double kappa = std::max({2.0, c0 + std::abs(c1), 1.0 / (c0 - std::abs(c1))});
  auto c = [c0, c1](double s) { return c0 + c1 * std::sin(2.0 * std::numbers::pi * s); };
  return Kernel("modulated", [c](double s, double) { return c(s); }, kappa, 0.5, true,
                {[c](double s, double x) { return c(s) * x; }, [c](double s, double, double d) { return c(s) * d; }});
}

/// k(s, x) = 1 + a w(s) e^{-x}, w(s) = (1 + sin(2 pi s)) / 2.
inline Kernel modulated_exp(double a) {
  if (!(a >= 0.0)) throw std::invalid_argument("modulated_exp kernel requires a >= 0");
  auto w = [](double s) { return 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * s)); };
  return Kernel(
      "modulated_exp", [a, w](double s, double x) { return 1.0 + a * w(s) * std::exp(-x); }, std::max(2.0, 1.0 + a),
      0.9, true,
      {[a, w](double s, double x) { return x - a * w(s) * std::expm1(-x); },
       [a, w](double s, double x, double d) { return d - a * w(s) * std::exp(-x) * std::expm1(-d); }});
}

/// k(s, x) = 1 + a cos(pi x) on [0, 1]; K(s, 1) = 1.
inline Kernel cosine_bridge(double a) {
  if (!(std::abs(a) < 1.0)) throw std::invalid_argument("cosine_bridge kernel requires |a| < 1");
  const double pi = std::numbers::pi;
  const double kappa = std::max({2.0, 1.0 + std::abs(a), 1.0 / (1.0 - std::abs(a)), std::abs(a) * pi});
  return Kernel(
      "cosine_bridge", [a, pi](double, double x) { return 1.0 + a * std::cos(pi * x); }, kappa, 0.9, false,
      {[a, pi](double, double x) { return x + a * std::sin(pi * x) / pi; },
       [a, pi](double, double x, double d) {
         return d + (2.0 * a / pi) * std::cos(pi * (x + 0.5 * d)) * std::sin(0.5 * pi * d);
       }},
      KernelMode::Composition);
}

/// k(s, x) = 1 + a (2x - 1) on [0, 1]; K(s, 1) = 1.
inline Kernel quadratic_bridge(double a) {
  if (!(std::abs(a) < 1.0)) throw std::invalid_argument("quadratic_bridge kernel requires |a| < 1");
  const double kappa = std::max({2.0, 1.0 + std::abs(a), 1.0 / (1.0 - std::abs(a)), 2.0 * std::abs(a)});
  return Kernel(
      "quadratic_bridge", [a](double, double x) { return 1.0 + a * (2.0 * x - 1.0); }, kappa, 0.9, false,
      {[a](double, double x) { return x + a * (x * x - x); },
       [a](double, double x, double d) { return d * (1.0 + a * (2.0 * x + d - 1.0)); }},
      KernelMode::Composition);
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Path transforms

/// xi^K_t = sum_{s <= t} K(s, size): same times, transformed sizes.
inline JumpPath apply_jump_transform(const JumpPath& path, const Kernel& kernel) {
  if (kernel.mode() != KernelMode::JumpWise) throw std::invalid_argument("apply_jump_transform: kernel is not jump-wise");
  std::vector<Jump> out(path.jumps().begin(), path.jumps().end());
  for (auto& j : out) j.size = kernel.primitive(j.time, j.size);
  return JumpPath(path.horizon(), path.truncation() / kernel.kappa(), path.seed(), std::move(out));
}

/// Jump i becomes K(s_i, xi_{s_i}) - K(s_i, xi_{s_i-}).
inline JumpPath apply_composition(const JumpPath& path, const Kernel& kernel) {
  if (kernel.mode() != KernelMode::Composition) throw std::invalid_argument("apply_composition: kernel is not a composition kernel");
  std::vector<Jump> out(path.jumps().begin(), path.jumps().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].size = kernel.increment(out[i].time, path.value_before(i), out[i].size);
  return JumpPath(path.horizon(), path.truncation() / kernel.kappa(), path.seed(), std::move(out));
}

struct GridSpec {
  double s_max = 1.0;
  int s_points = 5;
  double x_max = 10.0;
  int x_points = 160;
};

struct KernelReport {
  double min_k = std::numeric_limits<double>::infinity();
  double max_k = -std::numeric_limits<double>::infinity();
  double max_holder_ratio = 0.0;  ///< max |k(s,x) - k(s,y)| / |x - y|^alpha over grid pairs
  bool bounds_ok = false;
  bool holder_ok = false;
  bool passed() const noexcept { return bounds_ok && holder_ok; }
};

/// Grid check of kappa^{-1} <= k <= kappa and the alpha-Hoelder bound.
inline KernelReport validate_kernel(const Kernel& kernel, const GridSpec& grid = {}) {
  std::vector<double> xs{0.0};
  const int half = grid.x_points / 2;
  for (int i = 0; i < half; ++i) xs.push_back(1e-8 * std::pow(1e8, static_cast<double>(i) / half));
  for (int i = 1; i <= grid.x_points - half; ++i) xs.push_back(grid.x_max * i / (grid.x_points - half));
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  KernelReport rep;
  std::vector<double> ks(xs.size());
  for (int si = 0; si < grid.s_points; ++si) {
    const double s = grid.s_points == 1 ? 0.0 : grid.s_max * si / (grid.s_points - 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ks[i] = kernel.derivative(s, xs[i]);
      rep.min_k = std::min(rep.min_k, ks[i]);
      rep.max_k = std::max(rep.max_k, ks[i]);
    }
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = i + 1; j < xs.size(); ++j)
        rep.max_holder_ratio =
            std::max(rep.max_holder_ratio, std::abs(ks[i] - ks[j]) / std::pow(xs[j] - xs[i], kernel.alpha()));
  }
  const double kappa = kernel.kappa();
  rep.bounds_ok = rep.min_k >= 1.0 / kappa && rep.max_k <= kappa;
  rep.holder_ok = rep.max_holder_ratio <= kappa;
  return rep;
}

/// max over a time grid of |K(s, 1) - 1|.
inline double bridge_normalization_error(const Kernel& kernel, double T, int s_points = 17) {
  double err = 0.0;
  for (int i = 0; i < s_points; ++i) {
    const double s = T * i / (s_points - 1);
    err = std::max(err, std::abs(kernel.primitive(s, 1.0) - 1.0));
  }
  return err;
}

/// k(s, .) / K(s, 1), so that K(s, 1) = 1 for every s.
inline Kernel normalize_bridge(const Kernel& kernel) {
  auto base = std::make_shared<Kernel>(kernel);
  auto norm = [base](double s) { return base->primitive(s, 1.0); };
  Kernel::Hints hints;
  hints.primitive = [base, norm](double s, double x) { return base->primitive(s, x) / norm(s); };
  hints.increment = [base, norm](double s, double x, double d) { return base->increment(s, x, d) / norm(s); };
  return Kernel("normalized(" + kernel.name() + ")", [base, norm](double s, double x) { return base->derivative(s, x) / norm(s); },
                kernel.kappa() * kernel.kappa(), kernel.alpha(), kernel.time_dependent(), std::move(hints),
                kernel.mode());
}

}  // namespace levyq
