#pragma once

/**
 * @file density.hpp
 * @brief Log-space Radon-Nikodym densities of transformed subordinator paths.
 *
 * Every density here has the form
 *
 *   log M_t = int_0^t [ g0 log h(s, 0) + Psi(lambda_s) ] ds
 *           + sum_{s_i <= t} [ log h(s_i, x_i) + log g(H(s_i, x_i)) - log g(x_i) - lambda_{s_i} H(s_i, x_i) ]
 *
 * for a predictable transform H(s, x) with derivative h, where h and H may
 * depend on the left limit of the driving path. The compensator uses the
 * closed form  int nu(dx) F = -Psi(lambda) - g0 log h(s, 0);
 * doleans_evaluate() recomputes the same quantity by quadrature of F against
 * the Levy measure and checks the stochastic-exponential recursion.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "levyq/kernel.hpp"
#include "levyq/levy.hpp"
#include "levyq/path.hpp"
#include "levyq/quadrature.hpp"
#include "levyq/step.hpp"

namespace levyq {

struct LogDensity {
  double log_value = 0.0;
  double compensator = 0.0;
  double jump_sum = 0.0;
  double truncation_bound = 0.0;  ///< estimate of t * int_0^eps |F| g dx for the omitted jumps

  double value() const { return std::exp(log_value); }
};

/// H(s, x) and log h(s, x) given the left limit of the driving path.
struct PredictableTransform {
  using Fn = std::function<double(double s, double left, double x)>;
  Fn H;
  Fn log_h;
  bool time_dependent = false;
  bool state_dependent = false;
  double kappa = 2.0;
  double alpha = 0.5;
};

/// The transform a kernel induces in its own mode.
inline PredictableTransform transform_of(const Kernel& kernel) {
  auto k = std::make_shared<Kernel>(kernel);
  PredictableTransform tr;
  tr.time_dependent = kernel.time_dependent();
  tr.kappa = kernel.kappa();
  tr.alpha = kernel.alpha();
  if (kernel.mode() == KernelMode::JumpWise) {
    tr.H = [k](double s, double, double x) { return k->primitive(s, x); };
    tr.log_h = [k](double s, double, double x) { return std::log(k->derivative(s, x)); };
  } else {
    tr.state_dependent = true;
    tr.H = [k](double s, double left, double x) { return k->increment(s, left, x); };
    tr.log_h = [k](double s, double left, double x) { return std::log(k->derivative(s, left + x)); };
  }
  return tr;
}

struct DensityOptions {
  bool truncation_bound = true;
  /// Multiplies the compensator; 1 gives the density. Other values exist for
  /// sensitivity (mutation) runs of the harness only.
  double compensator_scale = 1.0;
};

namespace detail {

/// A maximal stretch of [0, t] on which the left limit of the path is constant.
struct Segment {
  double start;
  double end;
  double state;
};

inline std::vector<Segment> segments(const JumpPath& path, double t) {
  const std::size_t n = path.count_until(t);
  std::vector<Segment> out;
  out.reserve(n + 1);
  double start = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({start, path[i].time, path.value_before(i)});
    start = path[i].time;
  }
  out.push_back({start, t, n > 0 ? path.value_at(n - 1) : 0.0});
  return out;
}

/// int_a^b f(s) ds for smooth f: Gauss-15 on panels of length <= 0.25.
template <class F>
double smooth_time_integral(F&& f, double a, double b) {
  if (!(b > a)) return 0.0;
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 0.25)));
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) total += quad::gauss15(f, a + p * h, a + (p + 1) * h);
  return total;
}

/// int_0^t f(s, xi_s) ds, piecewise over the jump segments.
template <class F>
double path_time_integral(const JumpPath& path, double t, bool time_dependent, bool state_dependent, F&& f) {
  if (!state_dependent) {
    if (!time_dependent) return t * f(0.0, 0.0);
    return smooth_time_integral([&](double s) { return f(s, 0.0); }, 0.0, t);
  }
  double total = 0.0;
  for (const auto& seg : segments(path, t)) {
    if (!(seg.end > seg.start)) continue;
    if (!time_dependent) {
      total += (seg.end - seg.start) * f(seg.start, seg.state);
    } else {
      total += smooth_time_integral([&](double s) { return f(s, seg.state); }, seg.start, seg.end);
    }
  }
  return total;
}

/// int_0^eps |F(x)| g(x) dx with x = eps v^2 and 15-point Gauss in v.
template <class F>
double small_jump_integral(const LevyDensity& levy, F&& F_of_x, double eps) {
  return quad::gauss15(
      [&](double v) {
        if (v <= 0.0) return 0.0;
        const double x = eps * v * v;
        return std::abs(F_of_x(x)) * levy.x_density(x) * 2.0 / v;
      },
      0.0, 1.0);
}

inline double jump_log_factor(const PredictableTransform& tr, const LevyDensity& levy, double s, double left, double x,
                              double lambda) {
  const double y = tr.H(s, left, x);
  return tr.log_h(s, left, x) + levy.log_ratio(y, x) - lambda * y;
}

}  // namespace detail

/**
 * Log-density of a predictable transform with optional Laplace tilt lambda,
 * evaluated on [0, t] (t defaults to the path horizon).
 */
inline LogDensity log_density_general(const JumpPath& path, const PredictableTransform& tr, const LevyDensity& levy,
                                      const CadlagStep& lambda, std::optional<double> t_opt = std::nullopt,
                                      const DensityOptions& opts = {}) {
  const double t = t_opt.value_or(path.horizon());
  if (!(t >= 0.0) || t > path.horizon()) throw std::out_of_range("log_density: t outside [0, horizon]");
  if (lambda.min_value() < 0.0) throw std::invalid_argument("log_density: lambda must be >= 0");
  LogDensity out;
  const double g0 = levy.g0();
  double comp = 0.0;
  if (g0 != 0.0) {
    comp = g0 * detail::path_time_integral(path, t, tr.time_dependent, tr.state_dependent,
                                           [&](double s, double left) { return tr.log_h(s, left, 0.0); });
  }
  comp += lambda.integrate([&](double v) { return laplace_exponent(levy, v); }, 0.0, t);
  out.compensator = opts.compensator_scale * comp;
  const std::size_t n = path.count_until(t);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& j = path[i];
    sum += detail::jump_log_factor(tr, levy, j.time, path.value_before(i), j.size, lambda(j.time));
  }
  out.jump_sum = sum;
  out.log_value = out.compensator + out.jump_sum;
  if (opts.truncation_bound) {
    const double eps = path.truncation();
    auto local = [&](double s, double left) {
      const double lam = lambda(s);
      return detail::small_jump_integral(
          levy, [&](double x) { return std::expm1(detail::jump_log_factor(tr, levy, s, left, x, lam)); }, eps);
    };
    if (!tr.state_dependent && !tr.time_dependent && lambda.is_constant()) {
      out.truncation_bound = t * local(0.0, 0.0);
    } else {
      double bound = 0.0;
      for (const auto& seg : detail::segments(path, t)) {
        if (!(seg.end > seg.start)) continue;
        // One midpoint evaluation per segment; lambda jumps inside a segment are ignored here.
        bound += (seg.end - seg.start) * local(0.5 * (seg.start + seg.end), seg.state);
      }
      out.truncation_bound = bound;
    }
  }
  return out;
}

/// N^K: jump-wise transform size -> K(s, size).
inline LogDensity log_density_jump(const JumpPath& path, const Kernel& kernel, const LevyDensity& levy,
                                   std::optional<double> t = std::nullopt, const DensityOptions& opts = {}) {
  if (kernel.mode() != KernelMode::JumpWise) throw std::invalid_argument("log_density_jump: kernel is not jump-wise");
  return log_density_general(path, transform_of(kernel), levy, CadlagStep::constant(0.0), t, opts);
}

/// G^K: composition xi_t -> K(t, xi_t).
inline LogDensity log_density_composition(const JumpPath& path, const Kernel& kernel, const LevyDensity& levy,
                                          std::optional<double> t = std::nullopt, const DensityOptions& opts = {}) {
  if (kernel.mode() != KernelMode::Composition)
    throw std::invalid_argument("log_density_composition: kernel is not a composition kernel");
  return log_density_general(path, transform_of(kernel), levy, CadlagStep::constant(0.0), t, opts);
}

/// M^{H, lambda} for the kernel's own mode.
inline LogDensity log_density_tilted(const JumpPath& path, const Kernel& kernel, const LevyDensity& levy,
                                     const CadlagStep& lambda, std::optional<double> t = std::nullopt,
                                     const DensityOptions& opts = {}) {
  return log_density_general(path, transform_of(kernel), levy, lambda, t, opts);
}

/**
 * Gamma-process form of the jump-wise density:
 *   gamma_t - sum K(s, x) + int_0^t log k(s, 0) ds + sum log[k(s, x) x / K(s, x)].
 */
inline LogDensity log_density_jump_gamma(const JumpPath& path, const Kernel& kernel,
                                         std::optional<double> t_opt = std::nullopt) {
  const double t = t_opt.value_or(path.horizon());
  const std::size_t n = path.count_until(t);
  LogDensity out;
  double sum_K = 0.0;
  double prod = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& j = path[i];
    const double K = kernel.primitive(j.time, j.size);
    sum_K += K;
    prod += std::log(kernel.derivative(j.time, j.size)) + std::log(j.size / K);
  }
  const double gamma_t = n > 0 ? path.value_at(n - 1) : 0.0;
  out.compensator = detail::path_time_integral(path, t, kernel.time_dependent(), false,
                                               [&](double s, double) { return std::log(kernel.derivative(s, 0.0)); });
  out.jump_sum = gamma_t - sum_K + prod;
  out.log_value = out.compensator + out.jump_sum;
  return out;
}

/**
 * Gamma-process form of the composition density:
 *   gamma_t - K(t, gamma_t) + int_0^t log k(s, gamma_s) ds + sum log[k(s, gamma_s) x / dK].
 * Uses K(t, gamma_t) for the telescoped sum of increments, which holds for
 * kernels without explicit time dependence.
 */
inline LogDensity log_density_composition_gamma(const JumpPath& path, const Kernel& kernel,
                                                std::optional<double> t_opt = std::nullopt) {
  const double t = t_opt.value_or(path.horizon());
  const std::size_t n = path.count_until(t);
  LogDensity out;
  double prod = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& j = path[i];
    const double dK = kernel.increment(j.time, path.value_before(i), j.size);
    prod += std::log(kernel.derivative(j.time, path.value_at(i))) + std::log(j.size / dK);
  }
  const double gamma_t = n > 0 ? path.value_at(n - 1) : 0.0;
  out.compensator = detail::path_time_integral(
      path, t, kernel.time_dependent(), true, [&](double s, double left) { return std::log(kernel.derivative(s, left)); });
  out.jump_sum = gamma_t - kernel.primitive(t, gamma_t) + prod;
  out.log_value = out.compensator + out.jump_sum;
  return out;
}

// ---------------------------------------------------------------------------
// Doleans-exponential engine

/// F(s, left, x) > -1 with F(s, left, 0) = 0. `breakpoints` lists times where F jumps in s.
struct JumpFunctional {
  std::function<double(double s, double left, double x)> F;
  bool time_dependent = false;
  bool state_dependent = false;
  std::vector<double> breakpoints;
};

/// F = h g(H) / g e^{-lambda H} - 1 for a predictable transform.
inline JumpFunctional density_functional(const PredictableTransform& tr, const LevyDensity& levy,
                                         const CadlagStep& lambda = CadlagStep::constant(0.0)) {
  JumpFunctional f;
  f.F = [tr, levy, lambda](double s, double left, double x) {
    if (x == 0.0) return 0.0;
    return std::expm1(detail::jump_log_factor(tr, levy, s, left, x, lambda(s)));
  };
  f.time_dependent = tr.time_dependent;
  f.state_dependent = tr.state_dependent;
  f.breakpoints = lambda.breakpoints();
  return f;
}

struct DoleansResult {
  std::vector<double> times;     ///< 0, then each jump time <= t, then t
  std::vector<double> x_values;  ///< x^F at those times (right limits)
  std::vector<double> e_values;  ///< E^F at those times
  double log_e = 0.0;            ///< log E^F_t
  double e = 1.0;                ///< E^F_t
  double compensator = 0.0;      ///< int_0^t ds int nu(dx) F(s, x), by quadrature
  double recursion_residual = 0.0;  ///< |E_t - 1 - int_0^t E_{s-} dx^F_s|
  double scale = 1.0;               ///< 1 + sum |E_{s-} F| + int |E_s c(s)| ds, for relative residuals
};

/**
 * Builds x^F_t = sum F(s, dxi_s) - int_0^t ds int nu(dx) F(s, x) and
 * E^F_t = exp(-int int nu F) prod (1 + F), then evaluates the recursion
 * E_t = 1 + int_0^t E_{s-} dx^F_s jump by jump. The inner Levy integrals are
 * computed by quadrature; the drift part of the recursion integral by
 * 15-point Gauss per segment.
 */
inline DoleansResult doleans_evaluate(const JumpFunctional& fn, const JumpPath& path, const LevyDensity& levy,
                                      std::optional<double> t_opt = std::nullopt) {
  const double t = t_opt.value_or(path.horizon());
  if (!(t >= 0.0) || t > path.horizon()) throw std::out_of_range("doleans_evaluate: t outside [0, horizon]");

  auto rate = [&](double s, double left) {
    auto r = integrate_against_levy(levy, [&](double x) { return fn.F(s, left, x); });
    return r.value;
  };

  // Segments split at jumps and at breakpoints of F in s.
  struct Piece {
    double start, end, state;
  };
  std::vector<Piece> pieces;
  for (const auto& seg : detail::segments(path, t)) {
    double lo = seg.start;
    for (double b : fn.breakpoints) {
      if (b > lo && b < seg.end) {
        pieces.push_back({lo, b, seg.state});
        lo = b;
      }
    }
    pieces.push_back({lo, seg.end, seg.state});
  }

  DoleansResult out;
  out.times.push_back(0.0);
  out.x_values.push_back(0.0);
  out.e_values.push_back(1.0);

  double log_e = 0.0;
  double x_val = 0.0;
  double drift_integral = 0.0;  // int E_s c(s) ds
  double jump_integral = 0.0;   // sum E_{s-} F
  double abs_integral = 0.0;    // sum |E_{s-} F| + int |E c| ds
  double cached_rate = std::numeric_limits<double>::quiet_NaN();
  bool have_cached = false;
  const std::size_t n = path.count_until(t);
  std::size_t next_jump = 0;

  for (const auto& pc : pieces) {
    const double len = pc.end - pc.start;
    if (len > 0.0) {
      if (!fn.time_dependent) {
        double c;
        if (!fn.state_dependent && fn.breakpoints.empty()) {
          if (!have_cached) {
            cached_rate = rate(0.0, 0.0);
            have_cached = true;
          }
          c = cached_rate;
        } else {
          c = rate(pc.start, pc.state);
        }
        const double e0 = std::exp(log_e);
        const double piece = quad::gauss15([&](double s) { return e0 * std::exp(-c * (s - pc.start)) * c; }, pc.start, pc.end);
        drift_integral += piece;
        abs_integral += std::abs(piece);
        log_e -= c * len;
        x_val -= c * len;
      } else {
        // Per panel: c at the Gauss nodes, and the running integral C(s) from
        // the interpolating polynomial through those nodes.
        const auto& g = quad::gauss15_nodes();
        std::array<double, 15> bary{};
        for (std::size_t j = 0; j < 15; ++j) {
          double prod = 1.0;
          for (std::size_t k = 0; k < 15; ++k)
            if (k != j) prod *= g.x[j] - g.x[k];
          bary[j] = 1.0 / prod;
        }
        const int panels = std::max(1, static_cast<int>(std::ceil(len / 0.25)));
        const double h = len / panels;
        double total = 0.0;
        for (int p = 0; p < panels; ++p) {
          const double a = pc.start + p * h;
          std::array<double, 15> c{};
          for (std::size_t k = 0; k < 15; ++k) c[k] = rate(a + 0.5 * h * (g.x[k] + 1.0), pc.state);
          auto interp = [&](double u) {  // u in [-1, 1]
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < 15; ++k) {
              const double d = u - g.x[k];
              if (d == 0.0) return c[k];
              num += bary[k] / d * c[k];
              den += bary[k] / d;
            }
            return num / den;
          };
          const double e0 = std::exp(log_e - total);
          double piece = 0.0;
          for (std::size_t k = 0; k < 15; ++k) {
            // C from the panel start to node k.
            const double uk = g.x[k];
            double ck = 0.0;
            for (std::size_t m = 0; m < 15; ++m) {
              const double u = -1.0 + 0.5 * (uk + 1.0) * (g.x[m] + 1.0);
              ck += g.w[m] * interp(u);
            }
            ck *= 0.25 * h * (uk + 1.0);
            piece += g.w[k] * e0 * std::exp(-ck) * c[k];
          }
          piece *= 0.5 * h;
          drift_integral += piece;
          abs_integral += std::abs(piece);
          double panel_total = 0.0;
          for (std::size_t k = 0; k < 15; ++k) panel_total += g.w[k] * c[k];
          total += 0.5 * h * panel_total;
        }
        log_e -= total;
        x_val -= total;
      }
    }
    // A jump sits at the right end of the piece when the piece ends a jump segment.
    if (next_jump < n && path[next_jump].time == pc.end) {
      const auto& j = path[next_jump];
      const double F = fn.F(j.time, path.value_before(next_jump), j.size);
      if (!(F > -1.0)) throw std::domain_error("doleans_evaluate: F <= -1 at a retained jump");
      jump_integral += std::exp(log_e) * F;
      abs_integral += std::abs(std::exp(log_e) * F);
      log_e += std::log1p(F);
      x_val += F;
      out.times.push_back(j.time);
      out.x_values.push_back(x_val);
      out.e_values.push_back(std::exp(log_e));
      ++next_jump;
    }
  }
  out.times.push_back(t);
  out.x_values.push_back(x_val);
  out.e_values.push_back(std::exp(log_e));
  out.log_e = log_e;
  out.e = std::exp(log_e);
  out.compensator = -(log_e - [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::log1p(fn.F(path[i].time, path.value_before(i), path[i].size));
    return s;
  }());
  out.recursion_residual = std::abs(out.e - (1.0 + jump_integral - drift_integral));
  out.scale = 1.0 + abs_integral;
  return out;
}

}  // namespace levyq
