#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/special_functions/expint.hpp>

#include "levyq/levy.hpp"
#include "levyq/quadrature.hpp"

namespace levyq {

/// Fritsch-Carlson monotone cubic Hermite interpolant on strictly monotone data.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;

  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw std::invalid_argument("MonotoneCubic needs >= 2 matching points");
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!(x_[i + 1] > x_[i])) throw std::invalid_argument("MonotoneCubic abscissae must increase");
      delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    }
    d_.assign(n, 0.0);
    d_[0] = delta[0];
    d_[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      d_[i] = (delta[i - 1] * delta[i] <= 0.0) ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (delta[i] == 0.0) {
        d_[i] = d_[i + 1] = 0.0;
        continue;
      }
      const double a = d_[i] / delta[i];
      const double b = d_[i + 1] / delta[i];
      const double r = a * a + b * b;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        d_[i] = tau * a * delta[i];
        d_[i + 1] = tau * b * delta[i];
      }
    }
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = (it == x_.begin()) ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    i = std::min(i, x_.size() - 2);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
           (t3 - t2) * h * d_[i + 1];
  }

  double front() const { return x_.front(); }
  double back() const { return x_.back(); }

 private:
  std::vector<double> x_, y_, d_;
};

/**
 * Tail mass nu_bar(x) = int_x^inf g(y) dy of a class-(L) density, cached on a
 * log-spaced grid. Closed-form families evaluate g0 E1(b x) directly; custom
 * densities anchor a local quadrature at the nearest cached node. The inverse
 * uses the cached interpolant as a starting point and polishes with Newton.
 */
class TailFunction {
 public:
  static constexpr double kGridMin = 1e-12;
  static constexpr std::size_t kGridPoints = 2048;
  static constexpr double kTailFloor = 1e-14;

  explicit TailFunction(LevyDensity levy) : levy_(std::move(levy)) { build(); }

  const LevyDensity& levy() const noexcept { return levy_; }
  double x_min() const noexcept { return std::exp(log_x_.front()); }
  double x_max() const noexcept { return std::exp(log_x_.back()); }

  double tail_mass(double x) const {
    if (!(x > 0.0)) throw std::invalid_argument("tail_mass: x must be > 0");
    if (levy_.closed_form()) return levy_.g0() * boost::math::expint(1, levy_.rate() * x);
    return custom_tail(x);
  }

  /// Cached interpolant only; used for seeding the inverse and for diagnostics.
  double interpolated_tail(double x) const { return std::exp(forward_(std::log(x))); }

  double inverse_tail(double u) const {
    if (!(u > 0.0) || !std::isfinite(u)) throw std::invalid_argument("inverse_tail: u must be > 0");
    const double lu = std::log(u);
    double lx;
    if (lu > log_tail_.front()) {
      // Below the grid: nu_bar ~ g0 log(1/x) + const.
      const double g0 = std::max(levy_.g0(), 1e-300);
      lx = log_x_.front() - (u - std::exp(log_tail_.front())) / g0;
    } else if (lu < log_tail_.back()) {
      lx = log_x_.back();
      while (tail_mass(std::exp(lx)) > u && lx < 700.0) lx += std::log(2.0);
    } else {
      lx = inverse_(-lu);
    }
    return polish(lx, u);
  }

 private:
  void build() {
    double xmax = 1.0;
    while (exact_far_tail(xmax) >= kTailFloor) {
      xmax *= 2.0;
      if (xmax > 1e6) throw std::invalid_argument("tail of the Levy density decays too slowly");
    }
    const double a = std::log(kGridMin);
    const double b = std::log(xmax);
    log_x_.resize(kGridPoints);
    for (std::size_t i = 0; i < kGridPoints; ++i) log_x_[i] = a + (b - a) * static_cast<double>(i) / (kGridPoints - 1);
    std::vector<double> tail(kGridPoints);
    if (levy_.closed_form()) {
      for (std::size_t i = 0; i < kGridPoints; ++i) tail[i] = tail_mass(std::exp(log_x_[i]));
    } else {
      tail.back() = exact_far_tail(std::exp(log_x_.back()));
      for (std::size_t i = kGridPoints - 1; i-- > 0;) {
        tail[i] = tail[i + 1] + segment(std::exp(log_x_[i]), std::exp(log_x_[i + 1]));
      }
    }
    log_tail_.resize(kGridPoints);
    for (std::size_t i = 0; i < kGridPoints; ++i) log_tail_[i] = std::log(tail[i]);
    forward_ = MonotoneCubic(log_x_, log_tail_);
    std::vector<double> neg_lt(kGridPoints), lx(kGridPoints);
    for (std::size_t i = 0; i < kGridPoints; ++i) {
      neg_lt[i] = -log_tail_[i];
      lx[i] = log_x_[i];
    }
    inverse_ = MonotoneCubic(std::move(neg_lt), std::move(lx));
    node_tail_ = std::move(tail);
  }

  double exact_far_tail(double x) const {
    if (levy_.closed_form()) return levy_.g0() * boost::math::expint(1, levy_.rate() * x);
    return quad::semi_infinite([&](double y) { return levy_.density(y); }, x, 1e-13).value;
  }

  /// int_a^b g over a short stretch, in log variable.
  double segment(double a, double b) const {
    return quad::smooth(
               [&](double v) {
                 const double x = std::exp(v);
                 return levy_.x_density(x);
               },
               std::log(a), std::log(b), 1e-14)
        .value;
  }

  double custom_tail(double x) const {
    const double lx = std::log(x);
    if (lx >= log_x_.back()) return exact_far_tail(x);
    if (lx <= log_x_.front()) return node_tail_.front() + segment(x, std::exp(log_x_.front()));
    const auto it = std::upper_bound(log_x_.begin(), log_x_.end(), lx);
    const auto j = static_cast<std::size_t>(it - log_x_.begin());
    return node_tail_[j] + segment(x, std::exp(log_x_[j]));
  }

  /// Newton in log x on nu_bar(x) = u; d nu_bar / d log x = -x g(x).
  double polish(double lx, double u) const {
    for (int iter = 0; iter < 60; ++iter) {
      const double x = std::exp(lx);
      const double resid = tail_mass(x) - u;
      const double slope = levy_.x_density(x);
      if (!(slope > 0.0)) break;
      double step = resid / slope;
      step = std::clamp(step, -2.0, 2.0);
      lx += step;
      // Quadratic convergence: the error after a step below 1e-9 is O(1e-18).
      if (std::abs(step) < 1e-9) break;
    }
    return std::exp(lx);
  }

  LevyDensity levy_;
  std::vector<double> log_x_, log_tail_, node_tail_;
  MonotoneCubic forward_, inverse_;
};

}  // namespace levyq
