#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace levyq {

/// Plain description of a step function, as read from a config.
struct StepSpec {
  std::vector<double> breakpoints;
  std::vector<double> values{0.0};
};

/// Right-continuous piecewise-constant function of time: values[i] holds on
/// [breakpoints[i-1], breakpoints[i]), with values.size() == breakpoints.size() + 1.
class CadlagStep {
 public:
  CadlagStep() : values_{0.0} {}

  CadlagStep(std::vector<double> breakpoints, std::vector<double> values)
      : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (values_.size() != breakpoints_.size() + 1)
      throw std::invalid_argument("CadlagStep: need exactly one more value than breakpoints");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
      if (!(breakpoints_[i] > breakpoints_[i - 1])) throw std::invalid_argument("CadlagStep: breakpoints must increase");
    for (double v : values_)
      if (!std::isfinite(v)) throw std::invalid_argument("CadlagStep: values must be finite");
  }

  static CadlagStep constant(double v) { return CadlagStep({}, {v}); }

  double operator()(double t) const {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
  }

  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& values() const noexcept { return values_; }
  bool is_constant() const noexcept { return breakpoints_.empty(); }
  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

  /// Exact int_a^b f(value(s)) ds.
  template <class F>
  double integrate(F&& f, double a, double b) const {
    if (!(b > a)) return 0.0;
    double total = 0.0;
    double lo = a;
    for (std::size_t i = 0; i <= breakpoints_.size(); ++i) {
      const double hi = (i < breakpoints_.size()) ? std::min(b, breakpoints_[i]) : b;
      if (hi > lo) {
        total += f(values_[i]) * (hi - lo);
        lo = hi;
      }
      if (lo >= b) break;
    }
    return total;
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

}  // namespace levyq
