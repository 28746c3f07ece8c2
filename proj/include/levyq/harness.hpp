#pragma once

/**
 * @file harness.hpp
 * @brief Monte Carlo verification of the quasi-invariance identities.
 *
 * Every check is an ensemble of replicates. Replicate i draws from the
 * substream stream_seed(check_seed, i) and writes one observation per
 * report row; aggregation runs in replicate order after all workers finish,
 * so results do not depend on the thread count.
 *
 * With `stability` enabled a replicate samples at eps / 10 and obtains the
 * eps path by dropping jumps, so both estimates share randomness and their
 * difference has a small paired standard error.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "levyq/config.hpp"
#include "levyq/density.hpp"
#include "levyq/dirichlet.hpp"
#include "levyq/kernel.hpp"
#include "levyq/levy.hpp"
#include "levyq/path.hpp"
#include "levyq/rng.hpp"
#include "levyq/sde.hpp"
#include "levyq/tail.hpp"

namespace levyq {

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double ess = 0.0;
};

/// One line of a report.
struct CheckRow {
  std::string check;
  std::string checkpoint;
  double estimate = 0.0;
  double std_error = 0.0;
  double target = std::numeric_limits<double>::quiet_NaN();
  double z = 0.0;
  double ess = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool passed = true;
  double bound = std::numeric_limits<double>::quiet_NaN();  ///< tolerance used by non-z rows
};

struct CheckResult {
  std::string name;
  std::string type;
  std::vector<CheckRow> rows;
  std::vector<std::string> warnings;
  bool passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.passed; });
  }
};

struct RunSettings {
  std::uint64_t seed = 42;
  std::size_t n = 100000;
  double eps = 1e-6;
  int threads = 1;
  double ess_floor = 0.01;
};

/// Threads from LEVYQ_THREADS when set to a positive integer, else `fallback`.
inline int threads_from_env(int fallback = 1) {
  if (const char* v = std::getenv("LEVYQ_THREADS")) {
    char* end = nullptr;
    const long t = std::strtol(v, &end, 10);
    if (end != v && *end == '\0' && t > 0 && t <= 1024) return static_cast<int>(t);
  }
  return fallback;
}

/// Runs fn(i) for i in [0, n) on `threads` workers; rethrows the first exception.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  constexpr std::size_t kChunk = 64;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t start = next.fetch_add(kChunk);
      if (start >= n) return;
      const std::size_t stop = std::min(n, start + kChunk);
      try {
        for (std::size_t i = start; i < stop; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto count = static_cast<std::size_t>(threads);
  for (std::size_t t = 0; t < std::min(count, n); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Estimators

inline double effective_sample_size(std::span<const double> w) {
  double s = 0.0;
  double s2 = 0.0;
  for (double x : w) {
    s += x;
    s2 += x * x;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

/// Plain mean with the sample standard error; ESS of the supplied weights.
inline MCEstimate mean_estimate(std::span<const double> values, std::span<const double> weights = {}) {
  MCEstimate e;
  e.n = values.size();
  if (e.n == 0) return e;
  e.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(e.n);
  double ss = 0.0;
  for (double v : values) ss += (v - e.mean) * (v - e.mean);
  e.std_error = e.n > 1 ? std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n)) : 0.0;
  e.ess = weights.empty() ? static_cast<double>(e.n) : effective_sample_size(weights);
  return e;
}

/// Self-normalized sum(w f) / sum(w) with the delta-method standard error.
inline MCEstimate ratio_estimate(std::span<const double> weighted_values, std::span<const double> weights) {
  MCEstimate e;
  e.n = weights.size();
  const double sw = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double swf = std::accumulate(weighted_values.begin(), weighted_values.end(), 0.0);
  if (!(sw > 0.0)) return e;
  e.mean = swf / sw;
  double ss = 0.0;
  for (std::size_t i = 0; i < e.n; ++i) {
    const double r = weighted_values[i] - e.mean * weights[i];
    ss += r * r;
  }
  const double n = static_cast<double>(e.n);
  e.std_error = e.n > 1 ? std::sqrt(ss * n / (n - 1.0)) / sw : 0.0;
  e.ess = effective_sample_size(weights);
  return e;
}

/// sup |F_w - F| for a weighted sample against a reference CDF.
inline double weighted_ks(std::span<const double> x, std::span<const double> w, const std::function<double(double)>& cdf) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b] || (x[a] == x[b] && a < b); });
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) return 1.0;
  double cum = 0.0;
  double d = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double F = cdf(x[idx[k]]);
    d = std::max(d, std::abs(F - cum / total));
    cum += w[idx[k]];
    // Ties share one step of the empirical CDF.
    if (k + 1 < idx.size() && x[idx[k + 1]] == x[idx[k]]) continue;
    d = std::max(d, std::abs(cum / total - F));
  }
  return d;
}

/// Asymptotic 1% Kolmogorov critical value for an effective sample size.
inline double ks_critical_1pct(double ess) { return 1.6276 / std::sqrt(ess); }

// ---------------------------------------------------------------------------
// Ensemble runner

/// One replicate's contribution to one row.
struct Obs {
  double num = 0.0;
  double den = 1.0;    ///< weight (Mean: ESS only; Ratio: denominator; KS: sample weight)
  double bound = 0.0;  ///< per-replicate truncation bound for the stability comparison
};

enum class RowKind { Mean, Ratio, Max, KS };

struct RowDef {
  std::string label;
  RowKind kind = RowKind::Mean;
  double target = std::numeric_limits<double>::quiet_NaN();  ///< NaN: informational row
  double tolerance = 0.0;                                     ///< Max rows: pass when max <= tolerance
  std::function<double(double)> cdf;                          ///< KS rows
  bool weighted = false;                                      ///< warn on low ESS
};

/// observe(seed, coarse, fine): fill one Obs per row; `fine` is empty without stability.
using Observer = std::function<void(std::uint64_t seed, std::span<Obs> coarse, std::span<Obs> fine)>;

namespace detail {

inline std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct RowStats {
  MCEstimate est;
  std::vector<double> influence;
  double mean_bound = 0.0;
};

inline RowStats row_stats(const RowDef& def, const std::vector<Obs>& table, std::size_t width, std::size_t col,
                          std::size_t n) {
  std::vector<double> num(n);
  std::vector<double> den(n);
  double bound = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Obs& o = table[i * width + col];
    num[i] = o.num;
    den[i] = o.den;
    bound += o.bound;
  }
  RowStats rs;
  rs.mean_bound = bound / static_cast<double>(n);
  switch (def.kind) {
    case RowKind::Mean: {
      rs.est = mean_estimate(num, den);
      rs.influence.resize(n);
      for (std::size_t i = 0; i < n; ++i) rs.influence[i] = num[i] - rs.est.mean;
      break;
    }
    case RowKind::Ratio: {
      rs.est = ratio_estimate(num, den);
      const double mw = std::accumulate(den.begin(), den.end(), 0.0) / static_cast<double>(n);
      rs.influence.resize(n);
      for (std::size_t i = 0; i < n; ++i) rs.influence[i] = (num[i] - rs.est.mean * den[i]) / mw;
      break;
    }
    case RowKind::Max: {
      rs.est.n = n;
      rs.est.mean = *std::max_element(num.begin(), num.end());
      rs.est.ess = static_cast<double>(n);
      break;
    }
    case RowKind::KS: {
      rs.est.n = n;
      rs.est.ess = effective_sample_size(den);
      rs.est.mean = weighted_ks(num, den, def.cdf);
      break;
    }
  }
  return rs;
}

inline bool within_z(double estimate, double target, double se, double z_max, double* z_out) {
  const double diff = estimate - target;
  const double slack = 1e-12 * std::max(1.0, std::abs(target));
  if (se > 0.0) *z_out = diff / se;
  else *z_out = std::abs(diff) <= slack ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  return std::abs(diff) <= z_max * se + slack;
}

inline CheckRow make_row(const std::string& check, const RowDef& def, const RowStats& rs, std::uint64_t seed) {
  CheckRow r;
  r.check = check;
  r.checkpoint = def.label;
  r.estimate = rs.est.mean;
  r.std_error = rs.est.std_error;
  r.ess = rs.est.ess;
  r.n = rs.est.n;
  r.seed = seed;
  switch (def.kind) {
    case RowKind::Mean:
    case RowKind::Ratio:
      r.target = def.target;
      if (std::isnan(def.target)) {
        r.z = 0.0;
        r.passed = true;
      } else {
        r.passed = within_z(r.estimate, def.target, r.std_error, 4.0, &r.z);
      }
      break;
    case RowKind::Max:
      r.target = 0.0;
      r.bound = def.tolerance;
      r.z = 0.0;
      r.passed = r.estimate <= def.tolerance;
      break;
    case RowKind::KS:
      r.target = 0.0;
      r.bound = ks_critical_1pct(rs.est.ess);
      r.z = r.estimate * std::sqrt(rs.est.ess);
      r.passed = r.estimate < r.bound;
      break;
  }
  return r;
}

}  // namespace detail

/**
 * Runs `observer` on n replicates and turns the observations into report
 * rows. With `stability`, also emits the eps / 10 estimate of each Mean or
 * Ratio row and a row comparing the two: it passes when the move is at most
 * the mean per-replicate truncation bound plus two paired standard errors.
 */
inline CheckResult run_ensemble(const std::string& name, const std::string& type, const std::vector<RowDef>& rows,
                                const Observer& observer, const RunSettings& settings, std::size_t n, bool stability) {
  const std::size_t width = rows.size();
  const std::uint64_t master = stream_seed(settings.seed, detail::name_hash(name));
  std::vector<Obs> coarse(n * width);
  std::vector<Obs> fine(stability ? n * width : 0);
  parallel_for(n, settings.threads, [&](std::size_t i) {
    std::span<Obs> c(coarse.data() + i * width, width);
    std::span<Obs> f = stability ? std::span<Obs>(fine.data() + i * width, width) : std::span<Obs>{};
    observer(stream_seed(master, i), c, f);
  });

  CheckResult result;
  result.name = name;
  result.type = type;
  for (std::size_t col = 0; col < width; ++col) {
    const RowDef& def = rows[col];
    const auto rs = detail::row_stats(def, coarse, width, col, n);
    result.rows.push_back(detail::make_row(name, def, rs, settings.seed));
    if (def.weighted && rs.est.ess < settings.ess_floor * static_cast<double>(n)) {
      result.warnings.push_back(name + " [" + def.label + "]: importance weights degenerate (ESS " +
                                std::to_string(rs.est.ess) + " of " + std::to_string(n) + ")");
    }
    if (stability && (def.kind == RowKind::Mean || def.kind == RowKind::Ratio)) {
      const auto rf = detail::row_stats(def, fine, width, col, n);
      RowDef fdef = def;
      fdef.label = def.label + " @eps/10";
      result.rows.push_back(detail::make_row(name, fdef, rf, settings.seed));
      std::vector<double> diff(n);
      for (std::size_t i = 0; i < n; ++i) diff[i] = rs.influence[i] - rf.influence[i];
      const auto d = mean_estimate(diff);
      CheckRow r;
      r.check = name;
      r.checkpoint = def.label + " eps-stability";
      r.estimate = rs.est.mean - rf.est.mean;
      r.std_error = d.std_error;
      r.target = 0.0;
      r.bound = rs.mean_bound;
      r.z = r.std_error > 0.0 ? r.estimate / r.std_error : 0.0;
      r.ess = rs.est.ess;
      r.n = n;
      r.seed = settings.seed;
      r.passed = std::abs(r.estimate) <= r.bound + 2.0 * r.std_error;
      result.rows.push_back(r);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Shared pieces of the checks

namespace detail {

/// The eps path and, with stability, the eps / 10 path it was derived from.
struct PathPair {
  JumpPath coarse;
  JumpPath fine;
};

inline PathPair sample_pair(const TailFunction& tail, double horizon, double eps, std::uint64_t seed, bool stability) {
  PathPair p;
  if (stability) {
    p.fine = sample_jump_path(tail, horizon, eps / 10.0, seed);
    p.coarse = p.fine.raise_truncation(eps);
  } else {
    p.coarse = sample_jump_path(tail, horizon, eps, seed);
  }
  return p;
}

/// The path with one more jump of `size` at (about) time tau.
inline JumpPath with_extra_jump(const JumpPath& path, double tau, double size) {
  std::vector<Jump> js(path.jumps().begin(), path.jumps().end());
  auto it = std::lower_bound(js.begin(), js.end(), tau, [](const Jump& j, double t) { return j.time < t; });
  if (it != js.end() && it->time == tau) {
    const double prev = it == js.begin() ? 0.0 : std::prev(it)->time;
    tau = 0.5 * (prev + tau);
  }
  js.insert(it, Jump{tau, size});
  return JumpPath(path.horizon(), path.truncation(), path.seed(), std::move(js));
}

/// Where the dropped small-jump mass is placed when sizing a per-path truncation bound:
/// the midpoint for time-homogeneous transforms, else four spread-out times.
inline std::vector<double> perturbation_times(double t, bool time_dependent) {
  if (!time_dependent) return {0.5 * t};
  return {0.125 * t, 0.375 * t, 0.625 * t, 0.875 * t};
}

/// xi^H_t = sum_{s_i <= t} H(s_i, xi_{s_i-}, x_i).
inline double transformed_value(const JumpPath& path, const PredictableTransform& tr, double t) {
  const std::size_t n = path.count_until(t);
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) v += tr.H(path[i].time, path.value_before(i), path[i].size);
  return v;
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::size_t replicates(const CheckSpec& c, const RunSettings& s) { return c.n.value_or(s.n); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Checks

/// E[M_t] = 1 at each checkpoint, for the kernel's density (optionally tilted).
inline CheckResult run_expectation_check(const CheckSpec& c, const RunSettings& s) {
  const LevyDensity levy = make_levy(c.levy);
  const Kernel kernel = make_kernel(c.kernel);
  if (c.form == "gamma" && kernel.mode() == KernelMode::Composition && kernel.time_dependent())
    throw ConfigError("check '" + c.name + "': the gamma composition form needs a kernel without time dependence");
  const TailFunction tail(levy);
  const CadlagStep lambda(c.lambda.breakpoints, c.lambda.values);
  const PredictableTransform tr = transform_of(kernel);
  const bool gamma_form = c.form == "gamma";
  const double dropped = small_jump_mass(levy, s.eps);
  const bool time_dep = tr.time_dependent || !c.lambda.breakpoints.empty();

  std::vector<RowDef> rows;
  for (double t : c.checkpoints) rows.push_back({"t=" + detail::fmt(t), RowKind::Mean, 1.0, 0.0, {}, true});

  auto value = [&](const JumpPath& p, double t, bool with_bound) {
    DensityOptions opts;
    opts.truncation_bound = with_bound;
    opts.compensator_scale = c.compensator_scale;
    if (gamma_form) {
      LogDensity ld = kernel.mode() == KernelMode::JumpWise ? log_density_jump_gamma(p, kernel, t)
                                                            : log_density_composition_gamma(p, kernel, t);
      ld.log_value = c.compensator_scale * ld.compensator + ld.jump_sum;
      if (with_bound) ld.truncation_bound = log_density_general(p, tr, levy, lambda, t, opts).truncation_bound;
      return ld;
    }
    return log_density_general(p, tr, levy, lambda, t, opts);
  };

  Observer obs = [&](std::uint64_t seed, std::span<Obs> coarse, std::span<Obs> fine) {
    const bool stab = !fine.empty();
    const auto paths = detail::sample_pair(tail, c.horizon, s.eps, seed, stab);
    for (std::size_t k = 0; k < c.checkpoints.size(); ++k) {
      const double t = c.checkpoints[k];
      const LogDensity ld = value(paths.coarse, t, stab);
      const double w = std::exp(ld.log_value);
      coarse[k] = {w, w, 0.0};
      if (stab) {
        double sens = 0.0;
        for (double tau : detail::perturbation_times(t, time_dep)) {
          const double wp = std::exp(value(detail::with_extra_jump(paths.coarse, tau, t * dropped), t, false).log_value);
          sens = std::max(sens, std::abs(wp - w));
        }
        coarse[k].bound = w * ld.truncation_bound + sens;
        const double wf = std::exp(value(paths.fine, t, false).log_value);
        fine[k] = {wf, wf, 0.0};
      }
    }
  };
  return run_ensemble(c.name, to_string(c.type), rows, obs, s, detail::replicates(c, s), c.stability);
}

/// E[exp(-lambda xi^H_t) M^H_t] = exp(-t Psi(lambda)).
inline CheckResult run_laplace_check(const CheckSpec& c, const RunSettings& s) {
  const LevyDensity levy = make_levy(c.levy);
  const Kernel kernel = make_kernel(c.kernel);
  const TailFunction tail(levy);
  const PredictableTransform tr = transform_of(kernel);
  const CadlagStep zero = CadlagStep::constant(0.0);
  const double dropped = small_jump_mass(levy, s.eps);

  std::vector<RowDef> rows;
  for (double t : c.checkpoints)
    for (double lam : c.lambdas)
      rows.push_back({"lambda=" + detail::fmt(lam) + " t=" + detail::fmt(t), RowKind::Mean,
                      std::exp(-t * laplace_exponent(levy, lam)), 0.0, {}, true});

  Observer obs = [&](std::uint64_t seed, std::span<Obs> coarse, std::span<Obs> fine) {
    const bool stab = !fine.empty();
    const auto paths = detail::sample_pair(tail, c.horizon, s.eps, seed, stab);
    std::size_t col = 0;
    for (double t : c.checkpoints) {
      DensityOptions opts;
      opts.truncation_bound = stab;
      const LogDensity ld = log_density_general(paths.coarse, tr, levy, zero, t, opts);
      const double w = std::exp(ld.log_value);
      const double x = detail::transformed_value(paths.coarse, tr, t);
      std::vector<std::pair<double, double>> pert;  // (weight, value) with the dropped mass added
      double wf = 0.0, xf = 0.0;
      if (stab) {
        for (double tau : detail::perturbation_times(t, tr.time_dependent)) {
          const JumpPath pp = detail::with_extra_jump(paths.coarse, tau, t * dropped);
          pert.emplace_back(std::exp(log_density_general(pp, tr, levy, zero, t, {false, 1.0}).log_value),
                            detail::transformed_value(pp, tr, t));
        }
        wf = std::exp(log_density_general(paths.fine, tr, levy, zero, t, {false, 1.0}).log_value);
        xf = detail::transformed_value(paths.fine, tr, t);
      }
      for (double lam : c.lambdas) {
        const double v = std::exp(-lam * x) * w;
        coarse[col] = {v, w, 0.0};
        if (stab) {
          double sens = 0.0;
          for (const auto& [wp, xp] : pert) sens = std::max(sens, std::abs(std::exp(-lam * xp) * wp - v));
          coarse[col].bound = v * ld.truncation_bound + sens;
          fine[col] = {std::exp(-lam * xf) * wf, wf, 0.0};
        }
        ++col;
      }
    }
  };
  return run_ensemble(c.name, to_string(c.type), rows, obs, s, detail::replicates(c, s), c.stability);
}

/// log M_t = g0 t log c + b (1 - c) xi_t on every path for k = c.
inline CheckResult run_scaling_check(const CheckSpec& c, const RunSettings& s) {
  const LevyDensity levy = make_levy(c.levy);
  const Kernel kernel = make_kernel(c.kernel);
  const double cc = kernel.derivative(0.0, 0.0);
  const TailFunction tail(levy);
  std::vector<RowDef> rows;
  for (double t : c.checkpoints) rows.push_back({"t=" + detail::fmt(t) + " max|error|", RowKind::Max, 0.0, 1e-10, {}, false});
  Observer obs = [&](std::uint64_t seed, std::span<Obs> coarse, std::span<Obs>) {
    const JumpPath p = sample_jump_path(tail, c.horizon, s.eps, seed);
    for (std::size_t k = 0; k < c.checkpoints.size(); ++k) {
      const double t = c.checkpoints[k];
      const double closed = levy.g0() * t * std::log(cc) + levy.rate() * (1.0 - cc) * p.value(t);
      const double got = log_density_jump(p, kernel, levy, t, {false, 1.0}).log_value;
      coarse[k] = {std::abs(got - closed), 1.0, 0.0};
    }
  };
  return run_ensemble(c.name, to_string(c.type), rows, obs, s, detail::replicates(c, s), false);
}

/// Weighted marginal of xi^H_t under M^H_t against the Gamma(g0 t, b) law.
inline CheckResult run_distribution_check(const CheckSpec& c, const RunSettings& s) {
  const LevyDensity levy = make_levy(c.levy);
  const Kernel kernel = make_kernel(c.kernel);
  const TailFunction tail(levy);
  const PredictableTransform tr = transform_of(kernel);
  const CadlagStep zero = CadlagStep::constant(0.0);
  const double dropped = small_jump_mass(levy, s.eps);
  const double g0 = levy.g0();
  const double b = levy.rate();

  std::vector<RowDef> rows;
  std::vector<double> mu;
  for (double t : c.checkpoints) {
    const double shape = g0 * t;
    mu.push_back(shape / b);
    rows.push_back({"t=" + detail::fmt(t) + " mean", RowKind::Ratio, shape / b, 0.0, {}, true});
    rows.push_back({"t=" + detail::fmt(t) + " variance", RowKind::Ratio, shape / (b * b), 0.0, {}, true});
    rows.push_back({"t=" + detail::fmt(t) + " ks", RowKind::KS, 0.0, 0.0,
                    [shape, b](double x) { return x <= 0.0 ? 0.0 : boost::math::gamma_p(shape, b * x); }, true});
  }
  Observer obs = [&](std::uint64_t seed, std::span<Obs> coarse, std::span<Obs> fine) {
    const bool stab = !fine.empty();
    const auto paths = detail::sample_pair(tail, c.horizon, s.eps, seed, stab);
    for (std::size_t k = 0; k < c.checkpoints.size(); ++k) {
      const double t = c.checkpoints[k];
      DensityOptions opts;
      opts.truncation_bound = stab;
      const LogDensity ld = log_density_general(paths.coarse, tr, levy, zero, t, opts);
      const double w = std::exp(ld.log_value);
      const double x = detail::transformed_value(paths.coarse, tr, t);
      const double m = mu[k];
      Obs* o = &coarse[3 * k];
      o[0] = {w * x, w, 0.0};
      o[1] = {w * (x - m) * (x - m), w, 0.0};
      o[2] = {x, w, 0.0};
      if (stab) {
        double s0 = 0.0, s1 = 0.0;
        for (double tau : detail::perturbation_times(t, tr.time_dependent)) {
          const JumpPath pp = detail::with_extra_jump(paths.coarse, tau, t * dropped);
          const double wp = std::exp(log_density_general(pp, tr, levy, zero, t, {false, 1.0}).log_value);
          const double xp = detail::transformed_value(pp, tr, t);
          s0 = std::max(s0, std::abs(wp * xp - w * x));
          s1 = std::max(s1, std::abs(wp * (xp - m) * (xp - m) - w * (x - m) * (x - m)));
        }
        o[0].bound = std::abs(w * x) * ld.truncation_bound + s0;
        o[1].bound = w * (x - m) * (x - m) * ld.truncation_bound + s1;
        const double wf = std::exp(log_density_general(paths.fine, tr, levy, zero, t, {false, 1.0}).log_value);
        const double xf = detail::transformed_value(paths.fine, tr, t);
        Obs* f = &fine[3 * k];
        f[0] = {wf * xf, wf, 0.0};
        f[1] = {wf * (xf - m) * (xf - m), wf, 0.0};
        f[2] = {xf, wf, 0.0};
      }
    }
  };
  return run_ensemble(c.name, to_string(c.type), rows, obs, s, detail::replicates(c, s), c.stability);
}

/**
 * E[f(X_t)] for the SDE solution against E[f(xi_t) M^H_t] with
 * H(s, x) = x / m(s, xi_{s-}). The two sides use independent substreams.
 */
inline CheckResult run_sde_check(const CheckSpec& c, const RunSettings& s) {
  const LevyDensity levy = make_levy(c.levy);
  const Coefficient m = make_coefficient(c.coefficient);
  const TailFunction tail(levy);
  const PredictableTransform tr = sde_transform(m);
  const CadlagStep zero = CadlagStep::constant(0.0);
  const double dropped = small_jump_mass(levy, s.eps);
  std::vector<TestFunction> fs;
  for (const auto& name : c.test_functions) fs.push_back(make_test_function(name));

  std::vector<RowDef> rows;
  for (double t : c.checkpoints) {
    for (const auto& f : fs) {
      const std::string tag = f.name + " t=" + detail::fmt(t);
      double direct_target = std::numeric_limits<double>::quiet_NaN();
      if (m.is_constant() && f.name == "exp_neg") direct_target = std::exp(-t * laplace_exponent(levy, m(0.0, 0.0)));
      rows.push_back({tag + " direct", RowKind::Mean, direct_target, 0.0, {}, false});
      rows.push_back({tag + " reweighted", RowKind::Mean, std::numeric_limits<double>::quiet_NaN(), 0.0, {}, true});
      rows.push_back({tag + " difference", RowKind::Mean, 0.0, 0.0, {}, true});
    }
  }
  Observer obs = [&](std::uint64_t seed, std::span<Obs> coarse, std::span<Obs> fine) {
    const bool stab = !fine.empty();
    const auto a = detail::sample_pair(tail, c.horizon, s.eps, stream_seed(seed, 1), stab);
    const auto b = detail::sample_pair(tail, c.horizon, s.eps, stream_seed(seed, 2), stab);
    const JumpPath X = solve_sde(a.coarse, m);
    JumpPath Xf;
    if (stab) Xf = solve_sde(a.fine, m);
    std::size_t col = 0;
    for (double t : c.checkpoints) {
      DensityOptions opts;
      opts.truncation_bound = stab;
      const LogDensity ld = log_density_general(b.coarse, tr, levy, zero, t, opts);
      const double w = std::exp(ld.log_value);
      const double xi = b.coarse.value(t);
      const double xt = X.value(t);
      std::vector<double> xtp;
      std::vector<std::pair<double, double>> pert;  // (weight, xi_t) with the dropped mass added
      double wf = 0.0, xif = 0.0, xtf = 0.0;
      if (stab) {
        for (double tau : detail::perturbation_times(t, m.time_dependent())) {
          xtp.push_back(solve_sde(detail::with_extra_jump(a.coarse, tau, t * dropped), m).value(t));
          const JumpPath pp = detail::with_extra_jump(b.coarse, tau, t * dropped);
          pert.emplace_back(std::exp(log_density_general(pp, tr, levy, zero, t, {false, 1.0}).log_value), pp.value(t));
        }
        wf = std::exp(log_density_general(b.fine, tr, levy, zero, t, {false, 1.0}).log_value);
        xif = b.fine.value(t);
        xtf = Xf.value(t);
      }
      for (const auto& f : fs) {
        const double d = f.f(xt);
        const double r = f.f(xi) * w;
        coarse[col] = {d, 1.0, 0.0};
        coarse[col + 1] = {r, w, 0.0};
        coarse[col + 2] = {d - r, w, 0.0};
        if (stab) {
          double bd = 0.0, br = 0.0;
          for (double x : xtp) bd = std::max(bd, std::abs(f.f(x) - d));
          for (const auto& [wp, xp] : pert) br = std::max(br, std::abs(f.f(xp) * wp - r));
          br += std::abs(r) * ld.truncation_bound;
          coarse[col].bound = bd;
          coarse[col + 1].bound = br;
          coarse[col + 2].bound = bd + br;
          const double df = f.f(xtf);
          const double rf = f.f(xif) * wf;
          fine[col] = {df, 1.0, 0.0};
          fine[col + 1] = {rf, wf, 0.0};
          fine[col + 2] = {df - rf, wf, 0.0};
        }
        col += 3;
      }
    }
  };
  return run_ensemble(c.name, to_string(c.type), rows, obs, s, detail::replicates(c, s), c.stability);
}

namespace detail {

struct DirichletPair {
  DirichletPath coarse;
  DirichletPath fine;
};

inline DirichletPair sample_dirichlet_pair(const TailFunction& tail, double T, double eps, std::uint64_t seed,
                                           bool stability, int* resamples) {
  DirichletPair p;
  if (stability) {
    p.fine = sample_dirichlet_path(tail, T, eps / 10.0, seed);
    // The coarse path needs at least one jump; resample the pair if it has none.
    std::uint64_t attempt = 0;
    while (p.fine.base().raise_truncation(eps).empty()) {
      p.fine = sample_dirichlet_path(tail, T, eps / 10.0, stream_seed(seed, 1000 + attempt++));
    }
    p.coarse = DirichletPath(p.fine.base().raise_truncation(eps), p.fine.resamples() + static_cast<int>(attempt));
  } else {
    p.coarse = sample_dirichlet_path(tail, T, eps, seed);
  }
  *resamples = p.coarse.resamples();
  return p;
}

/// The Dirichlet path of the underlying Gamma path plus one jump of `size` at tau.
inline DirichletPath perturbed(const DirichletPath& D, double tau, double size) {
  return DirichletPath(with_extra_jump(D.base(), tau, size), D.resamples());
}

}  // namespace detail

/// E[L_t] = 1 for a composition kernel on the bridge.
inline CheckResult run_dirichlet_bridge_check(const CheckSpec& c, const RunSettings& s) {
  KernelSpec ks = c.kernel;
  if (!ks.mode) ks.mode = KernelMode::Composition;
  const double T = c.horizon;
  const Kernel kernel = make_kernel(ks, T);
  const TailFunction tail(LevyDensity::gamma());
  const double dropped = T * small_jump_mass(LevyDensity::gamma(), s.eps);
  std::vector<RowDef> rows;
  for (double t : c.checkpoints) rows.push_back({"t=" + detail::fmt(t), RowKind::Mean, 1.0, 0.0, {}, true});
  const std::size_t n = detail::replicates(c, s);
  std::atomic<long> resamples{0};
  std::atomic<long> clamps{0};
  Observer obs = [&](std::uint64_t seed, std::span<Obs> coarse, std::span<Obs> fine) {
    const bool stab = !fine.empty();
    int rs = 0;
    const auto D = detail::sample_dirichlet_pair(tail, T, s.eps, seed, stab, &rs);
    resamples += rs;
    for (std::size_t k = 0; k < c.checkpoints.size(); ++k) {
      const double t = c.checkpoints[k];
      const auto bd = log_density_bridge_composition(D.coarse, kernel, t);
      clamps += bd.clamped;
      const double w = std::exp(bd.density.log_value);
      coarse[k] = {w, w, 0.0};
      if (stab) {
        double b = 0.0;
        for (double tau : {0.5 * t, 0.5 * (t + T)}) {
          const double wp = std::exp(log_density_bridge_composition(detail::perturbed(D.coarse, tau, dropped), kernel, t).density.log_value);
          b = std::max(b, std::abs(wp - w));
        }
        coarse[k].bound = b;
        const double wf = std::exp(log_density_bridge_composition(D.fine, kernel, t).density.log_value);
        fine[k] = {wf, wf, 0.0};
      }
    }
  };
  CheckResult r = run_ensemble(c.name, to_string(c.type), rows, obs, s, n, c.stability);
  const long total_rs = resamples.load();
  const long total_clamps = clamps.load();
  if (total_rs > 0) r.warnings.push_back(c.name + ": " + std::to_string(total_rs) + " empty bridge draws resampled");
  if (total_clamps > 0) r.warnings.push_back(c.name + ": boundary factor clamped " + std::to_string(total_clamps) + " times");
  return r;
}

/// Weighted K(t, D_t) under L_T against Beta(t, T - t); identity kernel gives the plain Beta marginal.
inline CheckResult run_dirichlet_law_check(const CheckSpec& c, const RunSettings& s) {
  KernelSpec ks = c.kernel;
  if (!ks.mode) ks.mode = KernelMode::Composition;
  const double T = c.horizon;
  const Kernel kernel = make_kernel(ks, T);
  const TailFunction tail(LevyDensity::gamma());
  const double dropped = T * small_jump_mass(LevyDensity::gamma(), s.eps);
  std::vector<RowDef> rows;
  std::vector<double> mu;
  for (double t : c.checkpoints) {
    if (!(t < T)) throw ConfigError("check '" + c.name + "': law checkpoints must lie below T");
    const double a = t;
    const double bb = T - t;
    mu.push_back(a / T);
    rows.push_back({"t=" + detail::fmt(t) + " mean", RowKind::Ratio, a / T, 0.0, {}, true});
    rows.push_back({"t=" + detail::fmt(t) + " variance", RowKind::Ratio, a * bb / (T * T * (T + 1.0)), 0.0, {}, true});
    rows.push_back({"t=" + detail::fmt(t) + " ks", RowKind::KS, 0.0, 0.0,
                    [a, bb](double x) { return x <= 0.0 ? 0.0 : x >= 1.0 ? 1.0 : boost::math::ibeta(a, bb, x); },
                    true});
  }
  auto eval = [&](const DirichletPath& D, double t, double* w, double* x) {
    *w = std::exp(log_density_bridge_composition(D, kernel, T).density.log_value);
    *x = kernel.primitive(t, D.value(t));
  };
  Observer obs = [&](std::uint64_t seed, std::span<Obs> coarse, std::span<Obs> fine) {
    const bool stab = !fine.empty();
    int rs = 0;
    const auto D = detail::sample_dirichlet_pair(tail, T, s.eps, seed, stab, &rs);
    for (std::size_t k = 0; k < c.checkpoints.size(); ++k) {
      const double t = c.checkpoints[k];
      const double m = mu[k];
      double w, x;
      eval(D.coarse, t, &w, &x);
      Obs* o = &coarse[3 * k];
      o[0] = {w * x, w, 0.0};
      o[1] = {w * (x - m) * (x - m), w, 0.0};
      o[2] = {x, w, 0.0};
      if (stab) {
        for (double tau : {0.5 * t, 0.5 * (t + T)}) {
          double wp, xp;
          eval(detail::perturbed(D.coarse, tau, dropped), t, &wp, &xp);
          o[0].bound = std::max(o[0].bound, std::abs(wp * xp - w * x));
          o[1].bound = std::max(o[1].bound, std::abs(wp * (xp - m) * (xp - m) - w * (x - m) * (x - m)));
        }
        double wf, xf;
        eval(D.fine, t, &wf, &xf);
        Obs* f = &fine[3 * k];
        f[0] = {wf * xf, wf, 0.0};
        f[1] = {wf * (xf - m) * (xf - m), wf, 0.0};
        f[2] = {xf, wf, 0.0};
      }
    }
  };
  return run_ensemble(c.name, to_string(c.type), rows, obs, s, detail::replicates(c, s), c.stability);
}

/**
 * Two-sided identity E[Phi(D^K) U^K_T] = E[Phi(D) p_T(zeta) / p_T(1) zeta'],
 * estimated by paired differences on one ensemble. For a constant kernel both
 * weights must equal T log c + 1 - c on every path.
 */
inline CheckResult run_dirichlet_jump_check(const CheckSpec& c, const RunSettings& s) {
  const double T = c.horizon;
  const Kernel kernel = make_kernel(c.kernel);
  const TailFunction tail(LevyDensity::gamma());
  const double dropped = T * small_jump_mass(LevyDensity::gamma(), s.eps);
  const bool constant_kernel = c.kernel.name == "linear";
  const double cc = kernel.derivative(0.0, 0.0);
  const double c0 = T * std::log(cc) + 1.0 - cc;

  auto phi = [](const FunctionalSpec& f, const DirichletPath& D) {
    const double v = D.value(f.t);
    return f.name == "marginal_sq_t" ? v * v : v;
  };
  std::vector<RowDef> rows;
  for (const auto& f : c.functionals) {
    const std::string tag = f.name + " t=" + detail::fmt(f.t);
    rows.push_back({tag + " transformed", RowKind::Mean, std::numeric_limits<double>::quiet_NaN(), 0.0, {}, true});
    rows.push_back({tag + " reweighted", RowKind::Mean, std::numeric_limits<double>::quiet_NaN(), 0.0, {}, true});
    rows.push_back({tag + " difference", RowKind::Mean, 0.0, 0.0, {}, true});
  }
  if (constant_kernel) rows.push_back({"constant weights max|w - c0|", RowKind::Max, 0.0, 1e-12, {}, false});

  struct Sides {
    std::vector<double> lhs, rhs, wl, wr;
    double err = 0.0;
  };
  auto eval = [&](const DirichletPath& D) {
    const DirichletPath DK = jump_transform_dirichlet(D, kernel);
    const auto w = log_density_bridge_jump(D, kernel);
    Sides out;
    const double el = std::exp(w.lhs.log_value);
    const double er = std::exp(w.rhs.log_value);
    for (const auto& f : c.functionals) {
      out.lhs.push_back(phi(f, DK) * el);
      out.rhs.push_back(phi(f, D) * er);
      out.wl.push_back(el);
      out.wr.push_back(er);
    }
    out.err = std::max(std::abs(w.lhs.log_value - c0), std::abs(w.rhs.log_value - c0));
    return out;
  };
  Observer obs = [&](std::uint64_t seed, std::span<Obs> coarse, std::span<Obs> fine) {
    const bool stab = !fine.empty();
    int rs = 0;
    const auto D = detail::sample_dirichlet_pair(tail, T, s.eps, seed, stab, &rs);
    const Sides sc = eval(D.coarse);
    std::vector<Sides> pert;
    Sides sf;
    if (stab) {
      for (double tau : {0.25 * T, 0.75 * T}) pert.push_back(eval(detail::perturbed(D.coarse, tau, dropped)));
      sf = eval(D.fine);
    }
    for (std::size_t k = 0; k < c.functionals.size(); ++k) {
      Obs* o = &coarse[3 * k];
      o[0] = {sc.lhs[k], sc.wl[k], 0.0};
      o[1] = {sc.rhs[k], sc.wr[k], 0.0};
      o[2] = {sc.lhs[k] - sc.rhs[k], sc.wl[k], 0.0};
      if (stab) {
        for (const auto& p : pert) {
          const double bl = std::abs(p.lhs[k] - sc.lhs[k]);
          const double br = std::abs(p.rhs[k] - sc.rhs[k]);
          o[0].bound = std::max(o[0].bound, bl);
          o[1].bound = std::max(o[1].bound, br);
          o[2].bound = std::max(o[2].bound, bl + br);
        }
        Obs* f = &fine[3 * k];
        f[0] = {sf.lhs[k], sf.wl[k], 0.0};
        f[1] = {sf.rhs[k], sf.wr[k], 0.0};
        f[2] = {sf.lhs[k] - sf.rhs[k], sf.wl[k], 0.0};
      }
    }
    if (constant_kernel) {
      coarse[3 * c.functionals.size()] = {sc.err, 1.0, 0.0};
      if (stab) fine[3 * c.functionals.size()] = {sf.err, 1.0, 0.0};
    }
  };
  return run_ensemble(c.name, to_string(c.type), rows, obs, s, detail::replicates(c, s), c.stability);
}

/// |int F g dx + Psi(a) + g0 log phi'(0)| <= 1e-6 for each kernel section and a.
inline CheckResult run_quadrature_check(const CheckSpec& c, const RunSettings& s) {
  const LevyDensity levy = make_levy(c.levy);
  CheckResult result;
  result.name = c.name;
  result.type = to_string(c.type);
  for (const auto& ks : c.kernels) {
    const Kernel k = make_kernel(ks);
    const Section phi = k.section(0.25);
    for (double a : c.a_values) {
      const FIntegral fi = integrate_F(levy, phi, a);
      const double target = integrate_F_target(levy, phi, a);
      CheckRow r;
      r.check = c.name;
      r.checkpoint = k.name() + " a=" + detail::fmt(a);
      r.estimate = fi.signed_value;
      r.std_error = fi.error;
      r.target = target;
      r.z = fi.signed_value - target;
      r.bound = 1e-6;
      r.seed = s.seed;
      r.passed = std::abs(r.z) <= r.bound;
      result.rows.push_back(r);

      CheckRow b = r;
      b.checkpoint = k.name() + " a=" + detail::fmt(a) + " |F| bound";
      b.estimate = fi.absolute;
      b.target = 0.0;
      b.z = 0.0;
      b.bound = integrate_F_bound(levy, phi.kappa, phi.alpha, a);
      b.passed = fi.absolute <= b.bound;
      result.rows.push_back(b);
    }
  }
  return result;
}

/// Pathwise recursion residual of the Doleans exponential and agreement with the closed-form density.
inline CheckResult run_doleans_check(const CheckSpec& c, const RunSettings& s) {
  const LevyDensity levy = make_levy(c.levy);
  const TailFunction tail(levy);
  struct Spec {
    Kernel kernel;
    CadlagStep lambda;
    JumpFunctional fn;
  };
  std::vector<Spec> specs;
  for (const auto& ks : c.kernels) {
    Kernel k = make_kernel(ks);
    CadlagStep lam = ks.lambda ? CadlagStep(ks.lambda->breakpoints, ks.lambda->values) : CadlagStep::constant(0.0);
    JumpFunctional fn = density_functional(transform_of(k), levy, lam);
    specs.push_back({std::move(k), std::move(lam), std::move(fn)});
  }
  std::vector<RowDef> rows;
  for (const auto& sp : specs) {
    const std::string tag = sp.kernel.name() + (sp.lambda.is_constant() && sp.lambda(0.0) == 0.0 ? "" : " tilted");
    rows.push_back({tag + " max relative residual", RowKind::Max, 0.0, 1e-9, {}, false});
    rows.push_back({tag + " max|log E - log M|", RowKind::Max, 0.0, 1e-9, {}, false});
  }
  Observer obs = [&](std::uint64_t seed, std::span<Obs> coarse, std::span<Obs>) {
    const JumpPath p = sample_jump_path(tail, c.horizon, s.eps, seed);
    for (std::size_t k = 0; k < specs.size(); ++k) {
      const auto r = doleans_evaluate(specs[k].fn, p, levy);
      const double closed =
          log_density_general(p, transform_of(specs[k].kernel), levy, specs[k].lambda, std::nullopt, {false, 1.0}).log_value;
      coarse[2 * k] = {r.recursion_residual / r.scale, 1.0, 0.0};
      coarse[2 * k + 1] = {std::abs(r.log_e - closed), 1.0, 0.0};
    }
  };
  return run_ensemble(c.name, to_string(c.type), rows, obs, s, detail::replicates(c, s), false);
}

inline CheckResult run_check(const CheckSpec& c, const RunSettings& s) {
  switch (c.type) {
    case CheckType::Expectation: return run_expectation_check(c, s);
    case CheckType::Laplace: return run_laplace_check(c, s);
    case CheckType::Scaling: return run_scaling_check(c, s);
    case CheckType::Distribution: return run_distribution_check(c, s);
    case CheckType::Sde: return run_sde_check(c, s);
    case CheckType::DirichletBridge: return run_dirichlet_bridge_check(c, s);
    case CheckType::DirichletLaw: return run_dirichlet_law_check(c, s);
    case CheckType::DirichletJump: return run_dirichlet_jump_check(c, s);
    case CheckType::Quadrature: return run_quadrature_check(c, s);
    case CheckType::Doleans: return run_doleans_check(c, s);
  }
  throw std::logic_error("run_check: unhandled check type");
}

inline RunSettings settings_of(const ExperimentConfig& cfg) {
  return {cfg.seed, cfg.n, cfg.eps, cfg.threads, cfg.ess_floor};
}

inline std::vector<CheckResult> run_experiment(const ExperimentConfig& cfg) {
  const RunSettings s = settings_of(cfg);
  std::vector<CheckResult> out;
  for (const auto& c : cfg.checks) out.push_back(run_check(c, s));
  return out;
}

}  // namespace levyq
