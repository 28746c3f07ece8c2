#pragma once

// Experiment configuration: JSON schema, strict parsing, and the kernel /
// coefficient / test-function registries it refers to.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levyq/kernel.hpp"
#include "levyq/levy.hpp"
#include "levyq/sde.hpp"
#include "levyq/step.hpp"

namespace levyq {

/// Invalid or inconsistent configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

struct LevySpec {
  LevyFamily family = LevyFamily::Gamma;
  double g0 = 1.0;
  double b = 1.0;
};

struct KernelSpec {
  std::string name = "identity";
  std::map<std::string, double> params;
  std::optional<KernelMode> mode;
  bool normalize = false;
  std::optional<double> kappa;
  std::optional<double> alpha;
  std::optional<StepSpec> lambda;
};

struct CoefficientSpec {
  std::string name = "constant";
  std::map<std::string, double> params;
};

/// A named path functional evaluated at time t, e.g. marginal_t.
struct FunctionalSpec {
  std::string name;
  double t = 0.0;
};

enum class CheckType {
  Expectation,
  Laplace,
  Scaling,
  Distribution,
  Sde,
  DirichletBridge,
  DirichletLaw,
  DirichletJump,
  Quadrature,
  Doleans,
};

inline const std::map<std::string, CheckType>& check_type_names() {
  static const std::map<std::string, CheckType> names{
      {"expectation", CheckType::Expectation},
      {"laplace", CheckType::Laplace},
      {"scaling", CheckType::Scaling},
      {"distribution", CheckType::Distribution},
      {"sde", CheckType::Sde},
      {"dirichlet_bridge", CheckType::DirichletBridge},
      {"dirichlet_law", CheckType::DirichletLaw},
      {"dirichlet_jump", CheckType::DirichletJump},
      {"quadrature", CheckType::Quadrature},
      {"doleans", CheckType::Doleans},
  };
  return names;
}

inline std::string to_string(CheckType t) {
  for (const auto& [k, v] : check_type_names())
    if (v == t) return k;
  return "unknown";
}

struct CheckSpec {
  std::string name;
  CheckType type = CheckType::Expectation;
  LevySpec levy;
  KernelSpec kernel;
  std::vector<KernelSpec> kernels;  ///< quadrature and doleans batteries
  StepSpec lambda;                  ///< Laplace tilt of the density, default 0
  double horizon = 1.0;             ///< horizon, or T for the Dirichlet checks
  std::vector<double> checkpoints;
  std::vector<double> lambdas;
  std::vector<double> a_values;
  std::vector<std::string> test_functions;
  std::vector<FunctionalSpec> functionals;
  CoefficientSpec coefficient;
  std::string form = "general";  ///< "gamma" selects the Gamma-process closed forms
  bool stability = false;        ///< also run at eps / 10 and compare
  double compensator_scale = 1.0;
  std::optional<std::size_t> n;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 42;
  std::size_t n = 100000;
  double eps = 1e-6;
  int threads = 1;
  double ess_floor = 0.01;  ///< warn when ESS < ess_floor * n
  std::string output;
  std::vector<CheckSpec> checks;
};

// ---------------------------------------------------------------------------
// Registries

namespace detail {

inline double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

inline void require_params(const std::string& what, const std::map<std::string, double>& p,
                           const std::set<std::string>& allowed) {
  for (const auto& [k, v] : p) {
    if (!allowed.count(k)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(what + ": unknown parameter '" + k + "' (allowed: " + (list.empty() ? "none" : list) + ")");
    }
  }
}

}  // namespace detail

struct KernelFactory {
  std::set<std::string> params;
  std::function<Kernel(const std::map<std::string, double>&)> make;
};

inline const std::map<std::string, KernelFactory>& kernel_registry() {
  using detail::param;
  static const std::map<std::string, KernelFactory> reg{
      {"identity", {{}, [](const auto&) { return kernels::identity(); }}},
      {"linear", {{"c"}, [](const auto& p) { return kernels::linear(param(p, "c", 1.0)); }}},
      {"damped_exp",
       {{"a", "b"}, [](const auto& p) { return kernels::damped_exp(param(p, "a", 0.5), param(p, "b", 1.0)); }}},
      {"holder", {{"a"}, [](const auto& p) { return kernels::holder(param(p, "a", 0.5)); }}},
      {"modulated",
       {{"c0", "c1"}, [](const auto& p) { return kernels::modulated(param(p, "c0", 1.0), param(p, "c1", 0.5)); }}},
      {"modulated_exp", {{"a"}, [](const auto& p) { return kernels::modulated_exp(param(p, "a", 0.5)); }}},
      {"cosine_bridge", {{"a"}, [](const auto& p) { return kernels::cosine_bridge(param(p, "a", 0.4)); }}},
      {"quadratic_bridge", {{"a"}, [](const auto& p) { return kernels::quadratic_bridge(param(p, "a", 0.5)); }}},
  };
  return reg;
}

/// Builds and validates a kernel. Bridge kernels are checked for K(s, 1) = 1 over [0, T].
inline Kernel make_kernel(const KernelSpec& spec, std::optional<double> bridge_T = std::nullopt) {
  const auto& reg = kernel_registry();
  const auto it = reg.find(spec.name);
  if (it == reg.end()) {
    std::string list;
    for (const auto& [k, v] : reg) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown kernel '" + spec.name + "' (known: " + list + ")");
  }
  detail::require_params("kernel '" + spec.name + "'", spec.params, it->second.params);
  Kernel k = [&] {
    try {
      return it->second.make(spec.params);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("kernel '") + spec.name + "': " + e.what());
    }
  }();
  if (spec.mode) k = k.with_mode(*spec.mode);
  if (spec.kappa || spec.alpha) {
    try {
      k = Kernel(k.name(), [k](double s, double x) { return k.derivative(s, x); }, spec.kappa.value_or(k.kappa()),
                 spec.alpha.value_or(k.alpha()), k.time_dependent(),
                 {[k](double s, double x) { return k.primitive(s, x); },
                  [k](double s, double x, double d) { return k.increment(s, x, d); }},
                 k.mode());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("kernel '") + spec.name + "': " + e.what());
    }
  }
  if (bridge_T) {
    if (spec.normalize) k = normalize_bridge(k);
    const double err = bridge_normalization_error(k, *bridge_T);
    if (!(err <= 1e-10))
      throw ConfigError("kernel '" + spec.name + "' has |K(s,1) - 1| = " + std::to_string(err) +
                        " on [0, T]; set \"normalize\": true or choose a bridge kernel");
    GridSpec grid;
    grid.s_max = *bridge_T;
    grid.x_max = 1.0;
    if (!validate_kernel(k, grid).passed())
      throw ConfigError("kernel '" + spec.name + "' violates its kappa/alpha bounds on [0, T] x [0, 1]");
  } else {
    GridSpec grid;
    if (!validate_kernel(k, grid).passed())
      throw ConfigError("kernel '" + spec.name + "' violates its kappa/alpha bounds on the validation grid");
  }
  return k;
}

inline LevyDensity make_levy(const LevySpec& spec) {
  try {
    return make_levy_density(spec.family, {spec.g0, spec.b, {}, "custom"});
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("levy: ") + e.what());
  }
}

struct CoefficientFactory {
  std::set<std::string> params;
  std::function<Coefficient(const std::map<std::string, double>&)> make;
};

inline const std::map<std::string, CoefficientFactory>& coefficient_registry() {
  using detail::param;
  static const std::map<std::string, CoefficientFactory> reg{
      {"constant", {{"c"}, [](const auto& p) { return coefficients::constant(param(p, "c", 1.0)); }}},
      {"rational_decay", {{}, [](const auto&) { return coefficients::rational_decay(); }}},
      {"time_periodic",
       {{"a0", "a1"},
        [](const auto& p) { return coefficients::time_periodic(param(p, "a0", 0.75), param(p, "a1", 0.2)); }}},
  };
  return reg;
}

inline Coefficient make_coefficient(const CoefficientSpec& spec) {
  const auto& reg = coefficient_registry();
  const auto it = reg.find(spec.name);
  if (it == reg.end()) throw ConfigError("unknown coefficient '" + spec.name + "'");
  detail::require_params("coefficient '" + spec.name + "'", spec.params, it->second.params);
  try {
    Coefficient m = it->second.make(spec.params);
    if (!validate_coefficient(m).passed)
      throw ConfigError("coefficient '" + spec.name + "' violates its declared bounds or Lipschitz constant");
    return m;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("coefficient '") + spec.name + "': " + e.what());
  }
}

struct TestFunction {
  std::string name;
  std::function<double(double)> f;
};

inline const std::map<std::string, std::function<double(double)>>& test_function_registry() {
  static const std::map<std::string, std::function<double(double)>> reg{
      {"exp_neg", [](double x) { return std::exp(-x); }},
      {"min5", [](double x) { return std::min(x, 5.0); }},
      {"gt1", [](double x) { return x > 1.0 ? 1.0 : 0.0; }},
      {"identity", [](double x) { return x; }},
      {"square", [](double x) { return x * x; }},
  };
  return reg;
}

inline TestFunction make_test_function(const std::string& name) {
  const auto& reg = test_function_registry();
  const auto it = reg.find(name);
  if (it == reg.end()) throw ConfigError("unknown test function '" + name + "'");
  return {name, it->second};
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

using nlohmann::json;

inline void require_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown field '" + k + "'");
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline std::vector<double> numbers(const json& j, const std::string& key, const std::string& where) {
  return get<std::vector<double>>(j, key, where);
}

inline StepSpec parse_step(const json& j, const std::string& where) {
  require_keys(j, where, {"breakpoints", "values"});
  std::vector<double> bp = j.contains("breakpoints") ? numbers(j, "breakpoints", where) : std::vector<double>{};
  std::vector<double> vals = numbers(j, "values", where);
  return {std::move(bp), std::move(vals)};
}

inline LevySpec parse_levy(const json& j, const std::string& where) {
  require_keys(j, where, {"family", "g0", "b"});
  LevySpec s;
  const auto fam = get<std::string>(j, "family", where);
  if (fam == "gamma") {
    s.family = LevyFamily::Gamma;
    if (j.contains("g0") || j.contains("b")) throw ConfigError(where + ": gamma takes no parameters");
  } else if (fam == "tempered_log") {
    s.family = LevyFamily::TemperedLog;
    s.g0 = j.contains("g0") ? get<double>(j, "g0", where) : 1.0;
    s.b = j.contains("b") ? get<double>(j, "b", where) : 1.0;
  } else {
    throw ConfigError(where + ".family: unknown family '" + fam + "' (known: gamma, tempered_log)");
  }
  return s;
}

inline KernelSpec parse_kernel(const json& j, const std::string& where) {
  if (j.is_string()) return KernelSpec{j.get<std::string>(), {}, {}, false, {}, {}, {}};
  if (!j.is_object()) throw ConfigError(where + ": expected a kernel name or object");
  KernelSpec s;
  s.name = get<std::string>(j, "name", where);
  for (const auto& [k, v] : j.items()) {
    if (k == "name") continue;
    if (k == "mode") {
      const auto m = v.is_string() ? v.get<std::string>() : "";
      if (m == "jump") s.mode = KernelMode::JumpWise;
      else if (m == "composition") s.mode = KernelMode::Composition;
      else throw ConfigError(where + ".mode: expected \"jump\" or \"composition\"");
    } else if (k == "normalize") {
      if (!v.is_boolean()) throw ConfigError(where + ".normalize: expected a boolean");
      s.normalize = v.get<bool>();
    } else if (k == "kappa") {
      s.kappa = get<double>(j, k, where);
    } else if (k == "alpha") {
      s.alpha = get<double>(j, k, where);
    } else if (k == "lambda") {
      s.lambda = parse_step(v, where + ".lambda");
    } else {
      if (!v.is_number()) throw ConfigError(where + "." + k + ": expected a number");
      s.params[k] = v.get<double>();
    }
  }
  return s;
}

inline CoefficientSpec parse_coefficient(const json& j, const std::string& where) {
  if (j.is_string()) return CoefficientSpec{j.get<std::string>(), {}};
  CoefficientSpec s;
  s.name = get<std::string>(j, "name", where);
  for (const auto& [k, v] : j.items()) {
    if (k == "name") continue;
    if (!v.is_number()) throw ConfigError(where + "." + k + ": expected a number");
    s.params[k] = v.get<double>();
  }
  return s;
}

inline const std::map<CheckType, std::set<std::string>>& check_fields() {
  static const std::set<std::string> common{"name", "type", "n", "stability"};
  auto with = [](std::set<std::string> extra) {
    extra.insert(common.begin(), common.end());
    return extra;
  };
  static const std::map<CheckType, std::set<std::string>> fields{
      {CheckType::Expectation, with({"levy", "kernel", "lambda", "horizon", "checkpoints", "form", "compensator_scale"})},
      {CheckType::Laplace, with({"levy", "kernel", "horizon", "checkpoints", "lambdas"})},
      {CheckType::Scaling, with({"levy", "kernel", "horizon", "checkpoints"})},
      {CheckType::Distribution, with({"levy", "kernel", "horizon", "checkpoints"})},
      {CheckType::Sde, with({"levy", "coefficient", "horizon", "checkpoints", "test_functions"})},
      {CheckType::DirichletBridge, with({"kernel", "T", "checkpoints"})},
      {CheckType::DirichletLaw, with({"kernel", "T", "checkpoints"})},
      {CheckType::DirichletJump, with({"kernel", "T", "functionals"})},
      {CheckType::Quadrature, with({"levy", "kernels", "a_values"})},
      {CheckType::Doleans, with({"levy", "kernels", "horizon"})},
  };
  return fields;
}

}  // namespace detail

inline CheckSpec parse_check(const nlohmann::json& j, std::size_t index) {
  using namespace detail;
  const std::string where0 = "checks[" + std::to_string(index) + "]";
  if (!j.is_object()) throw ConfigError(where0 + ": expected an object");
  CheckSpec c;
  const auto type_name = get<std::string>(j, "type", where0);
  const auto tit = check_type_names().find(type_name);
  if (tit == check_type_names().end()) throw ConfigError(where0 + ".type: unknown check type '" + type_name + "'");
  c.type = tit->second;
  c.name = j.contains("name") ? get<std::string>(j, "name", where0) : type_name + "_" + std::to_string(index);
  const std::string where = where0 + " (" + c.name + ")";
  require_keys(j, where, check_fields().at(c.type));

  if (j.contains("n")) {
    const auto n = get<long long>(j, "n", where);
    if (n < 2) throw ConfigError(where + ".n: need at least 2 replicates");
    c.n = static_cast<std::size_t>(n);
  }
  if (j.contains("stability")) c.stability = get<bool>(j, "stability", where);
  if (j.contains("levy")) c.levy = parse_levy(j.at("levy"), where + ".levy");
  if (j.contains("kernel")) c.kernel = parse_kernel(j.at("kernel"), where + ".kernel");
  if (j.contains("kernels")) {
    if (!j.at("kernels").is_array()) throw ConfigError(where + ".kernels: expected an array");
    std::size_t i = 0;
    for (const auto& k : j.at("kernels")) c.kernels.push_back(parse_kernel(k, where + ".kernels[" + std::to_string(i++) + "]"));
  }
  if (j.contains("lambda")) c.lambda = parse_step(j.at("lambda"), where + ".lambda");
  if (j.contains("horizon")) c.horizon = get<double>(j, "horizon", where);
  if (j.contains("T")) c.horizon = get<double>(j, "T", where);
  if (j.contains("checkpoints")) c.checkpoints = numbers(j, "checkpoints", where);
  if (j.contains("lambdas")) c.lambdas = numbers(j, "lambdas", where);
  if (j.contains("a_values")) c.a_values = numbers(j, "a_values", where);
  if (j.contains("test_functions")) c.test_functions = get<std::vector<std::string>>(j, "test_functions", where);
  if (j.contains("coefficient")) c.coefficient = parse_coefficient(j.at("coefficient"), where + ".coefficient");
  if (j.contains("form")) c.form = get<std::string>(j, "form", where);
  if (j.contains("compensator_scale")) c.compensator_scale = get<double>(j, "compensator_scale", where);
  if (j.contains("functionals")) {
    std::size_t i = 0;
    for (const auto& f : j.at("functionals")) {
      const auto fw = where + ".functionals[" + std::to_string(i++) + "]";
      require_keys(f, fw, {"name", "t"});
      c.functionals.push_back({get<std::string>(f, "name", fw), get<double>(f, "t", fw)});
    }
  }
  return c;
}

/// Semantic validation of one check: everything that would otherwise fail after sampling started.
inline void validate_check(const CheckSpec& c) {
  const std::string where = "check '" + c.name + "'";
  const bool dirichlet = c.type == CheckType::DirichletBridge || c.type == CheckType::DirichletLaw ||
                         c.type == CheckType::DirichletJump;
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) throw ConfigError(where + ": horizon/T must be > 0");
  if (c.horizon > 100.0) throw ConfigError(where + ": horizon/T above 100 is outside the supported range");
  for (double t : c.checkpoints)
    if (!(t > 0.0) || t > c.horizon) throw ConfigError(where + ": checkpoint " + std::to_string(t) + " outside (0, horizon]");
  const bool needs_checkpoints = c.type != CheckType::Quadrature && c.type != CheckType::Doleans &&
                                 c.type != CheckType::DirichletJump;
  if (needs_checkpoints && c.checkpoints.empty()) throw ConfigError(where + ": needs at least one checkpoint");
  for (double l : c.lambdas)
    if (!(l >= 0.0)) throw ConfigError(where + ": lambdas must be >= 0");
  try {
    const CadlagStep lam(c.lambda.breakpoints, c.lambda.values);
    if (lam.min_value() < 0.0) throw ConfigError(where + ": lambda values must be >= 0");
    for (const auto& k : c.kernels)
      if (k.lambda) {
        const CadlagStep kl(k.lambda->breakpoints, k.lambda->values);
        if (kl.min_value() < 0.0) throw ConfigError(where + ": lambda values must be >= 0");
      }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": lambda: " + e.what());
  }
  make_levy(c.levy);
  if (dirichlet && c.levy.family != LevyFamily::Gamma) throw ConfigError(where + ": Dirichlet checks use the Gamma process");

  switch (c.type) {
    case CheckType::Expectation: {
      const Kernel k = make_kernel(c.kernel);
      if (c.form != "general" && c.form != "gamma") throw ConfigError(where + ": form must be \"general\" or \"gamma\"");
      if (c.form == "gamma" && c.levy.family != LevyFamily::Gamma)
        throw ConfigError(where + ": form \"gamma\" requires the gamma family");
      if (c.form == "gamma" && !c.lambda.breakpoints.empty())
        throw ConfigError(where + ": form \"gamma\" has no Laplace tilt");
      if (c.form == "gamma" && (c.lambda.values.size() != 1 || c.lambda.values[0] != 0.0))
        throw ConfigError(where + ": form \"gamma\" has no Laplace tilt");
      (void)k;
      break;
    }
    case CheckType::Laplace:
      make_kernel(c.kernel);
      if (c.lambdas.empty()) throw ConfigError(where + ": needs at least one lambda");
      break;
    case CheckType::Scaling: {
      if (c.kernel.name != "linear") throw ConfigError(where + ": scaling checks use the linear kernel");
      const Kernel k = make_kernel(c.kernel);
      if (k.mode() != KernelMode::JumpWise) throw ConfigError(where + ": scaling checks are jump-wise");
      break;
    }
    case CheckType::Distribution:
      if (c.levy.family == LevyFamily::Custom) throw ConfigError(where + ": needs a closed-form family");
      make_kernel(c.kernel);
      break;
    case CheckType::Sde:
      make_coefficient(c.coefficient);
      if (c.test_functions.empty()) throw ConfigError(where + ": needs at least one test function");
      for (const auto& f : c.test_functions) make_test_function(f);
      break;
    case CheckType::DirichletBridge:
    case CheckType::DirichletLaw: {
      KernelSpec ks = c.kernel;
      if (!ks.mode) ks.mode = KernelMode::Composition;
      const Kernel k = make_kernel(ks, c.horizon);
      if (k.mode() != KernelMode::Composition) throw ConfigError(where + ": bridge kernels act by composition");
      break;
    }
    case CheckType::DirichletJump: {
      const Kernel k = make_kernel(c.kernel);
      if (k.mode() != KernelMode::JumpWise) throw ConfigError(where + ": Dirichlet jump transforms are jump-wise");
      if (c.functionals.empty()) throw ConfigError(where + ": needs at least one functional");
      for (const auto& f : c.functionals) {
        if (f.name != "marginal_t" && f.name != "marginal_sq_t")
          throw ConfigError(where + ": unknown functional '" + f.name + "' (known: marginal_t, marginal_sq_t)");
        if (!(f.t > 0.0) || f.t > c.horizon) throw ConfigError(where + ": functional time outside (0, T]");
      }
      break;
    }
    case CheckType::Quadrature:
      if (c.kernels.empty()) throw ConfigError(where + ": needs at least one kernel");
      if (c.a_values.empty()) throw ConfigError(where + ": needs at least one a value");
      for (double a : c.a_values)
        if (!(a >= 0.0)) throw ConfigError(where + ": a values must be >= 0");
      for (const auto& k : c.kernels) {
        const Kernel kk = make_kernel(k);
        if (kk.mode() != KernelMode::JumpWise) throw ConfigError(where + ": quadrature kernels must be jump-wise");
      }
      break;
    case CheckType::Doleans:
      if (c.kernels.empty()) throw ConfigError(where + ": needs at least one kernel");
      for (const auto& k : c.kernels) make_kernel(k);
      break;
  }
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  require_keys(j, "config", {"schema_version", "seed", "n", "eps", "threads", "ess_floor", "output", "checks"});
  ExperimentConfig cfg;
  if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
  cfg.schema_version = get<int>(j, "schema_version", "config");
  if (cfg.schema_version != kSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + std::to_string(cfg.schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  if (j.contains("seed")) cfg.seed = get<std::uint64_t>(j, "seed", "config");
  if (j.contains("n")) {
    const auto n = get<long long>(j, "n", "config");
    if (n < 2) throw ConfigError("config.n: need at least 2 replicates");
    cfg.n = static_cast<std::size_t>(n);
  }
  if (j.contains("eps")) cfg.eps = get<double>(j, "eps", "config");
  if (j.contains("threads")) cfg.threads = get<int>(j, "threads", "config");
  if (j.contains("ess_floor")) cfg.ess_floor = get<double>(j, "ess_floor", "config");
  if (j.contains("output")) cfg.output = get<std::string>(j, "output", "config");
  if (!j.contains("checks") || !j.at("checks").is_array()) throw ConfigError("config: 'checks' must be an array");
  std::size_t i = 0;
  for (const auto& c : j.at("checks")) cfg.checks.push_back(parse_check(c, i++));
  return cfg;
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) throw ConfigError("config.eps must lie in (0, 1)");
  if (cfg.threads < 1) throw ConfigError("config.threads must be >= 1");
  if (!(cfg.ess_floor >= 0.0 && cfg.ess_floor <= 1.0)) throw ConfigError("config.ess_floor must lie in [0, 1]");
  std::set<std::string> names;
  for (const auto& c : cfg.checks) {
    if (!names.insert(c.name).second) throw ConfigError("duplicate check name '" + c.name + "'");
    validate_check(c);
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
  ExperimentConfig cfg = parse_config(j);
  validate_config(cfg);
  return cfg;
}

}  // namespace levyq
