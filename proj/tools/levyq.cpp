// levyq: sample subordinator paths, evaluate densities, and run verification batteries.
//
// Exit codes: 0 all checks passed, 1 a check failed, 2 usage, configuration or I/O error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "levyq/levyq.hpp"

namespace {

using namespace levyq;

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kError = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::optional<double> eps;
  std::optional<int> threads;
  std::string out;
};

void add_common(CLI::App* cmd, Overrides& o, bool needs_config) {
  auto* c = cmd->add_option("--config", o.config, "experiment config (JSON)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--n", o.n, "replicates per check")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
  cmd->add_option("--eps", o.eps, "jump truncation level")->check(CLI::Range(1e-300, 1.0));
  cmd->add_option("--threads", o.threads, "worker threads (fallback: LEVYQ_THREADS)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output path");
}

int resolve_threads(const Overrides& o, int config_value) {
  if (o.threads) return *o.threads;
  return threads_from_env(config_value);
}

ExperimentConfig load_with_overrides(const Overrides& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.n) cfg.n = *o.n;
  if (o.eps) cfg.eps = *o.eps;
  cfg.threads = resolve_threads(o, cfg.threads);
  if (!o.out.empty()) cfg.output = o.out;
  validate_config(cfg);
  return cfg;
}

std::string report_stem(const ExperimentConfig& cfg, const std::string& config_path) {
  if (!cfg.output.empty()) return cfg.output;
  std::filesystem::path p(config_path);
  return (p.parent_path() / (p.stem().string() + "_report")).string();
}

int run_battery(const Overrides& o, const std::vector<CheckType>& only, const std::string& verb) {
  ExperimentConfig cfg = load_with_overrides(o);
  if (!only.empty()) {
    std::vector<CheckSpec> kept;
    for (const auto& c : cfg.checks)
      if (std::find(only.begin(), only.end(), c.type) != only.end()) kept.push_back(c);
    if (kept.empty()) throw ConfigError("config '" + o.config + "' has no checks for '" + verb + "'");
    cfg.checks = std::move(kept);
  }
  const RunSettings s = settings_of(cfg);
  std::vector<CheckResult> results;
  for (const auto& c : cfg.checks) {
    results.push_back(run_check(c, s));
    const auto& r = results.back();
    std::printf("%-28s %-17s %s\n", r.name.c_str(), r.type.c_str(), r.passed() ? "pass" : "FAIL");
    for (const auto& row : r.rows) {
      if (row.passed) continue;
      std::printf("    %s: estimate %.6g, target %.6g, se %.3g, z %.3g, bound %.3g\n", row.checkpoint.c_str(),
                  row.estimate, row.target, row.std_error, row.z, row.bound);
    }
    for (const auto& w : r.warnings) std::printf("    warning: %s\n", w.c_str());
  }
  const std::string stem = report_stem(cfg, o.config);
  write_report(results, stem, s);
  std::printf("report: %s.csv, %s.json\n", stem.c_str(), stem.c_str());
  const bool all = std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed(); });
  return all ? kPass : kFail;
}

LevySpec levy_from_flags(const std::string& family, std::optional<double> g0, std::optional<double> b) {
  nlohmann::json j{{"family", family}};
  if (g0) j["g0"] = *g0;
  if (b) j["b"] = *b;
  return detail::parse_levy(j, "--levy");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"levyq: quasi-invariance of class-(L) subordinators, verified by Monte Carlo"};
  app.require_subcommand(1);

  Overrides verify_o, dir_o, sde_o, quad_o, sim_o, dens_o;

  auto* verify = app.add_subcommand("verify", "run every check in a config");
  add_common(verify, verify_o, true);
  auto* dirichlet = app.add_subcommand("dirichlet", "run the Dirichlet checks in a config");
  add_common(dirichlet, dir_o, true);
  auto* sde = app.add_subcommand("sde", "run the SDE checks in a config");
  add_common(sde, sde_o, true);

  auto* quadcheck = app.add_subcommand("quadcheck", "quadrature identity for the compensator, per kernel and a");
  add_common(quadcheck, quad_o, false);
  std::string quad_levy = "gamma";
  std::optional<double> quad_g0, quad_b;
  quadcheck->add_option("--levy", quad_levy, "gamma or tempered_log");
  quadcheck->add_option("--g0", quad_g0, "g0 for tempered_log");
  quadcheck->add_option("--b", quad_b, "tempering rate for tempered_log");

  auto* simulate = app.add_subcommand("simulate", "sample truncated paths to CSV");
  add_common(simulate, sim_o, false);
  std::string sim_levy = "gamma";
  std::optional<double> sim_g0, sim_b;
  double sim_horizon = 1.0;
  simulate->add_option("--levy", sim_levy, "gamma or tempered_log");
  simulate->add_option("--g0", sim_g0, "g0 for tempered_log");
  simulate->add_option("--b", sim_b, "tempering rate for tempered_log");
  simulate->add_option("--horizon", sim_horizon, "path horizon")->check(CLI::PositiveNumber);

  auto* density = app.add_subcommand("density", "log-density records (JSON lines) for given or sampled paths");
  add_common(density, dens_o, false);
  std::string dens_levy = "gamma";
  std::optional<double> dens_g0, dens_b, dens_t;
  double dens_horizon = 1.0;
  std::string dens_kernel = R"({"name":"identity"})";
  std::vector<std::string> dens_paths;
  density->add_option("--levy", dens_levy, "gamma or tempered_log");
  density->add_option("--g0", dens_g0, "g0 for tempered_log");
  density->add_option("--b", dens_b, "tempering rate for tempered_log");
  density->add_option("--horizon", dens_horizon, "horizon of sampled paths")->check(CLI::PositiveNumber);
  density->add_option("--t", dens_t, "evaluation time (default: horizon)");
  density->add_option("--kernel", dens_kernel, "kernel as JSON, e.g. {\"name\":\"linear\",\"c\":2}");
  density->add_option("--path", dens_paths, "path CSV files written by simulate")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kError;
  }

  try {
    if (verify->parsed()) return run_battery(verify_o, {}, "verify");
    if (dirichlet->parsed())
      return run_battery(dir_o, {CheckType::DirichletBridge, CheckType::DirichletLaw, CheckType::DirichletJump},
                         "dirichlet");
    if (sde->parsed()) return run_battery(sde_o, {CheckType::Sde}, "sde");

    if (quadcheck->parsed()) {
      if (!quad_o.config.empty()) return run_battery(quad_o, {CheckType::Quadrature}, "quadcheck");
      CheckSpec c;
      c.name = "quadcheck";
      c.type = CheckType::Quadrature;
      c.levy = levy_from_flags(quad_levy, quad_g0, quad_b);
      auto spec = [](std::string name, std::map<std::string, double> params) {
        KernelSpec k;
        k.name = std::move(name);
        k.params = std::move(params);
        return k;
      };
      c.kernels = {spec("linear", {{"c", 2.0}}), spec("damped_exp", {{"a", 0.5}, {"b", 1.0}}),
                   spec("holder", {{"a", 0.5}}), spec("modulated_exp", {{"a", 0.5}})};
      c.a_values = {0.0, 0.5, 1.0, 2.0};
      validate_check(c);
      RunSettings s;
      if (quad_o.seed) s.seed = *quad_o.seed;
      const CheckResult r = run_quadrature_check(c, s);
      std::printf("%-26s %22s %22s %10s\n", "case", "integral", "target", "|diff|");
      for (const auto& row : r.rows) {
        if (row.checkpoint.find("bound") != std::string::npos) continue;
        std::printf("%-26s %22.15g %22.15g %10.2e%s\n", row.checkpoint.c_str(), row.estimate, row.target,
                    std::abs(row.estimate - row.target), row.passed ? "" : "  FAIL");
      }
      if (!quad_o.out.empty()) write_report({r}, quad_o.out, s);
      return r.passed() ? kPass : kFail;
    }

    if (simulate->parsed()) {
      const LevyDensity levy = make_levy(levy_from_flags(sim_levy, sim_g0, sim_b));
      const TailFunction tail(levy);
      const std::uint64_t seed = sim_o.seed.value_or(42);
      const std::size_t n = sim_o.n.value_or(1);
      const double eps = sim_o.eps.value_or(1e-6);
      if (!(eps < 1.0)) throw ConfigError("--eps must be below 1");
      const std::filesystem::path dir = sim_o.out.empty() ? std::filesystem::path("paths") : std::filesystem::path(sim_o.out);
      std::vector<JumpPath> paths(n);
      parallel_for(n, resolve_threads(sim_o, 1), [&](std::size_t i) {
        paths[i] = sample_jump_path(tail, sim_horizon, eps, stream_seed(seed, i));
      });
      for (std::size_t i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "path_%06zu.csv", i);
        write_atomic(dir / name, path_csv(paths[i], levy));
      }
      std::printf("wrote %zu paths to %s\n", n, dir.string().c_str());
      return kPass;
    }

    if (density->parsed()) {
      const LevyDensity levy = make_levy(levy_from_flags(dens_levy, dens_g0, dens_b));
      nlohmann::json kj;
      try {
        kj = nlohmann::json::parse(dens_kernel);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("--kernel: malformed JSON: ") + e.what());
      }
      const Kernel kernel = make_kernel(detail::parse_kernel(kj, "--kernel"));
      const PredictableTransform tr = transform_of(kernel);
      std::vector<std::pair<std::string, JumpPath>> paths;
      for (const auto& f : dens_paths) paths.emplace_back(f, read_path_csv(f));
      if (paths.empty()) {
        const TailFunction tail(levy);
        const std::uint64_t seed = dens_o.seed.value_or(42);
        for (std::size_t i = 0; i < dens_o.n.value_or(1); ++i)
          paths.emplace_back("sample " + std::to_string(i),
                             sample_jump_path(tail, dens_horizon, dens_o.eps.value_or(1e-6), stream_seed(seed, i)));
      }
      std::string out;
      for (const auto& [label, p] : paths) {
        const double t = dens_t.value_or(p.horizon());
        if (!(t >= 0.0) || t > p.horizon()) throw ConfigError("--t outside [0, horizon] for " + label);
        const LogDensity ld = log_density_general(p, tr, levy, CadlagStep::constant(0.0), t);
        nlohmann::json rec = log_density_json(ld);
        rec["path"] = label;
        rec["t"] = t;
        rec["kernel"] = kernel.name();
        rec["mode"] = to_string(kernel.mode());
        rec["jumps"] = p.count_until(t);
        out += rec.dump() + "\n";
      }
      if (dens_o.out.empty()) std::fputs(out.c_str(), stdout);
      else write_atomic(dens_o.out, out);
      return kPass;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "levyq: config error: %s\n", e.what());
    return kError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "levyq: error: %s\n", e.what());
    return kError;
  }
  return kError;
}
