#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "levyq/config.hpp"
#include "levyq/harness.hpp"
#include "levyq/report.hpp"

using namespace levyq;

namespace {

CheckSpec parse_one(const std::string& check_json) {
  return parse_check(nlohmann::json::parse(check_json), 0);
}

RunSettings settings(std::size_t n, std::uint64_t seed = 42, int threads = 1) {
  RunSettings s;
  s.n = n;
  s.seed = seed;
  s.threads = threads;
  return s;
}

const CheckRow& row(const CheckResult& r, const std::string& label) {
  for (const auto& x : r.rows)
    if (x.checkpoint == label) return x;
  throw std::runtime_error("no row " + label);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Estimators, MeanAndRatio) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto m = mean_estimate(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std_error, std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3.0 / 4.0), 1e-15);
  const std::vector<double> w{1.0, 1.0, 2.0, 0.0};
  std::vector<double> wf(4);
  for (int i = 0; i < 4; ++i) wf[i] = w[i] * v[i];
  const auto r = ratio_estimate(wf, w);
  EXPECT_DOUBLE_EQ(r.mean, (1.0 + 2.0 + 6.0) / 4.0);
  EXPECT_GE(r.std_error, 0.0);
  EXPECT_NEAR(r.ess, 16.0 / 6.0, 1e-15);
  EXPECT_LE(r.ess, 4.0);
}

TEST(Estimators, WeightedKsOfExactQuantiles) {
  std::vector<double> x, w;
  for (int i = 0; i < 1000; ++i) {
    x.push_back(-std::log1p(-(i + 0.5) / 1000.0));
    w.push_back(1.0);
  }
  const double d = weighted_ks(x, w, [](double y) { return -std::expm1(-y); });
  EXPECT_NEAR(d, 0.0005, 1e-12);
}

TEST(Harness, IdentityKernelGivesExactlyOne) {
  const auto c = parse_one(R"({"name":"id","type":"expectation","kernel":"identity","horizon":1,"checkpoints":[0.5,1]})");
  const auto r = run_expectation_check(c, settings(500));
  for (const auto& x : r.rows) {
    EXPECT_EQ(x.estimate, 1.0);
    EXPECT_EQ(x.std_error, 0.0);
    EXPECT_TRUE(x.passed);
  }
}

TEST(Harness, MutatedCompensatorIsDetected) {
  // k = 2 with the compensator sign flipped: log M = -t log 2 - xi_t, so E = 2^{-t} 2^{-t} = 4^{-t}.
  const auto c = parse_one(
      R"({"name":"mut","type":"expectation","kernel":{"name":"linear","c":2},"horizon":1,"checkpoints":[1],"compensator_scale":-1})");
  const auto r = run_expectation_check(c, settings(20000));
  EXPECT_FALSE(r.passed());
  const auto& x = row(r, "t=1");
  EXPECT_LE(std::abs(x.estimate - 0.25), 4.0 * x.std_error);
}

TEST(Harness, LaplaceTargets) {
  const auto c = parse_one(
      R"({"name":"lap","type":"laplace","kernel":{"name":"linear","c":2},"horizon":1,"checkpoints":[1],"lambdas":[0,0.5,1]})");
  const auto r = run_laplace_check(c, settings(20000));
  EXPECT_DOUBLE_EQ(row(r, "lambda=0 t=1").target, 1.0);
  EXPECT_NEAR(row(r, "lambda=0.5 t=1").target, 1.0 / 1.5, 1e-15);
  EXPECT_NEAR(row(r, "lambda=1 t=1").target, 0.5, 1e-15);
  EXPECT_TRUE(r.passed());
}

TEST(Harness, UnweightedDistributionIsExponential) {
  const auto c = parse_one(R"({"name":"d","type":"distribution","kernel":"identity","horizon":1,"checkpoints":[1]})");
  const auto r = run_distribution_check(c, settings(20000));
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(row(r, "t=1 ks").ess, 20000.0);
}

TEST(Harness, DoublingNHalvesVariance) {
  const auto c = parse_one(
      R"({"name":"clt","type":"expectation","kernel":{"name":"damped_exp","a":0.5,"b":1},"horizon":1,"checkpoints":[1]})");
  const double se1 = run_expectation_check(c, settings(10000)).rows[0].std_error;
  const double se4 = run_expectation_check(c, settings(40000)).rows[0].std_error;
  // SE scales as n^{-1/2}: doubling n twice halves it.
  EXPECT_NEAR(se4 / se1, 0.5, 0.1);
  const double se2 = run_expectation_check(c, settings(20000)).rows[0].std_error;
  EXPECT_NEAR(se2 / se1, std::sqrt(0.5), 0.2 * std::sqrt(0.5));
}

TEST(Harness, DeterministicAcrossThreadCounts) {
  const auto c = parse_one(
      R"({"name":"det","type":"sde","coefficient":"rational_decay","horizon":1,"checkpoints":[1],"test_functions":["exp_neg","min5"],"stability":true})");
  const auto a = run_sde_check(c, settings(3000, 7, 1));
  const auto b = run_sde_check(c, settings(3000, 7, 3));
  EXPECT_EQ(report_csv({a}), report_csv({b}));
  const auto other = run_sde_check(c, settings(3000, 8, 1));
  EXPECT_NE(report_csv({a}), report_csv({other}));
}

TEST(Harness, LowEssWarns) {
  auto c = parse_one(
      R"({"name":"w","type":"expectation","kernel":{"name":"linear","c":4},"horizon":1,"checkpoints":[1]})");
  RunSettings s = settings(2000);
  s.ess_floor = 0.9;
  const auto r = run_expectation_check(c, s);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("degenerate"), std::string::npos);
}

TEST(Report, HeaderOnlyAndOneRow) {
  EXPECT_EQ(report_csv({}), std::string(kReportHeader) + "\n");
  CheckResult r;
  r.name = "c";
  r.type = "expectation";
  CheckRow x;
  x.check = "c";
  x.checkpoint = "t=1";
  x.estimate = 1.0;
  x.std_error = 0.5;
  x.target = 1.0;
  x.ess = 10;
  x.n = 10;
  x.seed = 3;
  r.rows.push_back(x);
  const std::string csv = report_csv({r});
  EXPECT_EQ(csv, std::string(kReportHeader) + "\nc,t=1,1,0.5,1,0,10,10,3,true,nan\n");
  const auto j = report_json({r}, RunSettings{});
  EXPECT_EQ(j["checks"][0]["rows"][0]["bound"], nullptr);
  EXPECT_TRUE(j["passed"].get<bool>());
}

TEST(Report, RerunIsByteIdentical) {
  const auto cfg = parse_config(nlohmann::json::parse(R"({"schema_version":1,"seed":5,"n":2000,"checks":[
      {"name":"e","type":"expectation","kernel":{"name":"holder","a":0.5},"horizon":1,"checkpoints":[1],"stability":true},
      {"name":"q","type":"quadrature","kernels":["identity"],"a_values":[1]}]})"));
  const auto dir = std::filesystem::temp_directory_path() / "levyq_rerun";
  std::filesystem::remove_all(dir);
  write_report(run_experiment(cfg), dir / "a", settings_of(cfg));
  write_report(run_experiment(cfg), dir / "b", settings_of(cfg));
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  EXPECT_FALSE(std::filesystem::exists(dir / "a.csv.tmp"));
  std::filesystem::remove_all(dir);
}

TEST(Report, UnwritablePathNamesThePath) {
  try {
    write_atomic("/proc/levyq_cannot_write/x.csv", "x");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/proc/levyq_cannot_write"), std::string::npos);
  }
}

TEST(Config, RejectsUnknownFieldsAndBadValues) {
  auto bad = [](const std::string& s) { return parse_config(nlohmann::json::parse(s)); };
  EXPECT_THROW(bad(R"({"schema_version":1,"checks":[],"colour":1})"), ConfigError);
  EXPECT_THROW(bad(R"({"schema_version":2,"checks":[]})"), ConfigError);
  EXPECT_THROW(bad(R"({"checks":[]})"), ConfigError);
  EXPECT_THROW(bad(R"({"schema_version":1,"checks":[{"type":"nope"}]})"), ConfigError);
  EXPECT_THROW(bad(R"({"schema_version":1,"checks":[{"type":"expectation","kernel":"identity","checkpoints":[1],"extra":1}]})"),
               ConfigError);
  EXPECT_THROW(bad(R"({"schema_version":1,"checks":[{"type":"expectation","levy":{"family":"gamma","b":2},"checkpoints":[1]}]})"),
               ConfigError);
  const auto cfg = bad(R"({"schema_version":1,"checks":[{"type":"expectation","kernel":"identity","horizon":1,"checkpoints":[2]}]})");
  EXPECT_THROW(validate_config(cfg), ConfigError);
  const auto cfg2 = bad(R"({"schema_version":1,"checks":[{"type":"dirichlet_bridge","kernel":"damped_exp","T":1,"checkpoints":[1]}]})");
  EXPECT_THROW(validate_config(cfg2), ConfigError);
}

TEST(Config, MissingAndMalformedFiles) {
  EXPECT_THROW(load_config("/nonexistent/levyq.json"), ConfigError);
  const auto file = std::filesystem::temp_directory_path() / "levyq_malformed.json";
  std::ofstream(file) << "{ not json";
  EXPECT_THROW(load_config(file.string()), ConfigError);
  std::filesystem::remove(file);
}

TEST(Config, RepositoryConfigsValidate) {
  for (const auto& entry : std::filesystem::directory_iterator(LEVYQ_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
  }
}
