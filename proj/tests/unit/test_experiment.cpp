#include "otspec/experiment_config.hpp"
#include "otspec/experiment_report.hpp"
#include "otspec/experiment_runner.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace otspec;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json pair_config() {
  return json{{"kind", "variance"}, {"seed", 7}, {"samples", 2000},
              {"source", "uniform(0, 1)"}, {"target", "exponential(1)"}};
}

bool has_violation(const ConfigError& e, const std::string& path, const std::string& fragment) {
  for (const auto& v : e.violations()) {
    if (v.path == path && v.message.find(fragment) != std::string::npos) return true;
  }
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("otspec_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OTSPEC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Config, DefaultsForEmptyDocument) {
  const ExperimentConfig c = parse_config_json(json{{"kind", "poincare"}});
  EXPECT_EQ(c.kind, ExperimentKind::Poincare);
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.samples, 100000);
  EXPECT_EQ(c.quadrature_nodes, 2048);
  EXPECT_DOUBLE_EQ(c.c, 0.1);
  EXPECT_TRUE(c.catalog());
  EXPECT_EQ(c.sinkhorn.grid, 64);
  EXPECT_EQ(c.output.format, "json");
  EXPECT_FALSE(c.output.timing);
}

TEST(Config, RoundTripThroughCanonicalJson) {
  const ExperimentConfig a = parse_config_json(pair_config());
  const ExperimentConfig b = parse_config_json(to_json(a));
  EXPECT_TRUE(a == b);
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, HashChangesWithSeed) {
  json d = pair_config();
  const std::string h1 = config_hash(parse_config_json(d));
  d["seed"] = 8;
  EXPECT_NE(h1, config_hash(parse_config_json(d)));
}

TEST(Config, KindNamesRoundTrip) {
  for (const auto& n : kind_names()) {
    const auto k = parse_kind(n);
    ASSERT_TRUE(k.has_value()) << n;
    EXPECT_EQ(kind_name(*k), n);
  }
  EXPECT_FALSE(parse_kind("nope").has_value());
}

TEST(Config, RejectsNonLogConcaveGamma) {
  json d = pair_config();
  d["source"] = "gamma(0.5, 1)";
  try {
    (void)parse_config_json(d);
    FAIL() << "accepted gamma(0.5, 1)";
  } catch (const ConfigError& e) {
    EXPECT_TRUE(has_violation(e, "/source", "log-concav")) << e.what();
  }
}

TEST(Config, RejectsUnknownKeysWithPath) {
  json d = pair_config();
  d["sampels"] = 10;
  d["geometry"] = {{"pairs", 10}, {"bogus", true}};
  try {
    (void)parse_config_json(d);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(has_violation(e, "/sampels", "unknown")) << e.what();
    EXPECT_TRUE(has_violation(e, "/geometry/bogus", "unknown")) << e.what();
  }
}

TEST(Config, CollectsEveryViolation) {
  json d = pair_config();
  d["samples"] = -5;
  d["c"] = 0.0;
  d["output"] = {{"format", "xml"}};
  try {
    (void)parse_config_json(d);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_GE(e.violations().size(), 3u);
    EXPECT_TRUE(has_violation(e, "/samples", ""));
    EXPECT_TRUE(has_violation(e, "/c", ""));
    EXPECT_TRUE(has_violation(e, "/output/format", ""));
  }
}

TEST(Config, SourceRequiresTarget) {
  json d = pair_config();
  d.erase("target");
  EXPECT_THROW((void)parse_config_json(d), ConfigError);
}

TEST(Config, MismatchedDimensionsRejected) {
  json d = pair_config();
  d["target"] = json::array({"gaussian(0, 1)", "gaussian(0, 1)"});
  EXPECT_THROW((void)parse_config_json(d), ConfigError);
}

TEST(Config, UnreadableFileIsConfigError) {
  EXPECT_THROW((void)parse_config("/nonexistent/otspec.json"), ConfigError);
}

TEST(Report, EmptyReportIsValidJson) {
  ExperimentReport r;
  r.kind = "variance";
  r.version = library_version();
  const json j = to_json(r);
  EXPECT_TRUE(j["checks"].is_array());
  EXPECT_EQ(j["checks"].size(), 0u);
  EXPECT_EQ(j["summary"]["pass"], true);
  json reparsed;
  EXPECT_NO_THROW(reparsed = json::parse(j.dump()));
  EXPECT_EQ(reparsed, j);
}

TEST(Report, JsonRoundTripPreservesNonFinite) {
  ExperimentReport r;
  r.kind = "concentration";
  r.version = library_version();
  r.checks.push_back(make_check("a", "tag", std::numeric_limits<double>::infinity(), Relation::AtMost, 2.0, 0.1));
  r.checks.push_back(make_check("b", "tag", 0.5, Relation::Within, 0.4, 0.2));
  const ExperimentReport back = report_from_json(json::parse(to_json(r).dump()));
  ASSERT_EQ(back.checks.size(), 2u);
  EXPECT_TRUE(std::isinf(back.checks[0].value));
  EXPECT_FALSE(back.checks[0].pass);
  EXPECT_TRUE(back.checks[1].pass);
  EXPECT_EQ(back.failures(), 1);
}

TEST(Report, MakeCheckRelations) {
  EXPECT_TRUE(make_check("x", "", 1.05, Relation::AtMost, 1.0, 0.1).pass);
  EXPECT_FALSE(make_check("x", "", 1.2, Relation::AtMost, 1.0, 0.1).pass);
  EXPECT_TRUE(make_check("x", "", 0.95, Relation::AtLeast, 1.0, 0.1).pass);
  EXPECT_FALSE(make_check("x", "", 0.5, Relation::Within, 1.0, 0.1).pass);
}

TEST(Report, NonGatingFailureDoesNotFailRun) {
  ExperimentReport r;
  CheckRecord c = make_check("x", "", 5.0, Relation::AtMost, 1.0, 0.0);
  c.gating = false;
  r.checks.push_back(c);
  EXPECT_TRUE(r.all_pass());
}

TEST(Report, CsvHasHeaderAndOneRowPerCheck) {
  const ExperimentReport r = run_experiment(parse_config_json(pair_config()));
  const std::string csv = render_csv(r);
  EXPECT_EQ(csv.rfind("check,paper_ref,value,tolerance,pass\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.checks.size() + 1);
}

TEST(Runner, VariancePairReportsUnitVariance) {
  const ExperimentReport r = run_experiment(parse_config_json(pair_config()));
  EXPECT_TRUE(r.all_pass());
  bool found = false;
  for (const auto& c : r.checks) {
    if (c.name.find("variance") != std::string::npos && std::abs(c.value - 1.0) < 1e-6) found = true;
  }
  EXPECT_TRUE(found);
}

TEST(Runner, ReportsAreByteIdenticalForSeed) {
  const ExperimentConfig c = parse_config_json(pair_config());
  EXPECT_EQ(to_json(run_experiment(c)).dump(2), to_json(run_experiment(c)).dump(2));
}

TEST(Runner, CatalogIsWellFormed) {
  const auto pairs = catalog_pairs();
  EXPECT_EQ(pairs.size(), 12u);
  for (const auto& p : pairs) EXPECT_NO_THROW((void)build_map_experiment(p));
  EXPECT_EQ(variance_grid_measures().size(), 8u);
  EXPECT_EQ(default_floor_pairs().size(), 3u);
}

TEST(Cli, ExitCodeContract) {
  const fs::path dir = scratch("cli");
  write_file(dir / "ok.json", pair_config().dump());
  EXPECT_EQ(run_cli("run --config " + (dir / "ok.json").string() + " --out " + (dir / "ok.json.out").string()), 0);

  json bad = pair_config();
  bad["source"] = "gamma(0.5, 1)";
  write_file(dir / "bad.json", bad.dump());
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string()), 2);
  write_file(dir / "broken.json", "{ not json");
  EXPECT_EQ(run_cli("run --config " + (dir / "broken.json").string()), 2);
  EXPECT_EQ(run_cli("run"), 2);
  EXPECT_EQ(run_cli("no-such-command"), 2);

  json failing = {{"kind", "sinkhorn2d"}, {"sinkhorn", {{"grid", 16}, {"oracle_tolerance", 1e-9}}}};
  write_file(dir / "fail.json", failing.dump());
  EXPECT_EQ(run_cli("run --config " + (dir / "fail.json").string() + " --out " + (dir / "fail.out").string()), 1);

  write_file(dir / "blocker", "");
  EXPECT_EQ(run_cli("run --config " + (dir / "ok.json").string() + " --out " + (dir / "blocker" / "r.json").string()), 3);
  fs::remove_all(dir);
}

TEST(Cli, OutputDirectoryFromEnvironmentAndByteIdentity) {
  const fs::path dir = scratch("env");
  write_file(dir / "ok.json", pair_config().dump());
  const std::string env = "OTSPEC_OUT_DIR=" + (dir / "a").string() + " ";
  const std::string cmd = std::string(OTSPEC_CLI_PATH) + " run --config " + (dir / "ok.json").string();
  ASSERT_EQ(std::system((env + cmd + " > /dev/null").c_str()), 0);
  ASSERT_EQ(std::system(("OTSPEC_OUT_DIR=" + (dir / "b").string() + " " + cmd + " > /dev/null").c_str()), 0);
  const std::string name = "variance-" + config_hash(parse_config_json(pair_config())) + ".json";
  ASSERT_TRUE(fs::exists(dir / "a" / name));
  EXPECT_EQ(slurp(dir / "a" / name), slurp(dir / "b" / name));
  ExperimentReport parsed;
  EXPECT_NO_THROW(parsed = report_from_json(json::parse(slurp(dir / "a" / name))));
  EXPECT_TRUE(parsed.all_pass());
  fs::remove_all(dir);
}

TEST(Cli, DumpSamplesAndCsvFormat) {
  const fs::path dir = scratch("dump");
  json cfg = pair_config();
  cfg["kind"] = "poincare";  // 1D variance uses quadrature and draws no samples
  cfg["output"] = {{"dir", dir.string()}};
  write_file(dir / "cfg.json", cfg.dump());
  ASSERT_EQ(run_cli("run --config " + (dir / "cfg.json").string() + " --format csv --dump-samples"), 0);
  int csv = 0, samples = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (n.find("-samples-") != std::string::npos) ++samples;
    else if (e.path().extension() == ".csv") ++csv;
  }
  EXPECT_EQ(csv, 1);
  EXPECT_GE(samples, 1);
  fs::remove_all(dir);
}

TEST(Cli, DefaultsPrintsParsableConfig) {
  const fs::path dir = scratch("defaults");
  const std::string cmd = std::string(OTSPEC_CLI_PATH) + " defaults gamma2-check > " + (dir / "d.json").string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const ExperimentConfig c = parse_config_json(json::parse(slurp(dir / "d.json")));
  EXPECT_EQ(c.kind, ExperimentKind::Gamma2Check);
  fs::remove_all(dir);
}
