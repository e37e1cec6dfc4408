// otspec: config-driven experiment runner.
//
//   otspec run --config exp.json [--seed N] [--samples N] [--out PATH] [--format json|csv] [--dump-samples]
//   otspec <kind> [--config exp.json] [same overrides]
//   otspec defaults <kind>
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
// 3 runtime error.

#include "otspec/experiment_config.hpp"
#include "otspec/experiment_report.hpp"
#include "otspec/experiment_runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using nlohmann::json;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long> samples;
  std::string out;
  std::string format;
  bool dump_samples = false;
};

void add_run_options(CLI::App* cmd, Overrides& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config_path, "experiment configuration (JSON)");
  if (config_required) c->required();
  cmd->add_option("--seed", o.seed, "override the seed");
  cmd->add_option("--samples", o.samples, "override the Monte Carlo sample count");
  cmd->add_option("--out", o.out, "report path (default: <dir>/<kind>-<hash>.<format>)");
  cmd->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  cmd->add_flag("--dump-samples", o.dump_samples, "write plot-ready CSV of Lambda(X) samples");
}

json load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw otspec::ConfigError({{"", "cannot open config file '" + path + "'"}});
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw otspec::ConfigError({{"", "'" + path + "' is not valid JSON: " + e.what()}});
  }
}

std::filesystem::path output_dir(const otspec::ExperimentConfig& cfg) {
  if (!cfg.output.dir.empty()) return cfg.output.dir;
  if (const char* env = std::getenv("OTSPEC_OUT_DIR"); env && *env) return env;
  return std::filesystem::current_path();
}

int run(const std::optional<std::string>& kind, const Overrides& o) {
  otspec::ExperimentConfig cfg;
  try {
    json doc = o.config_path.empty() ? json::object() : load_document(o.config_path);
    if (kind) {
      if (doc.is_object() && doc.contains("kind") && doc["kind"] != *kind) {
        throw otspec::ConfigError({{"/kind", "config kind " + doc["kind"].dump() + " does not match subcommand '" + *kind + "'"}});
      }
      if (doc.is_object()) doc["kind"] = *kind;
    }
    if (doc.is_object()) {
      if (o.seed) doc["seed"] = *o.seed;
      if (o.samples) doc["samples"] = *o.samples;
      if (!o.format.empty()) doc["output"]["format"] = o.format;
      if (o.dump_samples) doc["output"]["dump_samples"] = true;
    }
    cfg = otspec::parse_config_json(doc);
  } catch (const otspec::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    const std::filesystem::path dir = output_dir(cfg);
    const std::string hash = otspec::config_hash(cfg);
    const std::string stem = std::string(otspec::kind_name(cfg.kind)) + "-" + hash;
    std::filesystem::create_directories(dir);
    int dumped = 0;
    otspec::SampleSink sink;
    if (cfg.output.dump_samples) {
      sink = [&](const std::string& experiment, const otspec::SpectralSampleSet& set) {
        const auto path = dir / (stem + "-samples-" + std::to_string(dumped++) + ".csv");
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write samples to '" + path.string() + "'");
        out << "# " << experiment << "\n" << otspec::samples_csv(set);
      };
    }
    const otspec::ExperimentReport report = otspec::run_experiment(cfg, sink);
    const std::filesystem::path path = o.out.empty() ? dir / (stem + "." + cfg.output.format) : std::filesystem::path(o.out);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    otspec::emit_report(report, cfg.output.format, path.string());
    std::cout << cfg.output.format << " report: " << path.string() << "\n"
              << report.checks.size() << " checks, " << report.failures() << " failed\n";
    for (const auto& c : report.checks) {
      if (c.gating && !c.pass) std::cout << "FAIL " << c.name << " value=" << otspec::format_double(c.value) << " " << c.note << "\n";
    }
    return report.all_pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiments on Brenier maps, SPD geometry and eigenvalue concentration"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run_cmd = app.add_subcommand("run", "run the experiment described by --config");
  add_run_options(run_cmd, run_opts, true);

  std::vector<std::pair<std::string, Overrides>> kind_opts;
  kind_opts.reserve(otspec::kind_names().size());
  std::vector<CLI::App*> kind_cmds;
  for (const auto& k : otspec::kind_names()) {
    kind_opts.emplace_back(k, Overrides{});
    auto* cmd = app.add_subcommand(k, "run a " + k + " experiment (defaults unless --config)");
    add_run_options(cmd, kind_opts.back().second, false);
    kind_cmds.push_back(cmd);
  }

  std::string defaults_kind;
  auto* defaults_cmd = app.add_subcommand("defaults", "print the default configuration for a kind");
  defaults_cmd->add_option("kind", defaults_kind, "experiment kind")->required()->check(CLI::IsMember(otspec::kind_names()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*defaults_cmd) {
    otspec::ExperimentConfig cfg;
    cfg.kind = *otspec::parse_kind(defaults_kind);
    std::cout << otspec::to_json(cfg).dump(2) << "\n";
    return 0;
  }
  if (*run_cmd) return run(std::nullopt, run_opts);
  for (std::size_t i = 0; i < kind_cmds.size(); ++i) {
    if (*kind_cmds[i]) return run(kind_opts[i].first, kind_opts[i].second);
  }
  return 2;
}
