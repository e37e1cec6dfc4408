#pragma once

// Per-check records and their JSON / CSV serializations.

#include "otspec/experiment_config.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace otspec {

enum class Relation { AtMost, AtLeast, Within };

const char* relation_name(Relation r);

// One check: value compared against target with the given tolerance.
//   AtMost:  value <= target + tolerance
//   AtLeast: value >= target - tolerance
//   Within:  |value - target| <= tolerance
struct CheckRecord {
  std::string name;
  std::string tag;  // short reference tag for the statement being checked
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  Relation relation = Relation::AtMost;
  bool pass = false;
  bool gating = true;
  bool approximate = false;
  std::string note;
};

CheckRecord make_check(std::string name, std::string tag, double value, Relation relation, double target,
                       double tolerance);

struct ExperimentReport {
  std::string kind;
  std::string version;
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config;
  std::vector<CheckRecord> checks;
  nlohmann::json extras = nlohmann::json::object();  // tables and sweeps, never gating
  std::optional<double> wall_seconds;

  // All gating checks pass.
  [[nodiscard]] bool all_pass() const;
  [[nodiscard]] int failures() const;
};

const char* library_version();

nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& doc);

// Header check,paper_ref,value,tolerance,pass then one row per check.
std::string render_csv(const ExperimentReport& r);

// format: json | csv. Throws std::runtime_error with the path on I/O failure.
void emit_report(const ExperimentReport& r, const std::string& format, const std::string& path);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace otspec
