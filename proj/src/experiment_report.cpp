#include "otspec/experiment_report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace otspec {

using nlohmann::json;

namespace {

// JSON has no infinities; they travel as strings.
json number_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw std::runtime_error("report: bad number '" + s + "'");
}

Relation relation_from_name(const std::string& s) {
  if (s == "at_most") return Relation::AtMost;
  if (s == "at_least") return Relation::AtLeast;
  if (s == "within") return Relation::Within;
  throw std::runtime_error("report: unknown relation '" + s + "'");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::AtMost: return "at_most";
    case Relation::AtLeast: return "at_least";
    case Relation::Within: return "within";
  }
  return "at_most";
}

const char* library_version() { return "0.1.0"; }

CheckRecord make_check(std::string name, std::string tag, double value, Relation relation, double target,
                       double tolerance) {
  CheckRecord c;
  c.name = std::move(name);
  c.tag = std::move(tag);
  c.value = value;
  c.relation = relation;
  c.target = target;
  c.tolerance = tolerance;
  switch (relation) {
    case Relation::AtMost: c.pass = value <= target + tolerance; break;
    case Relation::AtLeast: c.pass = value >= target - tolerance; break;
    case Relation::Within: c.pass = std::abs(value - target) <= tolerance; break;
  }
  return c;
}

bool ExperimentReport::all_pass() const { return failures() == 0; }

int ExperimentReport::failures() const {
  int n = 0;
  for (const auto& c : checks) {
    if (c.gating && !c.pass) ++n;
  }
  return n;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json to_json(const ExperimentReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"paper_ref", c.tag},
                      {"value", number_json(c.value)},
                      {"relation", relation_name(c.relation)},
                      {"target", number_json(c.target)},
                      {"tolerance", number_json(c.tolerance)},
                      {"pass", c.pass},
                      {"gating", c.gating},
                      {"approximate", c.approximate},
                      {"note", c.note}});
  }
  json j = {{"kind", r.kind},
            {"environment", {{"version", r.version}, {"seed", r.seed}}},
            {"config_hash", r.config_hash},
            {"config", r.config},
            {"checks", checks},
            {"summary", {{"checks", r.checks.size()}, {"failures", r.failures()}, {"pass", r.all_pass()}}},
            {"extras", r.extras}};
  if (r.wall_seconds) j["environment"]["wall_seconds"] = *r.wall_seconds;
  return j;
}

ExperimentReport report_from_json(const json& doc) {
  ExperimentReport r;
  r.kind = doc.at("kind").get<std::string>();
  r.version = doc.at("environment").at("version").get<std::string>();
  r.seed = doc.at("environment").at("seed").get<std::uint64_t>();
  if (doc.at("environment").contains("wall_seconds")) r.wall_seconds = doc.at("environment").at("wall_seconds").get<double>();
  r.config_hash = doc.at("config_hash").get<std::string>();
  r.config = doc.at("config");
  r.extras = doc.at("extras");
  for (const auto& c : doc.at("checks")) {
    CheckRecord rec;
    rec.name = c.at("name").get<std::string>();
    rec.tag = c.at("paper_ref").get<std::string>();
    rec.value = number_from_json(c.at("value"));
    rec.relation = relation_from_name(c.at("relation").get<std::string>());
    rec.target = number_from_json(c.at("target"));
    rec.tolerance = number_from_json(c.at("tolerance"));
    rec.pass = c.at("pass").get<bool>();
    rec.gating = c.at("gating").get<bool>();
    rec.approximate = c.at("approximate").get<bool>();
    rec.note = c.at("note").get<std::string>();
    r.checks.push_back(std::move(rec));
  }
  return r;
}

std::string render_csv(const ExperimentReport& r) {
  std::string out = "check,paper_ref,value,tolerance,pass\n";
  for (const auto& c : r.checks) {
    out += csv_field(c.name) + "," + csv_field(c.tag) + "," + format_double(c.value) + "," + format_double(c.tolerance) +
           "," + (c.pass ? "true" : "false") + "\n";
  }
  return out;
}

void emit_report(const ExperimentReport& r, const std::string& format, const std::string& path) {
  std::string body;
  if (format == "json") {
    body = to_json(r).dump(2) + "\n";
  } else if (format == "csv") {
    body = render_csv(r);
  } else {
    throw std::runtime_error("emit_report: unknown format '" + format + "'");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("emit_report: cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw std::runtime_error("emit_report: write to '" + path + "' failed");
}

}  // namespace otspec
