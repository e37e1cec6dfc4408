#include "otspec/experiment_config.hpp"

#include "otspec/errors.hpp"
#include "otspec/measures.hpp"
#include "otspec/spd_geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace otspec {

using nlohmann::json;

namespace {

constexpr std::pair<ExperimentKind, const char*> kKinds[] = {
    {ExperimentKind::GeometrySelftest, "geometry-selftest"},
    {ExperimentKind::Variance, "variance"},
    {ExperimentKind::Poincare, "poincare"},
    {ExperimentKind::Concentration, "concentration"},
    {ExperimentKind::Gamma2Check, "gamma2-check"},
    {ExperimentKind::Sinkhorn2D, "sinkhorn2d"},
    {ExperimentKind::Regularization, "regularization"},
};

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

// Collects every violation instead of stopping at the first.
class Validator {
 public:
  void fail(const std::string& path, const std::string& message) { violations_.push_back({path, message}); }
  [[nodiscard]] bool ok() const { return violations_.empty(); }
  [[nodiscard]] std::vector<ConfigViolation> take() { return std::move(violations_); }

  void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
      if (!known) fail(path + "/" + it.key(), "unknown key");
    }
  }

  bool object(const json& obj, const std::string& path) {
    if (obj.is_object()) return true;
    fail(path, "expected an object");
    return false;
  }

  template <class Int>
  void integer(const json& obj, const char* key, const std::string& path, Int& out, long long lo, long long hi) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    const std::string p = path + "/" + key;
    if (!v.is_number_integer()) {
      fail(p, "expected an integer");
      return;
    }
    if (v.is_number_unsigned()) {
      const auto u = v.get<unsigned long long>();
      if (hi >= 0 && u > static_cast<unsigned long long>(hi)) {
        fail(p, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return;
      }
      out = static_cast<Int>(u);
      return;
    }
    const auto s = v.get<long long>();
    if (s < lo || (hi >= 0 && s > hi)) {
      fail(p, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      return;
    }
    out = static_cast<Int>(s);
  }

  void real(const json& obj, const char* key, const std::string& path, double& out, double lo, double hi,
            bool open_lo = false) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    const std::string p = path + "/" + key;
    if (!v.is_number()) {
      fail(p, "expected a number");
      return;
    }
    const double d = v.get<double>();
    if (!(open_lo ? d > lo : d >= lo) || !(d <= hi)) {
      std::ostringstream os;
      os << "must lie in " << (open_lo ? "(" : "[") << lo << ", " << hi << "]";
      fail(p, os.str());
      return;
    }
    out = d;
  }

  void boolean(const json& obj, const char* key, const std::string& path, bool& out) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_boolean()) {
      fail(path + "/" + key, "expected true or false");
      return;
    }
    out = obj.at(key).get<bool>();
  }

  void string(const json& obj, const char* key, const std::string& path, std::string& out,
              const std::vector<std::string>& choices = {}) {
    if (!obj.contains(key)) return;
    const std::string p = path + "/" + key;
    if (!obj.at(key).is_string()) {
      fail(p, "expected a string");
      return;
    }
    const std::string s = obj.at(key).get<std::string>();
    if (!choices.empty() && std::find(choices.begin(), choices.end(), s) == choices.end()) {
      fail(p, "'" + s + "' is not one of: " + join(choices));
      return;
    }
    out = s;
  }

  // Returns the dimension of a valid measure spec, or 0.
  int measure(const json& spec, const std::string& path) {
    try {
      if (spec.is_string()) {
        parse_measure_spec(spec.get<std::string>());
        return 1;
      }
      if (spec.is_array()) {
        if (spec.empty()) {
          fail(path, "product measure needs at least one factor");
          return 0;
        }
        int n = 0;
        for (std::size_t i = 0; i < spec.size(); ++i) {
          const std::string p = path + "/" + std::to_string(i);
          if (!spec[i].is_string()) {
            fail(p, "product factors must be 1D measure specs");
            continue;
          }
          if (measure(spec[i], p) == 1) ++n;
        }
        return n == static_cast<int>(spec.size()) ? n : 0;
      }
      if (spec.is_object() && spec.size() == 1 && spec.contains("gaussian")) return gaussian(spec.at("gaussian"), path + "/gaussian");
      if (spec.is_object() && spec.size() == 1 && spec.contains("radial")) return radial(spec.at("radial"), path + "/radial");
      fail(path, "expected a 1D spec string, an array of them, {\"gaussian\": ...} or {\"radial\": ...}");
    } catch (const DomainError& e) {
      fail(path, e.what());
    }
    return 0;
  }

 private:
  int gaussian(const json& g, const std::string& path) {
    if (!object(g, path)) return 0;
    reject_unknown(g, path, {"mean", "cov"});
    if (!g.contains("mean") || !g.contains("cov")) {
      fail(path, "needs 'mean' and 'cov'");
      return 0;
    }
    const json& m = g.at("mean");
    const json& c = g.at("cov");
    if (!m.is_array() || m.empty() || !std::all_of(m.begin(), m.end(), [](const json& v) { return v.is_number(); })) {
      fail(path + "/mean", "expected a non-empty array of numbers");
      return 0;
    }
    const int n = static_cast<int>(m.size());
    if (!c.is_array() || static_cast<int>(c.size()) != n) {
      fail(path + "/cov", "expected a " + std::to_string(n) + "x" + std::to_string(n) + " array");
      return 0;
    }
    Mat cov(n, n);
    for (int i = 0; i < n; ++i) {
      if (!c[i].is_array() || static_cast<int>(c[i].size()) != n) {
        fail(path + "/cov/" + std::to_string(i), "expected a row of " + std::to_string(n) + " numbers");
        return 0;
      }
      for (int j = 0; j < n; ++j) {
        if (!c[i][j].is_number()) {
          fail(path + "/cov/" + std::to_string(i) + "/" + std::to_string(j), "expected a number");
          return 0;
        }
        cov(i, j) = c[i][j].get<double>();
      }
    }
    try {
      SpdMatrix check(cov);
    } catch (const DomainError& e) {
      fail(path + "/cov", std::string("covariance must be symmetric positive-definite: ") + e.what());
      return 0;
    }
    return n;
  }

  int radial(const json& r, const std::string& path) {
    if (!object(r, path)) return 0;
    reject_unknown(r, path, {"kind", "dim", "param"});
    std::string kind;
    int dim = 0;
    double param = 0.0;
    const std::size_t before = violations_.size();
    if (!r.contains("kind") || !r.contains("dim") || !r.contains("param")) {
      fail(path, "needs 'kind', 'dim' and 'param'");
      return 0;
    }
    string(r, "kind", path, kind, {"uniform_ball", "gaussian", "exponential"});
    integer(r, "dim", path, dim, 1, 64);
    real(r, "param", path, param, 0.0, 1e6, true);
    return violations_.size() == before ? dim : 0;
  }

  std::vector<ConfigViolation> violations_;
};

void fnv1a(std::uint64_t& h, const std::string& s) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
}

json pair_json(const MeasurePair& p) { return json{{"source", p.source}, {"target", p.target}}; }

}  // namespace

const char* kind_name(ExperimentKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_kind(const std::string& name) {
  for (const auto& [k, n] : kKinds) {
    if (name == n) return k;
  }
  return std::nullopt;
}

std::vector<std::string> kind_names() {
  std::vector<std::string> out;
  for (const auto& [k, n] : kKinds) out.emplace_back(n);
  return out;
}

std::vector<std::string> lambda_bank_names() {
  return {"coordinates", "mean", "max", "log_sum_exp", "distance_to_point"};
}

ConfigError::ConfigError(std::vector<ConfigViolation> violations)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += "\n  " + (v.path.empty() ? std::string("/") : v.path) + ": " + v.message;
        return msg;
      }()),
      violations_(std::move(violations)) {}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["kind"] = kind_name(cfg.kind);
  j["seed"] = cfg.seed;
  j["samples"] = cfg.samples;
  j["quadrature_nodes"] = cfg.quadrature_nodes;
  if (cfg.pair) {
    j["source"] = cfg.pair->source;
    j["target"] = cfg.pair->target;
  }
  j["map_kind"] = cfg.map_kind;
  j["test_functions"] = cfg.test_functions;
  j["c"] = cfg.c;
  j["c_grid"] = cfg.c_grid;
  j["geometry"] = {{"pairs", cfg.geometry.pairs},
                   {"min_dim", cfg.geometry.min_dim},
                   {"max_dim", cfg.geometry.max_dim},
                   {"curve_samples", cfg.geometry.curve_samples}};
  j["gamma2"] = {{"points", cfg.gamma2.points}, {"test_functions", cfg.gamma2.test_functions}};
  json pairs = json::array();
  for (const auto& p : cfg.regularization.pairs) pairs.push_back(pair_json(p));
  j["regularization"] = {{"n_values", cfg.regularization.n_values},
                         {"floor_n", cfg.regularization.floor_n},
                         {"floor_levels", cfg.regularization.floor_levels},
                         {"pairs", pairs}};
  j["sinkhorn"] = {{"grid", cfg.sinkhorn.grid},
                   {"epsilon_factor", cfg.sinkhorn.epsilon_factor},
                   {"hessian_step", cfg.sinkhorn.hessian_step},
                   {"tol", cfg.sinkhorn.tol},
                   {"max_iter", cfg.sinkhorn.max_iter},
                   {"central_mass", cfg.sinkhorn.central_mass},
                   {"oracle_tolerance", cfg.sinkhorn.oracle_tolerance}};
  j["output"] = {{"dir", cfg.output.dir},
                 {"format", cfg.output.format},
                 {"dump_samples", cfg.output.dump_samples},
                 {"timing", cfg.output.timing}};
  return j;
}

ExperimentConfig parse_config_json(const json& doc) {
  Validator v;
  ExperimentConfig cfg;
  if (!v.object(doc, "")) throw ConfigError(v.take());
  v.reject_unknown(doc, "", {"kind", "seed", "samples", "quadrature_nodes", "source", "target", "map_kind",
                             "test_functions", "c", "c_grid", "geometry", "gamma2", "regularization", "sinkhorn",
                             "output"});

  if (!doc.contains("kind")) {
    v.fail("/kind", "required; one of: " + join(kind_names()));
  } else {
    std::string k;
    v.string(doc, "kind", "", k, kind_names());
    if (auto parsed = parse_kind(k)) cfg.kind = *parsed;
  }
  v.integer(doc, "seed", "", cfg.seed, 0, -1);
  v.integer(doc, "samples", "", cfg.samples, 1000, 100000000);
  v.integer(doc, "quadrature_nodes", "", cfg.quadrature_nodes, 16, 1000000);

  const bool has_source = doc.contains("source"), has_target = doc.contains("target");
  if (has_source != has_target) {
    v.fail(has_source ? "/target" : "/source", "source and target must be given together");
  } else if (has_source) {
    const int ns = v.measure(doc.at("source"), "/source");
    const int nt = v.measure(doc.at("target"), "/target");
    if (ns > 0 && nt > 0 && ns != nt) {
      v.fail("/target", "dimension " + std::to_string(nt) + " differs from the source dimension " + std::to_string(ns));
    }
    cfg.pair = MeasurePair{doc.at("source"), doc.at("target")};
  }
  v.string(doc, "map_kind", "", cfg.map_kind, {"exact", "entropic-grid"});

  if (doc.contains("test_functions")) {
    const json& tf = doc.at("test_functions");
    const auto names = lambda_bank_names();
    if (!tf.is_array()) {
      v.fail("/test_functions", "expected an array of names");
    } else {
      std::set<std::string> seen;
      for (std::size_t i = 0; i < tf.size(); ++i) {
        const std::string p = "/test_functions/" + std::to_string(i);
        if (!tf[i].is_string()) {
          v.fail(p, "expected a string");
          continue;
        }
        const std::string s = tf[i].get<std::string>();
        if (std::find(names.begin(), names.end(), s) == names.end()) {
          v.fail(p, "'" + s + "' is not one of: " + join(names));
        } else if (!seen.insert(s).second) {
          v.fail(p, "duplicate test function '" + s + "'");
        } else {
          cfg.test_functions.push_back(s);
        }
      }
    }
  }
  v.real(doc, "c", "", cfg.c, 0.0, 10.0, true);
  if (doc.contains("c_grid")) {
    const json& g = doc.at("c_grid");
    if (!g.is_array()) {
      v.fail("/c_grid", "expected an array of positive numbers");
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string p = "/c_grid/" + std::to_string(i);
        if (!g[i].is_number() || !(g[i].get<double>() > 0.0) || g[i].get<double>() > 10.0) {
          v.fail(p, "must be a number in (0, 10]");
        } else if (!cfg.c_grid.empty() && !(g[i].get<double>() > cfg.c_grid.back())) {
          v.fail(p, "c_grid must be strictly increasing");
        } else {
          cfg.c_grid.push_back(g[i].get<double>());
        }
      }
    }
  }

  if (doc.contains("geometry") && v.object(doc.at("geometry"), "/geometry")) {
    const json& g = doc.at("geometry");
    v.reject_unknown(g, "/geometry", {"pairs", "min_dim", "max_dim", "curve_samples"});
    v.integer(g, "pairs", "/geometry", cfg.geometry.pairs, 1, 1000000);
    v.integer(g, "min_dim", "/geometry", cfg.geometry.min_dim, 1, 64);
    v.integer(g, "max_dim", "/geometry", cfg.geometry.max_dim, 1, 64);
    v.integer(g, "curve_samples", "/geometry", cfg.geometry.curve_samples, 5, 1000000);
  }
  if (cfg.geometry.max_dim < cfg.geometry.min_dim) v.fail("/geometry/max_dim", "must be >= min_dim");

  if (doc.contains("gamma2") && v.object(doc.at("gamma2"), "/gamma2")) {
    const json& g = doc.at("gamma2");
    v.reject_unknown(g, "/gamma2", {"points", "test_functions"});
    v.integer(g, "points", "/gamma2", cfg.gamma2.points, 1, 1000000);
    v.integer(g, "test_functions", "/gamma2", cfg.gamma2.test_functions, 2, 1000);
  }

  if (doc.contains("regularization") && v.object(doc.at("regularization"), "/regularization")) {
    const json& r = doc.at("regularization");
    const std::string base = "/regularization";
    v.reject_unknown(r, base, {"n_values", "floor_n", "floor_levels", "pairs"});
    if (r.contains("n_values")) {
      const json& nv = r.at("n_values");
      if (!nv.is_array() || nv.empty()) {
        v.fail(base + "/n_values", "expected a non-empty array of positive integers");
      } else {
        cfg.regularization.n_values.clear();
        for (std::size_t i = 0; i < nv.size(); ++i) {
          if (!nv[i].is_number_integer() || nv[i].get<long long>() < 1 || nv[i].get<long long>() > 10000) {
            v.fail(base + "/n_values/" + std::to_string(i), "must be an integer in [1, 10000]");
          } else {
            cfg.regularization.n_values.push_back(nv[i].get<int>());
          }
        }
      }
    }
    v.integer(r, "floor_n", base, cfg.regularization.floor_n, 1, 10000);
    v.integer(r, "floor_levels", base, cfg.regularization.floor_levels, 1, 100000);
    if (r.contains("pairs")) {
      const json& ps = r.at("pairs");
      if (!ps.is_array()) {
        v.fail(base + "/pairs", "expected an array of {source, target}");
      } else {
        for (std::size_t i = 0; i < ps.size(); ++i) {
          const std::string p = base + "/pairs/" + std::to_string(i);
          if (!v.object(ps[i], p)) continue;
          v.reject_unknown(ps[i], p, {"source", "target"});
          if (!ps[i].contains("source") || !ps[i].contains("target")) {
            v.fail(p, "needs 'source' and 'target'");
            continue;
          }
          for (const char* side : {"source", "target"}) {
            if (!ps[i].at(side).is_string()) {
              v.fail(p + "/" + side, "expected a 1D measure spec");
            } else {
              v.measure(ps[i].at(side), p + "/" + side);
            }
          }
          cfg.regularization.pairs.push_back({ps[i].at("source"), ps[i].at("target")});
        }
      }
    }
  }

  if (doc.contains("sinkhorn") && v.object(doc.at("sinkhorn"), "/sinkhorn")) {
    const json& s = doc.at("sinkhorn");
    const std::string base = "/sinkhorn";
    v.reject_unknown(s, base, {"grid", "epsilon_factor", "hessian_step", "tol", "max_iter", "central_mass",
                               "oracle_tolerance"});
    v.integer(s, "grid", base, cfg.sinkhorn.grid, 8, 512);
    v.real(s, "epsilon_factor", base, cfg.sinkhorn.epsilon_factor, 0.0, 1e4, true);
    v.real(s, "hessian_step", base, cfg.sinkhorn.hessian_step, 0.5, 16.0);
    v.real(s, "tol", base, cfg.sinkhorn.tol, 0.0, 1.0, true);
    v.integer(s, "max_iter", base, cfg.sinkhorn.max_iter, 1, 10000000);
    v.real(s, "central_mass", base, cfg.sinkhorn.central_mass, 0.0, 1.0, true);
    v.real(s, "oracle_tolerance", base, cfg.sinkhorn.oracle_tolerance, 0.0, 10.0, true);
  }

  if (doc.contains("output") && v.object(doc.at("output"), "/output")) {
    const json& o = doc.at("output");
    v.reject_unknown(o, "/output", {"dir", "format", "dump_samples", "timing"});
    v.string(o, "dir", "/output", cfg.output.dir);
    v.string(o, "format", "/output", cfg.output.format, {"json", "csv"});
    v.boolean(o, "dump_samples", "/output", cfg.output.dump_samples);
    v.boolean(o, "timing", "/output", cfg.output.timing);
  }

  if (cfg.map_kind == "entropic-grid") {
    if (cfg.kind != ExperimentKind::Variance && cfg.kind != ExperimentKind::Sinkhorn2D) {
      v.fail("/map_kind", "entropic-grid maps are supported for the variance and sinkhorn2d kinds only");
    }
    if (cfg.kind == ExperimentKind::Variance && !cfg.pair) {
      v.fail("/map_kind", "entropic-grid variance runs need an explicit 2D source and target");
    }
  }

  if (!v.ok()) throw ConfigError(v.take());
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{"", "cannot open config file '" + path + "'"}});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({{"", "'" + path + "' is not valid JSON: " + e.what()}});
  }
  return parse_config_json(doc);
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 14695981039346656037ULL;
  fnv1a(h, to_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_json(a) == to_json(b); }

}  // namespace otspec
