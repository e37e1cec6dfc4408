#pragma once

// Experiment configuration: a JSON document validated against a fixed schema.
// Every field has a documented default; unknown keys are rejected.

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace otspec {

enum class ExperimentKind { GeometrySelftest, Variance, Poincare, Concentration, Gamma2Check, Sinkhorn2D, Regularization };

const char* kind_name(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(const std::string& name);
std::vector<std::string> kind_names();

// One validation failure: JSON-pointer-like path and message.
struct ConfigViolation {
  std::string path;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigViolation> violations);
  [[nodiscard]] const std::vector<ConfigViolation>& violations() const { return violations_; }

 private:
  std::vector<ConfigViolation> violations_;
};

// Source / target specification. A string is a 1D catalog spec such as
// "gamma(2, 1)" or "regularize(uniform(0, 1), 10)"; an array of strings is a
// product measure; {"gaussian": {"mean": [...], "cov": [[...]]}} and
// {"radial": {"kind": "uniform_ball" | "gaussian" | "exponential", "dim": n,
// "param": r}} describe the multivariate families.
using MeasureSpec = nlohmann::json;

struct MeasurePair {
  MeasureSpec source;
  MeasureSpec target;
};

struct GeometryOptions {
  int pairs = 1000;
  int min_dim = 2;
  int max_dim = 8;
  int curve_samples = 1000;
};

struct Gamma2Options {
  int points = 100;
  int test_functions = 4;
};

struct RegularizationOptions {
  std::vector<int> n_values = {5, 10, 20, 40};
  int floor_n = 10;
  int floor_levels = 100;
  std::vector<MeasurePair> pairs;  // empty: three default catalog pairs
};

struct SinkhornConfig {
  int grid = 64;
  // Final epsilon = epsilon_factor * h^2 with h the grid spacing.
  double epsilon_factor = 1.0;
  // Hessian finite-difference step in grid spacings.
  double hessian_step = 2.0;
  double tol = 1e-8;
  int max_iter = 20000;
  double central_mass = 0.5;
  double oracle_tolerance = 0.05;
};

struct OutputOptions {
  std::string dir;  // empty: $OTSPEC_OUT_DIR, then the working directory
  std::string format = "json";
  bool dump_samples = false;
  bool timing = false;  // wall-clock in the report breaks byte-identity
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Variance;
  std::uint64_t seed = 1;
  long samples = 100000;
  int quadrature_nodes = 2048;
  std::optional<MeasurePair> pair;  // absent: the catalog suite
  std::string map_kind = "exact";   // exact | entropic-grid
  std::vector<std::string> test_functions;  // empty: full bank
  double c = 0.1;
  std::vector<double> c_grid;  // empty: 0.05, 0.10, ..., 0.50
  GeometryOptions geometry;
  Gamma2Options gamma2;
  RegularizationOptions regularization;
  SinkhornConfig sinkhorn;
  OutputOptions output;

  [[nodiscard]] bool catalog() const { return !pair.has_value(); }
};

// Canonical JSON with every default spelled out.
nlohmann::json to_json(const ExperimentConfig& cfg);

// Throws ConfigError listing every violation.
ExperimentConfig parse_config_json(const nlohmann::json& doc);
// Reads and parses a file; I/O and syntax problems are reported as ConfigError.
ExperimentConfig parse_config(const std::string& path);

// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

std::vector<std::string> lambda_bank_names();

}  // namespace otspec
