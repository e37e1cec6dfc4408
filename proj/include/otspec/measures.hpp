#pragma once

// One-dimensional log-concave probability measures d mu = e^{-V(x)} dx with
// potential derivative oracles, CDF / quantile, sampling, and the smoothing
// regularization (Gaussian convolution followed by a wide Gaussian damping).

#include "otspec/random.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace otspec {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  [[nodiscard]] bool contains(double x) const { return x > lo && x < hi; }
  [[nodiscard]] bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

struct PotentialJet {
  double value;
  double d1;
  std::optional<double> d2;
};

// Normalized potential V of a density e^{-V} on an open interval. Oracles are
// only called at points inside the support.
class Potential1D {
 public:
  virtual ~Potential1D() = default;

  [[nodiscard]] virtual double value(double x) const = 0;
  // One-sided (right) derivative at kinks.
  [[nodiscard]] virtual double d1(double x) const = 0;
  // Absent for members whose potential is not twice differentiable.
  [[nodiscard]] virtual std::optional<double> d2(double x) const = 0;
  [[nodiscard]] virtual bool smooth() const = 0;
  [[nodiscard]] virtual PotentialJet jet(double x) const { return {value(x), d1(x), d2(x)}; }

  [[nodiscard]] virtual std::optional<double> cdf(double) const { return std::nullopt; }
  [[nodiscard]] virtual std::optional<double> ccdf(double) const { return std::nullopt; }

  // log of the normalizing constant of the un-normalized density.
  [[nodiscard]] virtual double log_normalizer() const = 0;
  // A point in the bulk of the mass and a length scale, used to seed searches.
  [[nodiscard]] virtual double center_hint() const = 0;
  [[nodiscard]] virtual double scale_hint() const = 0;
  // Extra points where the density changes rapidly; used as quadrature splits.
  [[nodiscard]] virtual std::vector<double> quadrature_hints() const { return {}; }
  // (mean, standard deviation) when the member is exactly Gaussian.
  [[nodiscard]] virtual std::optional<std::pair<double, double>> gaussian_parameters() const {
    return std::nullopt;
  }
};

class LogConcaveMeasure1D {
 public:
  // Validates convexity on a 1000-point grid and normalization (quadrature,
  // 1e-8) unless validate is false. Throws DomainError on failure.
  LogConcaveMeasure1D(std::string name, Interval support, std::shared_ptr<const Potential1D> potential,
                      std::vector<double> kinks = {}, bool validate = true);

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] Interval support() const { return support_; }
  [[nodiscard]] bool in_support(double x) const { return support_.contains(x); }
  [[nodiscard]] const std::vector<double>& kinks() const { return kinks_; }
  [[nodiscard]] const Potential1D& potential_oracle() const { return *potential_; }
  [[nodiscard]] std::shared_ptr<const Potential1D> potential_oracle_ptr() const { return potential_; }

  // +infinity outside the support.
  [[nodiscard]] double potential(double x) const;
  [[nodiscard]] double potential_d1(double x) const;
  [[nodiscard]] std::optional<double> potential_d2(double x) const;
  [[nodiscard]] bool has_potential_d2() const { return potential_->smooth(); }
  [[nodiscard]] double density(double x) const;
  [[nodiscard]] double log_density_normalizer() const { return potential_->log_normalizer(); }

  // Closed form when the member has one, quadrature otherwise. Outside the
  // support these return 0 or 1.
  [[nodiscard]] double cdf(double x) const;
  [[nodiscard]] double ccdf(double x) const;
  // Always by quadrature, integrating from the nearer end of the support.
  [[nodiscard]] double cdf_by_quadrature(double x) const;
  [[nodiscard]] double ccdf_by_quadrature(double x) const;
  [[nodiscard]] double total_mass_by_quadrature() const;
  [[nodiscard]] double mass_between(double a, double b) const;

  // Safeguarded Newton on log F (log-concave) with bisection fallback.
  // quantile: p in (0, 1); upper_quantile: x with ccdf(x) = q, q in (0, 1).
  [[nodiscard]] double quantile(double p) const;
  [[nodiscard]] double upper_quantile(double q) const;

  [[nodiscard]] double median() const { return median_; }
  [[nodiscard]] double scale() const { return scale_; }

  [[nodiscard]] double sample(Rng& rng) const;
  // Inverse-CDF transform of a given uniform variate.
  [[nodiscard]] double sample_from_uniform(double u) const;

 private:
  [[nodiscard]] double tail(bool upper, double x) const;
  [[nodiscard]] double solve_tail(bool upper, double target) const;
  [[nodiscard]] std::vector<double> breakpoints() const;
  void validate() const;

  std::string name_;
  Interval support_;
  std::shared_ptr<const Potential1D> potential_;
  std::vector<double> kinks_;
  double median_ = 0.0;
  double scale_ = 1.0;
};

// Catalog: gaussian(m, sigma), uniform(a, b), exponential(rate),
// gamma(shape >= 1, rate), beta(alpha >= 1, beta >= 1), logistic(m, s),
// laplace(m, b), subbotin(p >= 1). Throws DomainError for unknown names,
// wrong parameter counts, or parameters outside the log-concave range.
LogConcaveMeasure1D make_catalog_measure(const std::string& name, const std::vector<double>& params);

std::vector<std::string> catalog_names();

// Parses "name(p1, p2, ...)" (for example "gamma(2, 1)") or
// "regularize(name(...), N)". Throws DomainError on malformed input.
LogConcaveMeasure1D parse_measure_spec(const std::string& spec);

// Density proportional to (e^{-V} * N(0, 1/N^2)) * N(0, N), renormalized.
// The damping factor adds exactly 1/N to the curvature of the potential.
// Gaussian inputs map to the closed-form Gaussian unless use_closed_form is
// false, in which case the generic convolution quadrature is used.
LogConcaveMeasure1D regularize(const LogConcaveMeasure1D& m, int n, bool use_closed_form = true);

struct RegularizationDiagnostics {
  double convolution_variance;
  double damping_variance;
  // int |V_N'|^4 e^{-V_N}, monitored rather than bounded.
  double gradient_fourth_moment;
};

RegularizationDiagnostics regularization_diagnostics(const LogConcaveMeasure1D& regularized, int n);

}  // namespace otspec
