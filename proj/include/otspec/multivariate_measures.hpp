#pragma once

#include "otspec/measures.hpp"
#include "otspec/random.hpp"
#include "otspec/spd_geometry.hpp"

#include <memory>
#include <string>
#include <vector>

namespace otspec {

// Log-concave measure e^{-V(x)} dx on R^n.
class Measure {
 public:
  virtual ~Measure() = default;

  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual bool in_support(const Vec& x) const = 0;
  // Normalized potential; +infinity outside the support.
  [[nodiscard]] virtual double potential(const Vec& x) const = 0;
  [[nodiscard]] virtual Vec potential_gradient(const Vec& x) const = 0;
  // Throws DomainError when the potential is not twice differentiable at x.
  [[nodiscard]] virtual Mat potential_hessian(const Vec& x) const = 0;
  [[nodiscard]] virtual Vec sample(Rng& rng) const = 0;
  // A lower bound for the mass of the box [lo, hi].
  [[nodiscard]] virtual double box_mass_lower_bound(const Vec& lo, const Vec& hi) const = 0;

  [[nodiscard]] double density(const Vec& x) const;
};

class GaussianMeasure final : public Measure {
 public:
  GaussianMeasure(Vec mean, SpdMatrix covariance);

  [[nodiscard]] int dim() const override { return static_cast<int>(mean_.size()); }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] bool in_support(const Vec& x) const override;
  [[nodiscard]] double potential(const Vec& x) const override;
  [[nodiscard]] Vec potential_gradient(const Vec& x) const override;
  [[nodiscard]] Mat potential_hessian(const Vec& x) const override;
  [[nodiscard]] Vec sample(Rng& rng) const override;
  // Mass of the largest centered Mahalanobis ellipsoid inside the box.
  [[nodiscard]] double box_mass_lower_bound(const Vec& lo, const Vec& hi) const override;

  [[nodiscard]] const Vec& mean() const { return mean_; }
  [[nodiscard]] const SpdMatrix& covariance() const { return cov_; }

 private:
  Vec mean_;
  SpdMatrix cov_;
  Mat precision_;
  Mat sqrt_cov_;
  double log_normalizer_;
};

class ProductMeasure final : public Measure {
 public:
  explicit ProductMeasure(std::vector<LogConcaveMeasure1D> factors);

  [[nodiscard]] int dim() const override { return static_cast<int>(factors_.size()); }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] bool in_support(const Vec& x) const override;
  [[nodiscard]] double potential(const Vec& x) const override;
  [[nodiscard]] Vec potential_gradient(const Vec& x) const override;
  [[nodiscard]] Mat potential_hessian(const Vec& x) const override;
  [[nodiscard]] Vec sample(Rng& rng) const override;
  // Exact: product of the factor masses.
  [[nodiscard]] double box_mass_lower_bound(const Vec& lo, const Vec& hi) const override;

  [[nodiscard]] const std::vector<LogConcaveMeasure1D>& factors() const { return factors_; }

 private:
  std::vector<LogConcaveMeasure1D> factors_;
};

enum class RadialKind { UniformBall, Gaussian, Exponential };

// Rotation-invariant measure with V(x) = v(|x|): uniform on the ball of
// radius R, isotropic Gaussian with standard deviation s, or density
// proportional to exp(-|x| / b).
class RadialMeasure final : public Measure {
 public:
  RadialMeasure(int n, RadialKind kind, double parameter);

  static RadialMeasure uniform_ball(int n, double radius) { return {n, RadialKind::UniformBall, radius}; }
  static RadialMeasure gaussian(int n, double sigma) { return {n, RadialKind::Gaussian, sigma}; }
  static RadialMeasure exponential(int n, double scale) { return {n, RadialKind::Exponential, scale}; }

  [[nodiscard]] int dim() const override { return n_; }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] bool in_support(const Vec& x) const override;
  [[nodiscard]] double potential(const Vec& x) const override;
  [[nodiscard]] Vec potential_gradient(const Vec& x) const override;
  [[nodiscard]] Mat potential_hessian(const Vec& x) const override;
  [[nodiscard]] Vec sample(Rng& rng) const override;
  // Mass of the largest centered ball inside the box.
  [[nodiscard]] double box_mass_lower_bound(const Vec& lo, const Vec& hi) const override;

  [[nodiscard]] RadialKind kind() const { return kind_; }
  [[nodiscard]] double parameter() const { return param_; }
  // Upper end of the radial support (infinite unless uniform).
  [[nodiscard]] double max_radius() const;

  // v(r) including the normalizing constant, and its derivatives.
  [[nodiscard]] double radial_potential(double r) const;
  [[nodiscard]] double radial_potential_d1(double r) const;
  [[nodiscard]] double radial_potential_d2(double r) const;
  // Mass of the centered ball of radius r and its complement.
  [[nodiscard]] double radial_cdf(double r) const;
  [[nodiscard]] double radial_ccdf(double r) const;
  // Density of |X|: |S^{n-1}| r^{n-1} e^{-v(r)}.
  [[nodiscard]] double radial_density(double r) const;
  // Closed-form inverses of radial_cdf / radial_ccdf.
  [[nodiscard]] double radial_quantile(double p) const;
  [[nodiscard]] double radial_upper_quantile(double q) const;

 private:
  int n_;
  RadialKind kind_;
  double param_;
  double log_normalizer_;
  double log_sphere_area_;
};

}  // namespace otspec
