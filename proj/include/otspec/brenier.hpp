#pragma once

// Brenier maps T = grad(Phi) with evaluable Hessians for pairs admitting exact
// or quadrature-exact solutions.

#include "otspec/measures.hpp"
#include "otspec/multivariate_measures.hpp"
#include "otspec/spd_geometry.hpp"

#include <memory>
#include <string>
#include <vector>

namespace otspec {

enum class MapKind { OneD, GaussianLinear, Product, Radial, EntropicGrid };

const char* map_kind_name(MapKind kind);

struct MapSample {
  Vec x;
  Vec y;  // T(x)
  SpdMatrix hessian;
};

class TransportMap {
 public:
  virtual ~TransportMap() = default;

  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual MapKind kind() const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
  // Maps built from a discretization rather than an exact construction.
  [[nodiscard]] virtual bool approximate() const { return false; }

  [[nodiscard]] virtual bool in_source_support(const Vec& x) const = 0;
  [[nodiscard]] virtual double source_potential(const Vec& x) const = 0;
  [[nodiscard]] virtual double target_potential(const Vec& y) const = 0;

  [[nodiscard]] virtual Vec map(const Vec& x) const = 0;
  [[nodiscard]] virtual SpdMatrix hessian(const Vec& x) const = 0;

  [[nodiscard]] virtual Vec sample_source(Rng& rng) const = 0;
  // X ~ source together with T(X) and D^2 Phi(X).
  [[nodiscard]] virtual MapSample sample_pair(Rng& rng) const;
};

using TransportMapPtr = std::shared_ptr<const TransportMap>;

// Monotone rearrangement T = G^{-1} o F. Phi'' comes from the transport
// equation log Phi''(x) = -V(x) + W(T(x)). Evaluation is restricted to
// F(x) in [1e-9, 1 - 1e-9]; outside, DomainError.
class Brenier1D final : public TransportMap {
 public:
  static constexpr double kClip = 1e-9;

  Brenier1D(LogConcaveMeasure1D mu, LogConcaveMeasure1D nu);

  [[nodiscard]] int dim() const override { return 1; }
  [[nodiscard]] MapKind kind() const override { return MapKind::OneD; }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] bool in_source_support(const Vec& x) const override;
  [[nodiscard]] double source_potential(const Vec& x) const override { return mu_.potential(x(0)); }
  [[nodiscard]] double target_potential(const Vec& y) const override { return nu_.potential(y(0)); }
  [[nodiscard]] Vec map(const Vec& x) const override;
  [[nodiscard]] SpdMatrix hessian(const Vec& x) const override;
  [[nodiscard]] Vec sample_source(Rng& rng) const override;
  [[nodiscard]] MapSample sample_pair(Rng& rng) const override;

  [[nodiscard]] const LogConcaveMeasure1D& source() const { return mu_; }
  [[nodiscard]] const LogConcaveMeasure1D& target() const { return nu_; }

  [[nodiscard]] double transport(double x) const;
  [[nodiscard]] double second_derivative(double x) const;
  [[nodiscard]] double log_second_derivative(double x) const;
  // Phi''' = Phi'' (-V'(x) + W'(T(x)) Phi''(x)).
  [[nodiscard]] double third_derivative(double x) const;
  // Phi'' as a density ratio f(x) / g(T(x)), the cross-check form.
  [[nodiscard]] double density_ratio(double x) const;

  struct QuantilePoint {
    double x;
    double y;
    double log_phi2;
  };
  // Source and target points at the common level p (complement q = 1 - p
  // passed separately to keep upper tails accurate).
  [[nodiscard]] QuantilePoint at_level(double p, double q) const;

 private:
  LogConcaveMeasure1D mu_;
  LogConcaveMeasure1D nu_;
};

class GaussianLinearMap final : public TransportMap {
 public:
  GaussianLinearMap(GaussianMeasure mu, GaussianMeasure nu);

  [[nodiscard]] int dim() const override { return mu_.dim(); }
  [[nodiscard]] MapKind kind() const override { return MapKind::GaussianLinear; }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] bool in_source_support(const Vec& x) const override { return mu_.in_support(x); }
  [[nodiscard]] double source_potential(const Vec& x) const override { return mu_.potential(x); }
  [[nodiscard]] double target_potential(const Vec& y) const override { return nu_.potential(y); }
  [[nodiscard]] Vec map(const Vec& x) const override;
  [[nodiscard]] SpdMatrix hessian(const Vec& x) const override;
  [[nodiscard]] Vec sample_source(Rng& rng) const override { return mu_.sample(rng); }

  [[nodiscard]] const SpdMatrix& matrix() const { return a_; }
  [[nodiscard]] const GaussianMeasure& source() const { return mu_; }
  [[nodiscard]] const GaussianMeasure& target() const { return nu_; }

 private:
  GaussianMeasure mu_;
  GaussianMeasure nu_;
  SpdMatrix a_;
};

class ProductMap final : public TransportMap {
 public:
  explicit ProductMap(std::vector<Brenier1D> factors);

  [[nodiscard]] int dim() const override { return static_cast<int>(factors_.size()); }
  [[nodiscard]] MapKind kind() const override { return MapKind::Product; }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] bool in_source_support(const Vec& x) const override;
  [[nodiscard]] double source_potential(const Vec& x) const override;
  [[nodiscard]] double target_potential(const Vec& y) const override;
  [[nodiscard]] Vec map(const Vec& x) const override;
  [[nodiscard]] SpdMatrix hessian(const Vec& x) const override;
  [[nodiscard]] Vec sample_source(Rng& rng) const override;
  [[nodiscard]] MapSample sample_pair(Rng& rng) const override;

  [[nodiscard]] const std::vector<Brenier1D>& factors() const { return factors_; }

 private:
  std::vector<Brenier1D> factors_;
};

// Phi(x) = phi~(|x|) with radial profile phi solving the mass balance
// radial_cdf_mu(r) = radial_cdf_nu(phi(r)). The profile is seeded from a
// cached monotone table and refined by bracketed Newton.
class RadialMap final : public TransportMap {
 public:
  static constexpr int kTableNodes = 10000;

  RadialMap(RadialMeasure mu, RadialMeasure nu);

  [[nodiscard]] int dim() const override { return mu_.dim(); }
  [[nodiscard]] MapKind kind() const override { return MapKind::Radial; }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] bool in_source_support(const Vec& x) const override { return mu_.in_support(x); }
  [[nodiscard]] double source_potential(const Vec& x) const override { return mu_.potential(x); }
  [[nodiscard]] double target_potential(const Vec& y) const override { return nu_.potential(y); }
  [[nodiscard]] Vec map(const Vec& x) const override;
  [[nodiscard]] SpdMatrix hessian(const Vec& x) const override;
  [[nodiscard]] Vec sample_source(Rng& rng) const override { return mu_.sample(rng); }

  [[nodiscard]] const RadialMeasure& source() const { return mu_; }
  [[nodiscard]] const RadialMeasure& target() const { return nu_; }

  [[nodiscard]] double profile(double r) const;
  [[nodiscard]] double profile_derivative(double r) const;
  // phi(r) / r, with the limit phi'(0) at r = 0.
  [[nodiscard]] double tangential_ratio(double r) const;

 private:
  RadialMeasure mu_;
  RadialMeasure nu_;
  std::vector<double> table_r_;
  std::vector<double> table_phi_;
};

std::shared_ptr<Brenier1D> brenier_1d(const LogConcaveMeasure1D& mu, const LogConcaveMeasure1D& nu);
std::shared_ptr<GaussianLinearMap> brenier_gaussian(const GaussianMeasure& mu, const GaussianMeasure& nu);
std::shared_ptr<ProductMap> brenier_product(const std::vector<Brenier1D>& factors);
std::shared_ptr<RadialMap> brenier_radial(const RadialMeasure& mu, const RadialMeasure& nu);

// V(x) + log det D^2 Phi(x) - W(T(x)).
double transport_residual(const TransportMap& tm, const Vec& x);

LogSpectrum hessian_spectrum_at(const TransportMap& tm, const Vec& x);

}  // namespace otspec
