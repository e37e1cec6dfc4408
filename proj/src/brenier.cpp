#include "otspec/brenier.hpp"

#include "otspec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace otspec {

namespace {

Vec scalar(double v) {
  Vec x(1);
  x(0) = v;
  return x;
}

}  // namespace

const char* map_kind_name(MapKind kind) {
  switch (kind) {
    case MapKind::OneD: return "1d";
    case MapKind::GaussianLinear: return "gaussian-linear";
    case MapKind::Product: return "product";
    case MapKind::Radial: return "radial";
    case MapKind::EntropicGrid: return "entropic-grid";
  }
  return "unknown";
}

MapSample TransportMap::sample_pair(Rng& rng) const {
  Vec x = sample_source(rng);
  Vec y = map(x);
  SpdMatrix h = hessian(x);
  return {std::move(x), std::move(y), std::move(h)};
}

// ---------------------------------------------------------------- 1D

Brenier1D::Brenier1D(LogConcaveMeasure1D mu, LogConcaveMeasure1D nu) : mu_(std::move(mu)), nu_(std::move(nu)) {}

std::string Brenier1D::name() const { return mu_.name() + " -> " + nu_.name(); }

bool Brenier1D::in_source_support(const Vec& x) const {
  require_same_dim("Brenier1D point", 1, x.size());
  if (!mu_.in_support(x(0))) return false;
  return mu_.cdf(x(0)) >= kClip && mu_.ccdf(x(0)) >= kClip;
}

double Brenier1D::transport(double x) const {
  if (!mu_.in_support(x)) throw DomainError(name() + ": point " + std::to_string(x) + " outside the source support");
  const double p = mu_.cdf(x);
  if (p <= 0.5) {
    if (p < kClip) throw DomainError(name() + ": point " + std::to_string(x) + " in the clipped lower tail");
    return nu_.quantile(p);
  }
  const double q = mu_.ccdf(x);
  if (q < kClip) throw DomainError(name() + ": point " + std::to_string(x) + " in the clipped upper tail");
  return nu_.upper_quantile(q);
}

double Brenier1D::log_second_derivative(double x) const { return -mu_.potential(x) + nu_.potential(transport(x)); }

double Brenier1D::second_derivative(double x) const { return std::exp(log_second_derivative(x)); }

double Brenier1D::third_derivative(double x) const {
  const double y = transport(x);
  const double phi2 = std::exp(-mu_.potential(x) + nu_.potential(y));
  return phi2 * (-mu_.potential_d1(x) + nu_.potential_d1(y) * phi2);
}

double Brenier1D::density_ratio(double x) const { return mu_.density(x) / nu_.density(transport(x)); }

Brenier1D::QuantilePoint Brenier1D::at_level(double p, double q) const {
  double x, y;
  if (p <= 0.5) {
    x = mu_.quantile(p);
    y = nu_.quantile(p);
  } else {
    x = mu_.upper_quantile(q);
    y = nu_.upper_quantile(q);
  }
  return {x, y, -mu_.potential(x) + nu_.potential(y)};
}

Vec Brenier1D::map(const Vec& x) const {
  require_same_dim("Brenier1D point", 1, x.size());
  return scalar(transport(x(0)));
}

SpdMatrix Brenier1D::hessian(const Vec& x) const {
  require_same_dim("Brenier1D point", 1, x.size());
  Mat h(1, 1);
  h(0, 0) = second_derivative(x(0));
  return SpdMatrix(h);
}

Vec Brenier1D::sample_source(Rng& rng) const { return scalar(mu_.sample(rng)); }

MapSample Brenier1D::sample_pair(Rng& rng) const {
  double u = open_uniform(rng);
  u = std::clamp(u, kClip, 1.0 - kClip);
  const QuantilePoint pt = at_level(u, 1.0 - u);
  Mat h(1, 1);
  h(0, 0) = std::exp(pt.log_phi2);
  return {scalar(pt.x), scalar(pt.y), SpdMatrix(h)};
}

// ---------------------------------------------------------------- Gaussian

GaussianLinearMap::GaussianLinearMap(GaussianMeasure mu, GaussianMeasure nu)
    : mu_(std::move(mu)), nu_(std::move(nu)), a_(SpdMatrix::identity(mu_.dim())) {
  require_same_dim("brenier_gaussian", mu_.dim(), nu_.dim());
  const SpdMatrix& s1 = mu_.covariance();
  const Mat r = s1.sqrt();
  const Mat ri = s1.inv_sqrt();
  const SpdMatrix middle(r * nu_.covariance().matrix() * r);
  a_ = SpdMatrix(ri * middle.sqrt() * ri);
}

std::string GaussianLinearMap::name() const { return mu_.name() + " -> " + nu_.name(); }

Vec GaussianLinearMap::map(const Vec& x) const {
  require_same_dim("GaussianLinearMap point", dim(), x.size());
  return a_.matrix() * (x - mu_.mean()) + nu_.mean();
}

SpdMatrix GaussianLinearMap::hessian(const Vec& x) const {
  require_same_dim("GaussianLinearMap point", dim(), x.size());
  return a_;
}

// ---------------------------------------------------------------- Product

ProductMap::ProductMap(std::vector<Brenier1D> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw DomainError("brenier_product: at least one factor required");
}

std::string ProductMap::name() const {
  std::string s = "product[";
  for (std::size_t i = 0; i < factors_.size(); ++i) s += (i ? "; " : "") + factors_[i].name();
  return s + "]";
}

bool ProductMap::in_source_support(const Vec& x) const {
  require_same_dim("ProductMap point", dim(), x.size());
  for (int i = 0; i < dim(); ++i)
    if (!factors_[i].in_source_support(scalar(x(i)))) return false;
  return true;
}

double ProductMap::source_potential(const Vec& x) const {
  require_same_dim("ProductMap point", dim(), x.size());
  double v = 0.0;
  for (int i = 0; i < dim(); ++i) v += factors_[i].source().potential(x(i));
  return v;
}

double ProductMap::target_potential(const Vec& y) const {
  require_same_dim("ProductMap point", dim(), y.size());
  double v = 0.0;
  for (int i = 0; i < dim(); ++i) v += factors_[i].target().potential(y(i));
  return v;
}

Vec ProductMap::map(const Vec& x) const {
  require_same_dim("ProductMap point", dim(), x.size());
  Vec y(dim());
  for (int i = 0; i < dim(); ++i) y(i) = factors_[i].transport(x(i));
  return y;
}

SpdMatrix ProductMap::hessian(const Vec& x) const {
  require_same_dim("ProductMap point", dim(), x.size());
  Vec d(dim());
  for (int i = 0; i < dim(); ++i) d(i) = factors_[i].second_derivative(x(i));
  return SpdMatrix::diagonal(d);
}

Vec ProductMap::sample_source(Rng& rng) const {
  Vec x(dim());
  for (int i = 0; i < dim(); ++i) x(i) = factors_[i].source().sample(rng);
  return x;
}

MapSample ProductMap::sample_pair(Rng& rng) const {
  Vec x(dim()), y(dim()), d(dim());
  for (int i = 0; i < dim(); ++i) {
    double u = std::clamp(open_uniform(rng), Brenier1D::kClip, 1.0 - Brenier1D::kClip);
    const auto pt = factors_[i].at_level(u, 1.0 - u);
    x(i) = pt.x;
    y(i) = pt.y;
    d(i) = std::exp(pt.log_phi2);
  }
  return {std::move(x), std::move(y), SpdMatrix::diagonal(d)};
}

// ---------------------------------------------------------------- Radial

RadialMap::RadialMap(RadialMeasure mu, RadialMeasure nu) : mu_(std::move(mu)), nu_(std::move(nu)) {
  require_same_dim("brenier_radial", mu_.dim(), nu_.dim());
  if (mu_.dim() < 2) throw DomainError("brenier_radial: dimension must be at least 2");
  const double r_max = mu_.kind() == RadialKind::UniformBall ? mu_.max_radius() : mu_.radial_upper_quantile(1e-15);
  table_r_.resize(kTableNodes);
  table_phi_.resize(kTableNodes);
  for (int k = 0; k < kTableNodes; ++k) {
    const double r = r_max * k / (kTableNodes - 1.0);
    table_r_[k] = r;
    if (k == 0) {
      table_phi_[k] = 0.0;
      continue;
    }
    const double p = mu_.radial_cdf(r);
    if (p <= 0.5) {
      table_phi_[k] = p > 0.0 ? nu_.radial_quantile(p) : 0.0;
    } else {
      const double q = mu_.radial_ccdf(r);
      table_phi_[k] = q > 0.0 ? nu_.radial_upper_quantile(q) : table_phi_[k - 1];
    }
  }
}

std::string RadialMap::name() const { return mu_.name() + " -> " + nu_.name(); }

double RadialMap::profile(double r) const {
  if (r < 0.0 || !(r < mu_.max_radius())) {
    throw DomainError(name() + ": radius " + std::to_string(r) + " outside the source support");
  }
  if (r == 0.0) return 0.0;
  const double p = mu_.radial_cdf(r);
  const bool upper = p > 0.5;
  const double target = upper ? mu_.radial_ccdf(r) : p;
  if (!(target > 0.0)) throw DomainError(name() + ": radius " + std::to_string(r) + " beyond the tail resolution");

  // Bracket from the table; extend beyond its end if needed.
  double lo = 0.0, hi = nu_.max_radius();
  double phi;
  const auto it = std::upper_bound(table_r_.begin(), table_r_.end(), r);
  if (it == table_r_.end()) {
    lo = table_phi_.back();
    phi = lo;
  } else {
    const std::size_t k = static_cast<std::size_t>(it - table_r_.begin());
    const double t = (r - table_r_[k - 1]) / (table_r_[k] - table_r_[k - 1]);
    lo = table_phi_[k - 1];
    hi = std::min(hi, table_phi_[k]);
    phi = lo + t * (hi - lo);
    // The table itself carries rounding; widen the bracket slightly.
    const double slack = 1e-9 * (1.0 + hi);
    lo = std::max(0.0, lo - slack);
    hi = std::min(nu_.max_radius(), hi + slack);
  }
  auto residual = [&](double s) {
    return upper ? target - nu_.radial_ccdf(s) : nu_.radial_cdf(s) - target;
  };
  for (int iter = 0; iter < 200; ++iter) {
    const double f = residual(phi);
    if (f == 0.0) return phi;
    if (f < 0.0) lo = phi; else hi = phi;
    const double dens = nu_.radial_density(phi);
    double next = dens > 0.0 ? phi - f / dens : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * phi + 1.0;
    if (std::abs(next - phi) <= 1e-15 * std::max(1.0, phi)) return next;
    phi = next;
  }
  throw ConvergenceError(name() + ": radial profile did not converge at r = " + std::to_string(r));
}

double RadialMap::profile_derivative(double r) const {
  if (r == 0.0) return tangential_ratio(0.0);
  return mu_.radial_density(r) / nu_.radial_density(profile(r));
}

double RadialMap::tangential_ratio(double r) const {
  if (r == 0.0) {
    // Near the origin both radial masses behave like c r^n with c = |S| e^{-v(0)} / n.
    return std::exp((nu_.radial_potential(0.0) - mu_.radial_potential(0.0)) / dim());
  }
  return profile(r) / r;
}

Vec RadialMap::map(const Vec& x) const {
  require_same_dim("RadialMap point", dim(), x.size());
  const double r = x.norm();
  if (r == 0.0) return Vec::Zero(dim());
  return x * (profile(r) / r);
}

SpdMatrix RadialMap::hessian(const Vec& x) const {
  require_same_dim("RadialMap point", dim(), x.size());
  const double r = x.norm();
  const int n = dim();
  if (r == 0.0) return SpdMatrix(Mat::Identity(n, n) * tangential_ratio(0.0));
  const double phi = profile(r);
  const double radial = mu_.radial_density(r) / nu_.radial_density(phi);
  const double tangential = phi / r;
  const Vec u = x / r;
  return SpdMatrix(tangential * Mat::Identity(n, n) + (radial - tangential) * (u * u.transpose()));
}

// ---------------------------------------------------------------- factories

std::shared_ptr<Brenier1D> brenier_1d(const LogConcaveMeasure1D& mu, const LogConcaveMeasure1D& nu) {
  return std::make_shared<Brenier1D>(mu, nu);
}

std::shared_ptr<GaussianLinearMap> brenier_gaussian(const GaussianMeasure& mu, const GaussianMeasure& nu) {
  return std::make_shared<GaussianLinearMap>(mu, nu);
}

std::shared_ptr<ProductMap> brenier_product(const std::vector<Brenier1D>& factors) {
  return std::make_shared<ProductMap>(factors);
}

std::shared_ptr<RadialMap> brenier_radial(const RadialMeasure& mu, const RadialMeasure& nu) {
  return std::make_shared<RadialMap>(mu, nu);
}

double transport_residual(const TransportMap& tm, const Vec& x) {
  if (!tm.in_source_support(x)) {
    std::ostringstream os;
    os << tm.name() << ": residual requested outside the source support at " << x.transpose();
    throw DomainError(os.str());
  }
  return tm.source_potential(x) + tm.hessian(x).log_det() - tm.target_potential(tm.map(x));
}

LogSpectrum hessian_spectrum_at(const TransportMap& tm, const Vec& x) { return log_eigen_map(tm.hessian(x)); }

}  // namespace otspec
