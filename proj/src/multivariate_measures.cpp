#include "otspec/multivariate_measures.hpp"

#include "otspec/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace otspec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec standard_normal(int n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vec z(n);
  for (int i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

}  // namespace

double Measure::density(const Vec& x) const {
  const double v = potential(x);
  return std::isfinite(v) ? std::exp(-v) : 0.0;
}

GaussianMeasure::GaussianMeasure(Vec mean, SpdMatrix covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  require_same_dim("GaussianMeasure covariance", mean_.size(), cov_.dim());
  precision_ = cov_.inverse().matrix();
  sqrt_cov_ = cov_.sqrt();
  log_normalizer_ = 0.5 * dim() * std::log(2.0 * std::numbers::pi) + 0.5 * cov_.log_det();
}

std::string GaussianMeasure::name() const {
  std::ostringstream os;
  os << "gaussian" << dim() << "d";
  return os.str();
}

bool GaussianMeasure::in_support(const Vec& x) const { return x.size() == mean_.size() && x.allFinite(); }

double GaussianMeasure::potential(const Vec& x) const {
  require_same_dim("GaussianMeasure::potential", dim(), x.size());
  const Vec d = x - mean_;
  return 0.5 * d.dot(precision_ * d) + log_normalizer_;
}

Vec GaussianMeasure::potential_gradient(const Vec& x) const {
  require_same_dim("GaussianMeasure::potential_gradient", dim(), x.size());
  return precision_ * (x - mean_);
}

Mat GaussianMeasure::potential_hessian(const Vec& x) const {
  require_same_dim("GaussianMeasure::potential_hessian", dim(), x.size());
  return precision_;
}

Vec GaussianMeasure::sample(Rng& rng) const { return mean_ + sqrt_cov_ * standard_normal(dim(), rng); }

double GaussianMeasure::box_mass_lower_bound(const Vec& lo, const Vec& hi) const {
  require_same_dim("box lower corner", dim(), lo.size());
  require_same_dim("box upper corner", dim(), hi.size());
  // {(x-m)^T P (x-m) <= rho^2} has half-width rho * sqrt(Sigma_ii) along axis i.
  double rho = kInf;
  for (int i = 0; i < dim(); ++i) {
    const double half = std::min(mean_(i) - lo(i), hi(i) - mean_(i));
    if (half <= 0.0) return 0.0;
    rho = std::min(rho, half / std::sqrt(cov_.matrix()(i, i)));
  }
  return boost::math::gamma_p(0.5 * dim(), 0.5 * rho * rho);
}

ProductMeasure::ProductMeasure(std::vector<LogConcaveMeasure1D> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw DomainError("ProductMeasure: at least one factor required");
}

std::string ProductMeasure::name() const {
  std::string s = "product[";
  for (std::size_t i = 0; i < factors_.size(); ++i) s += (i ? " x " : "") + factors_[i].name();
  return s + "]";
}

bool ProductMeasure::in_support(const Vec& x) const {
  if (x.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (!factors_[i].in_support(x(i))) return false;
  return true;
}

double ProductMeasure::potential(const Vec& x) const {
  require_same_dim("ProductMeasure::potential", dim(), x.size());
  double v = 0.0;
  for (int i = 0; i < dim(); ++i) v += factors_[i].potential(x(i));
  return v;
}

Vec ProductMeasure::potential_gradient(const Vec& x) const {
  require_same_dim("ProductMeasure::potential_gradient", dim(), x.size());
  Vec g(dim());
  for (int i = 0; i < dim(); ++i) g(i) = factors_[i].potential_d1(x(i));
  return g;
}

Mat ProductMeasure::potential_hessian(const Vec& x) const {
  require_same_dim("ProductMeasure::potential_hessian", dim(), x.size());
  Mat h = Mat::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i) {
    const auto d2 = factors_[i].potential_d2(x(i));
    if (!d2) throw DomainError(factors_[i].name() + ": potential has no second derivative");
    h(i, i) = *d2;
  }
  return h;
}

Vec ProductMeasure::sample(Rng& rng) const {
  Vec x(dim());
  for (int i = 0; i < dim(); ++i) x(i) = factors_[i].sample(rng);
  return x;
}

double ProductMeasure::box_mass_lower_bound(const Vec& lo, const Vec& hi) const {
  require_same_dim("box lower corner", dim(), lo.size());
  require_same_dim("box upper corner", dim(), hi.size());
  double mass = 1.0;
  for (int i = 0; i < dim(); ++i) {
    const auto& f = factors_[i];
    const double inside = 1.0 - f.cdf(lo(i)) - f.ccdf(hi(i));
    mass *= std::max(0.0, inside);
  }
  return mass;
}

RadialMeasure::RadialMeasure(int n, RadialKind kind, double parameter) : n_(n), kind_(kind), param_(parameter) {
  if (n < 1) throw DomainError("RadialMeasure: dimension must be positive");
  if (!(parameter > 0.0) || !std::isfinite(parameter)) throw DomainError("RadialMeasure: parameter must be positive");
  const double half_n = 0.5 * n;
  log_sphere_area_ = std::log(2.0) + half_n * std::log(std::numbers::pi) - std::lgamma(half_n);
  switch (kind_) {
    case RadialKind::UniformBall:
      log_normalizer_ = half_n * std::log(std::numbers::pi) + n * std::log(param_) - std::lgamma(half_n + 1.0);
      break;
    case RadialKind::Gaussian:
      log_normalizer_ = half_n * std::log(2.0 * std::numbers::pi * param_ * param_);
      break;
    case RadialKind::Exponential:
      log_normalizer_ = log_sphere_area_ + n * std::log(param_) + std::lgamma(static_cast<double>(n));
      break;
  }
}

std::string RadialMeasure::name() const {
  std::ostringstream os;
  switch (kind_) {
    case RadialKind::UniformBall: os << "uniform_ball"; break;
    case RadialKind::Gaussian: os << "radial_gaussian"; break;
    case RadialKind::Exponential: os << "radial_exponential"; break;
  }
  os << "(n=" << n_ << ", " << param_ << ")";
  return os.str();
}

double RadialMeasure::max_radius() const { return kind_ == RadialKind::UniformBall ? param_ : kInf; }

bool RadialMeasure::in_support(const Vec& x) const {
  return x.size() == n_ && x.allFinite() && x.norm() < max_radius();
}

double RadialMeasure::radial_potential(double r) const {
  switch (kind_) {
    case RadialKind::UniformBall: return r < param_ ? log_normalizer_ : kInf;
    case RadialKind::Gaussian: return 0.5 * r * r / (param_ * param_) + log_normalizer_;
    case RadialKind::Exponential: return r / param_ + log_normalizer_;
  }
  return kInf;
}

double RadialMeasure::radial_potential_d1(double r) const {
  switch (kind_) {
    case RadialKind::UniformBall: return 0.0;
    case RadialKind::Gaussian: return r / (param_ * param_);
    case RadialKind::Exponential: return 1.0 / param_;
  }
  return 0.0;
}

double RadialMeasure::radial_potential_d2(double) const {
  return kind_ == RadialKind::Gaussian ? 1.0 / (param_ * param_) : 0.0;
}

double RadialMeasure::potential(const Vec& x) const {
  require_same_dim("RadialMeasure::potential", n_, x.size());
  return radial_potential(x.norm());
}

Vec RadialMeasure::potential_gradient(const Vec& x) const {
  require_same_dim("RadialMeasure::potential_gradient", n_, x.size());
  const double r = x.norm();
  if (kind_ == RadialKind::Gaussian) return x / (param_ * param_);
  if (kind_ == RadialKind::UniformBall || r == 0.0) return Vec::Zero(n_);
  return x / (r * param_);
}

Mat RadialMeasure::potential_hessian(const Vec& x) const {
  require_same_dim("RadialMeasure::potential_hessian", n_, x.size());
  switch (kind_) {
    case RadialKind::UniformBall: return Mat::Zero(n_, n_);
    case RadialKind::Gaussian: return Mat::Identity(n_, n_) / (param_ * param_);
    case RadialKind::Exponential: {
      const double r = x.norm();
      if (r == 0.0) throw DomainError(name() + ": potential not twice differentiable at the origin");
      const Vec u = x / r;
      return (Mat::Identity(n_, n_) - u * u.transpose()) / (r * param_);
    }
  }
  return Mat::Zero(n_, n_);
}

double RadialMeasure::radial_cdf(double r) const {
  if (r <= 0.0) return 0.0;
  switch (kind_) {
    case RadialKind::UniformBall: return r >= param_ ? 1.0 : std::pow(r / param_, n_);
    case RadialKind::Gaussian: return boost::math::gamma_p(0.5 * n_, 0.5 * r * r / (param_ * param_));
    case RadialKind::Exponential: return boost::math::gamma_p(static_cast<double>(n_), r / param_);
  }
  return 0.0;
}

double RadialMeasure::radial_ccdf(double r) const {
  if (r <= 0.0) return 1.0;
  switch (kind_) {
    case RadialKind::UniformBall: return r >= param_ ? 0.0 : -std::expm1(n_ * std::log(r / param_));
    case RadialKind::Gaussian: return boost::math::gamma_q(0.5 * n_, 0.5 * r * r / (param_ * param_));
    case RadialKind::Exponential: return boost::math::gamma_q(static_cast<double>(n_), r / param_);
  }
  return 1.0;
}

double RadialMeasure::radial_density(double r) const {
  if (r <= 0.0 || r >= max_radius()) return 0.0;
  return std::exp(log_sphere_area_ + (n_ - 1) * std::log(r) - radial_potential(r));
}

double RadialMeasure::radial_quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(name() + ": radial quantile level must lie in (0, 1)");
  switch (kind_) {
    case RadialKind::UniformBall: return param_ * std::pow(p, 1.0 / n_);
    case RadialKind::Gaussian: return param_ * std::sqrt(2.0 * boost::math::gamma_p_inv(0.5 * n_, p));
    case RadialKind::Exponential: return param_ * boost::math::gamma_p_inv(static_cast<double>(n_), p);
  }
  return 0.0;
}

double RadialMeasure::radial_upper_quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw DomainError(name() + ": radial tail level must lie in (0, 1)");
  switch (kind_) {
    case RadialKind::UniformBall: return param_ * std::exp(std::log1p(-q) / n_);
    case RadialKind::Gaussian: return param_ * std::sqrt(2.0 * boost::math::gamma_q_inv(0.5 * n_, q));
    case RadialKind::Exponential: return param_ * boost::math::gamma_q_inv(static_cast<double>(n_), q);
  }
  return 0.0;
}

Vec RadialMeasure::sample(Rng& rng) const {
  const double u = open_uniform(rng);
  const double r = u <= 0.5 ? radial_quantile(u) : radial_upper_quantile(1.0 - u);
  return r * random_unit_vector(n_, rng);
}

double RadialMeasure::box_mass_lower_bound(const Vec& lo, const Vec& hi) const {
  require_same_dim("box lower corner", n_, lo.size());
  require_same_dim("box upper corner", n_, hi.size());
  double rho = kInf;
  for (int i = 0; i < n_; ++i) rho = std::min({rho, -lo(i), hi(i)});
  return rho <= 0.0 ? 0.0 : radial_cdf(rho);
}

}  // namespace otspec
