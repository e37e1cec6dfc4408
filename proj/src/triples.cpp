#include "otspec/triples.hpp"

#include "otspec/errors.hpp"
#include "otspec/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace otspec {

namespace {

// Hyper-dual number a + b e1 + c e2 + d e1 e2 with e1^2 = e2^2 = 0: the e1 e2
// coefficient of f(x + e1 u + e2 v) is the exact second directional derivative.
struct HyperDual {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  HyperDual() = default;
  HyperDual(double a_, double b_ = 0.0, double c_ = 0.0, double d_ = 0.0) : a(a_), b(b_), c(c_), d(d_) {}
};

HyperDual operator+(const HyperDual& x, const HyperDual& y) { return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d}; }
HyperDual operator-(const HyperDual& x, const HyperDual& y) { return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d}; }
HyperDual operator*(const HyperDual& x, const HyperDual& y) {
  return {x.a * y.a, x.a * y.b + x.b * y.a, x.a * y.c + x.c * y.a, x.a * y.d + x.b * y.c + x.c * y.b + x.d * y.a};
}

// f(x) given f, f', f'' at the real part.
HyperDual lift(const HyperDual& x, double f0, double f1, double f2) {
  return {f0, f1 * x.b, f1 * x.c, f1 * x.d + f2 * x.b * x.c};
}

HyperDual operator/(const HyperDual& x, const HyperDual& y) {
  const double inv = 1.0 / y.a;
  return x * lift(y, inv, -inv * inv, 2.0 * inv * inv * inv);
}

double ad_tanh(double x) { return std::tanh(x); }
HyperDual ad_tanh(const HyperDual& x) {
  const double t = std::tanh(x.a);
  const double s2 = 1.0 - t * t;
  return lift(x, t, s2, -2.0 * t * s2);
}

double ad_log(double x) { return std::log(x); }
HyperDual ad_log(const HyperDual& x) { return lift(x, std::log(x.a), 1.0 / x.a, -1.0 / (x.a * x.a)); }

double logcosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2;
}
HyperDual logcosh(const HyperDual& x) {
  const double t = std::tanh(x.a);
  return lift(x, logcosh(x.a), t, 1.0 - t * t);
}

double real_part(double x) { return x; }
double real_part(const HyperDual& x) { return x.a; }

// log det of a symmetric positive-definite n x n matrix (row-major) by LDL^T.
template <class T>
T log_det_ldl(const std::vector<T>& a, int n) {
  std::vector<T> l(static_cast<std::size_t>(n) * n, T(0.0));
  std::vector<T> d(n, T(0.0));
  T acc(0.0);
  for (int j = 0; j < n; ++j) {
    T dj = a[j * n + j];
    for (int k = 0; k < j; ++k) dj = dj - l[j * n + k] * l[j * n + k] * d[k];
    if (!(real_part(dj) > 0.0)) throw DomainError("synthetic triple: Hessian of Phi lost positivity");
    d[j] = dj;
    for (int i = j + 1; i < n; ++i) {
      T v = a[i * n + j];
      for (int k = 0; k < j; ++k) v = v - l[i * n + k] * l[j * n + k] * d[k];
      l[i * n + j] = v / dj;
    }
    acc = acc + ad_log(dj);
  }
  return acc;
}

Vec scaled_unit(int n, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return random_unit_vector(n, rng) * u(rng);
}

}  // namespace

template <class T>
T SyntheticTriple::v_of(const std::vector<T>& x) const {
  const int n = n_;
  const std::size_t terms = w_dirs_.size();
  std::vector<T> grad(n, T(0.0)), hess(static_cast<std::size_t>(n) * n, T(0.0));
  for (std::size_t m = 0; m < terms; ++m) {
    T s(0.0);
    for (int i = 0; i < n; ++i) s = s + x[i] * w_dirs_[m](i);
    const T th = ad_tanh(s);
    const T sech2 = T(1.0) - th * th;
    for (int i = 0; i < n; ++i) {
      grad[i] = grad[i] + th * (kappa_[m] * w_dirs_[m](i));
      for (int j = 0; j < n; ++j) hess[i * n + j] = hess[i * n + j] + sech2 * (kappa_[m] * w_dirs_[m](i) * w_dirs_[m](j));
    }
  }
  for (int i = 0; i < n; ++i) {
    grad[i] = grad[i] + x[i];
    hess[i * n + i] = hess[i * n + i] + T(1.0);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double c = delta_ * cubic_[(static_cast<std::size_t>(i) * n + j) * n + k];
        grad[i] = grad[i] + x[j] * x[k] * (0.5 * c);
        hess[i * n + j] = hess[i * n + j] + x[k] * c;
      }
  }
  T w(0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w = w + grad[i] * grad[j] * (0.5 * s_(i, j));
  for (std::size_t m = 0; m < z_dirs_.size(); ++m) {
    T s(0.0);
    for (int i = 0; i < n; ++i) s = s + grad[i] * z_dirs_[m](i);
    w = w + logcosh(s) * eta_[m];
  }
  return w - log_det_ldl(hess, n);
}

SyntheticTriple::SyntheticTriple(const SyntheticTripleParams& params) : params_(params), n_(params.dim) {
  if (n_ < 1 || n_ > 6) throw DomainError("SyntheticTriple: dimension must be in [1, 6]");
  if (!(params.strength > 0.0 && params.strength <= 1.0))
    throw DomainError("SyntheticTriple: strength must be in (0, 1]");
  Rng rng = make_stream(params.seed, 1000 + static_cast<std::uint64_t>(n_));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(0.1, 0.5);

  const int n = n_;
  std::vector<double> raw(static_cast<std::size_t>(n) * n * n);
  for (double& v : raw) v = normal(rng);
  auto at = [n](const std::vector<double>& t, int i, int j, int k) {
    return t[(static_cast<std::size_t>(i) * n + j) * n + k];
  };
  cubic_.assign(raw.size(), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        cubic_[(static_cast<std::size_t>(i) * n + j) * n + k] =
            (at(raw, i, j, k) + at(raw, i, k, j) + at(raw, j, i, k) + at(raw, j, k, i) + at(raw, k, i, j) +
             at(raw, k, j, i)) /
            6.0;
  // sup over the box of ||sum_k c_..k x_k||_op is at most sum_k ||C_k||_op.
  double bound = 0.0;
  for (int k = 0; k < n; ++k) {
    Mat ck(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) ck(i, j) = at(cubic_, i, j, k);
    bound += Eigen::SelfAdjointEigenSolver<Mat>(ck).eigenvalues().cwiseAbs().maxCoeff();
  }
  delta_ = bound > 0.0 ? 0.9 * params.strength / bound : 0.0;

  for (int m = 0; m < params.logcosh_terms; ++m) {
    w_dirs_.push_back(scaled_unit(n, rng, 0.5, 1.5));
    kappa_.push_back(params.strength * uni(rng));
  }
  const double half = 0.5 * params.w_log_range;
  s_ = random_spd(n, rng, half).matrix() * std::exp(half);
  for (int m = 0; m < params.logcosh_terms; ++m) {
    z_dirs_.push_back(scaled_unit(n, rng, 0.5, 1.5));
    eta_.push_back(uni(rng));
  }

  // Verify D^2 V >= 0 on a 9^n grid over [-1, 1]^n (D^2 W >= 0 by construction).
  min_v_curvature_ = std::numeric_limits<double>::infinity();
  const int per_dim = 9;
  std::vector<int> idx(n, 0);
  while (true) {
    Vec x(n);
    for (int d = 0; d < n; ++d) x(d) = -1.0 + 2.0 * idx[d] / (per_dim - 1);
    const TripleJet j = jet(x);
    min_v_curvature_ = std::min(min_v_curvature_, Eigen::SelfAdjointEigenSolver<Mat>(j.v2).eigenvalues()(0));
    int d = 0;
    while (d < n && ++idx[d] == per_dim) idx[d++] = 0;
    if (d == n) break;
  }
  convex_ = min_v_curvature_ >= 0.0;
}

std::string SyntheticTriple::name() const {
  std::ostringstream os;
  os << "synthetic(n=" << n_ << ", seed=" << params_.seed << ", strength=" << params_.strength << ")";
  return os.str();
}

TripleJet SyntheticTriple::jet(const Vec& x) const {
  const int n = n_;
  require_same_dim("SyntheticTriple::jet", n, x.size());
  TripleJet j;
  j.x = x;
  j.t = x;
  j.phi2 = Mat::Identity(n, n);
  j.phi3 = Tensor3(n);
  for (std::size_t m = 0; m < w_dirs_.size(); ++m) {
    const Vec& w = w_dirs_[m];
    const double th = std::tanh(w.dot(x));
    const double sech2 = 1.0 - th * th;
    j.t += kappa_[m] * th * w;
    j.phi2 += kappa_[m] * sech2 * w * w.transpose();
    const double third = -2.0 * kappa_[m] * sech2 * th;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) j.phi3(a, b, c) += third * w(a) * w(b) * w(c);
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        const double cabc = delta_ * cubic_[(static_cast<std::size_t>(a) * n + b) * n + c];
        j.t(a) += 0.5 * cabc * x(b) * x(c);
        j.phi2(a, b) += cabc * x(c);
        j.phi3(a, b, c) += cabc;
      }

  // W at T(x)
  const Vec& y = j.t;
  j.w = 0.5 * y.dot(s_ * y);
  j.w1 = s_ * y;
  j.w2 = s_;
  for (std::size_t m = 0; m < z_dirs_.size(); ++m) {
    const Vec& z = z_dirs_[m];
    const double s = z.dot(y);
    const double th = std::tanh(s);
    j.w += eta_[m] * logcosh(s);
    j.w1 += eta_[m] * th * z;
    j.w2 += eta_[m] * (1.0 - th * th) * z * z.transpose();
  }

  // V and its derivatives, one hyper-dual pass per pair i <= k.
  std::vector<double> xd(x.data(), x.data() + n);
  j.v = v_of(xd);
  j.v1 = Vec(n);
  j.v2 = Mat(n, n);
  std::vector<HyperDual> xh(n);
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k) {
      for (int d = 0; d < n; ++d) xh[d] = HyperDual(x(d), d == i ? 1.0 : 0.0, d == k ? 1.0 : 0.0, 0.0);
      const HyperDual r = v_of(xh);
      if (k == i) j.v1(i) = r.b;
      j.v2(i, k) = j.v2(k, i) = r.d;
    }
  return j;
}

Vec SyntheticTriple::random_point(Rng& rng) const {
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  Vec x(n_);
  for (int i = 0; i < n_; ++i) x(i) = u(rng);
  return x;
}

OneDimTriple::OneDimTriple(std::shared_ptr<const Brenier1D> map) : map_(std::move(map)) {
  if (!map_->source().has_potential_d2() || !map_->target().has_potential_d2())
    throw DomainError("OneDimTriple: both measures need smooth potentials");
}

std::string OneDimTriple::name() const { return "1d[" + map_->name() + "]"; }

TripleJet OneDimTriple::jet(const Vec& x) const {
  require_same_dim("OneDimTriple::jet", 1, x.size());
  const double xv = x(0);
  const auto& mu = map_->source();
  const auto& nu = map_->target();
  TripleJet j;
  j.x = x;
  const double t = map_->transport(xv);
  j.t = Vec::Constant(1, t);
  j.phi2 = Mat::Constant(1, 1, map_->second_derivative(xv));
  j.phi3 = Tensor3(1);
  j.phi3(0, 0, 0) = map_->third_derivative(xv);
  j.v = mu.potential(xv);
  j.v1 = Vec::Constant(1, mu.potential_d1(xv));
  j.v2 = Mat::Constant(1, 1, *mu.potential_d2(xv));
  j.w = nu.potential(t);
  j.w1 = Vec::Constant(1, nu.potential_d1(t));
  j.w2 = Mat::Constant(1, 1, *nu.potential_d2(t));
  return j;
}

Vec OneDimTriple::random_point(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  return Vec::Constant(1, map_->source().quantile(u(rng)));
}

std::pair<Vec, double> OneDimTriple::test_box() const {
  const auto& mu = map_->source();
  const double c = mu.median();
  const double r = std::min(c - mu.quantile(0.05), mu.upper_quantile(0.05) - c);
  return {Vec::Constant(1, c), r};
}

GaussianTriple::GaussianTriple(const GaussianMeasure& mu, const GaussianMeasure& nu)
    : map_(brenier_gaussian(mu, nu)),
      prec_mu_(mu.covariance().inverse().matrix()),
      prec_nu_(nu.covariance().inverse().matrix()) {}

std::string GaussianTriple::name() const { return "gaussian[" + map_->name() + "]"; }

TripleJet GaussianTriple::jet(const Vec& x) const {
  const int n = dim();
  require_same_dim("GaussianTriple::jet", n, x.size());
  const auto& mu = map_->source();
  const auto& nu = map_->target();
  TripleJet j;
  j.x = x;
  j.t = map_->map(x);
  j.phi2 = map_->matrix().matrix();
  j.phi3 = Tensor3(n);
  j.v = mu.potential(x);
  j.v1 = prec_mu_ * (x - mu.mean());
  j.v2 = prec_mu_;
  j.w = nu.potential(j.t);
  j.w1 = prec_nu_ * (j.t - nu.mean());
  j.w2 = prec_nu_;
  return j;
}

Vec GaussianTriple::random_point(Rng& rng) const { return map_->source().sample(rng); }

std::pair<Vec, double> GaussianTriple::test_box() const {
  const auto& mu = map_->source();
  return {mu.mean(), 2.0 * std::sqrt(mu.covariance().eigenvalues()(0))};
}

ProductTriple::ProductTriple(std::vector<std::shared_ptr<const OneDimTriple>> factors)
    : factors_(std::move(factors)) {
  if (factors_.empty()) throw DomainError("ProductTriple: no factors");
}

std::string ProductTriple::name() const {
  std::string s = "product[";
  for (std::size_t i = 0; i < factors_.size(); ++i) s += (i ? " x " : "") + factors_[i]->map().name();
  return s + "]";
}

TripleJet ProductTriple::jet(const Vec& x) const {
  const int n = dim();
  require_same_dim("ProductTriple::jet", n, x.size());
  TripleJet j;
  j.x = x;
  j.t = Vec(n);
  j.phi2 = Mat::Zero(n, n);
  j.phi3 = Tensor3(n);
  j.v1 = Vec(n);
  j.v2 = Mat::Zero(n, n);
  j.w1 = Vec(n);
  j.w2 = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const TripleJet f = factors_[k]->jet(Vec::Constant(1, x(k)));
    j.t(k) = f.t(0);
    j.phi2(k, k) = f.phi2(0, 0);
    j.phi3(k, k, k) = f.phi3(0, 0, 0);
    j.v += f.v;
    j.v1(k) = f.v1(0);
    j.v2(k, k) = f.v2(0, 0);
    j.w += f.w;
    j.w1(k) = f.w1(0);
    j.w2(k, k) = f.w2(0, 0);
  }
  return j;
}

Vec ProductTriple::random_point(Rng& rng) const {
  Vec x(dim());
  for (int k = 0; k < dim(); ++k) x(k) = factors_[k]->random_point(rng)(0);
  return x;
}

std::pair<Vec, double> ProductTriple::test_box() const {
  Vec c(dim());
  double r = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dim(); ++k) {
    const auto [ck, rk] = factors_[k]->test_box();
    c(k) = ck(0);
    r = std::min(r, rk);
  }
  return {c, r};
}

std::shared_ptr<OneDimTriple> one_dim_triple(const std::string& source_spec, const std::string& target_spec) {
  return std::make_shared<OneDimTriple>(
      brenier_1d(parse_measure_spec(source_spec), parse_measure_spec(target_spec)));
}

std::vector<SmoothTriplePtr> standard_triple_suite(std::uint64_t seed) {
  std::vector<SmoothTriplePtr> suite;
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"gaussian(0, 1)", "logistic(0, 1)"},  {"logistic(0, 1)", "gaussian(1, 2)"},
      {"gamma(2, 1)", "gaussian(0, 1)"},     {"beta(2, 2)", "logistic(0, 0.5)"},
      {"subbotin(4)", "gaussian(0, 1)"},     {"gaussian(0, 1)", "subbotin(4)"},
  };
  std::vector<std::shared_ptr<const OneDimTriple>> one_dim;
  for (const auto& [a, b] : pairs) {
    one_dim.push_back(one_dim_triple(a, b));
    suite.push_back(one_dim.back());
  }

  const std::vector<double> strengths_1d = {0.3, 0.9};
  const std::vector<double> strengths = {0.1, 0.2, 0.3, 0.6, 0.9};
  for (int n = 1; n <= 3; ++n) {
    const auto& list = n == 1 ? strengths_1d : strengths;
    for (std::size_t s = 0; s < list.size(); ++s) {
      SyntheticTripleParams p;
      p.dim = n;
      p.seed = seed * 131 + 17 * static_cast<std::uint64_t>(n) + s;
      p.strength = list[s];
      suite.push_back(std::make_shared<SyntheticTriple>(p));
    }
  }

  Rng rng = make_stream(seed, 4242);
  for (int n = 2; n <= 3; ++n) {
    Vec m1 = Vec::Zero(n), m2 = Vec::LinSpaced(n, -1.0, 1.0);
    suite.push_back(std::make_shared<GaussianTriple>(GaussianMeasure(m1, random_spd(n, rng, 1.0)),
                                                     GaussianMeasure(m2, random_spd(n, rng, 1.0))));
  }
  suite.push_back(std::make_shared<ProductTriple>(std::vector<std::shared_ptr<const OneDimTriple>>{one_dim[0], one_dim[2]}));
  suite.push_back(std::make_shared<ProductTriple>(std::vector<std::shared_ptr<const OneDimTriple>>{one_dim[1], one_dim[3]}));
  suite.push_back(
      std::make_shared<ProductTriple>(std::vector<std::shared_ptr<const OneDimTriple>>{one_dim[4], one_dim[5], one_dim[0]}));
  return suite;
}

SmoothTestFunction::SmoothTestFunction(std::string name, Vec a, Mat b, double alpha, Vec w, double phase,
                                       double beta, Vec z)
    : name_(std::move(name)),
      a_(std::move(a)),
      b_(0.5 * (b + b.transpose())),
      alpha_(alpha),
      w_(std::move(w)),
      phase_(phase),
      beta_(beta),
      z_(std::move(z)) {
  const auto n = a_.size();
  require_same_dim("SmoothTestFunction: B", n, b_.rows());
  require_same_dim("SmoothTestFunction: w", n, w_.size());
  require_same_dim("SmoothTestFunction: z", n, z_.size());
}

UJet SmoothTestFunction::jet(const Vec& x) const {
  require_same_dim("SmoothTestFunction::jet", a_.size(), x.size());
  const double s = w_.dot(x) + phase_;
  const double c = z_.dot(x);
  UJet u;
  u.value = a_.dot(x) + 0.5 * x.dot(b_ * x) + alpha_ * std::sin(s) + beta_ * c * c * c / 6.0;
  u.d1 = a_ + b_ * x + alpha_ * std::cos(s) * w_ + 0.5 * beta_ * c * c * z_;
  u.d2 = b_ - alpha_ * std::sin(s) * w_ * w_.transpose() + beta_ * c * z_ * z_.transpose();
  return u;
}

TestFunctionPtr linear_test_function(const Vec& a) {
  const auto n = a.size();
  return std::make_shared<SmoothTestFunction>("linear", a, Mat::Zero(n, n), 0.0, Vec::Zero(n), 0.0, 0.0,
                                              Vec::Zero(n));
}

TestFunctionPtr quadratic_test_function(const Vec& a, const Mat& b) {
  const auto n = a.size();
  return std::make_shared<SmoothTestFunction>("quadratic", a, b, 0.0, Vec::Zero(n), 0.0, 0.0, Vec::Zero(n));
}

std::vector<TestFunctionPtr> test_function_bank(int n, std::uint64_t seed, int count) {
  if (count < 2) throw DomainError("test_function_bank: count must be at least 2");
  Rng rng = make_stream(seed, 7000 + static_cast<std::uint64_t>(n));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto gauss_vec = [&] {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
  };
  auto gauss_sym = [&] {
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = normal(rng);
    return Mat(0.5 * (m + m.transpose()));
  };
  std::vector<TestFunctionPtr> bank;
  bank.push_back(linear_test_function(gauss_vec()));
  {
    Vec a = gauss_vec();
    bank.push_back(quadratic_test_function(a, gauss_sym()));
  }
  for (int k = 2; k < count; ++k) {
    Vec a = gauss_vec();
    Mat b = 0.5 * gauss_sym();
    const double alpha = 0.2 + 0.8 * uni(rng);
    Vec w = scaled_unit(n, rng, 0.5, 2.0);
    const double phase = 2.0 * std::numbers::pi * uni(rng);
    const double beta = uni(rng) - 0.5;
    Vec z = random_unit_vector(n, rng);
    bank.push_back(std::make_shared<SmoothTestFunction>("smooth#" + std::to_string(k - 1), a, b, alpha, w, phase,
                                                        beta, z));
  }
  return bank;
}

}  // namespace otspec
