#include "otspec/measures.hpp"

#include "otspec/errors.hpp"
#include "otspec/quadrature.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace otspec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class GaussianPotential final : public Potential1D {
 public:
  GaussianPotential(double m, double sigma) : m_(m), sigma_(sigma) {}
  double value(double x) const override {
    const double z = (x - m_) / sigma_;
    return 0.5 * z * z + log_normalizer();
  }
  double d1(double x) const override { return (x - m_) / (sigma_ * sigma_); }
  std::optional<double> d2(double) const override { return 1.0 / (sigma_ * sigma_); }
  bool smooth() const override { return true; }
  std::optional<double> cdf(double x) const override {
    return 0.5 * std::erfc(-(x - m_) / (sigma_ * std::numbers::sqrt2));
  }
  std::optional<double> ccdf(double x) const override {
    return 0.5 * std::erfc((x - m_) / (sigma_ * std::numbers::sqrt2));
  }
  double log_normalizer() const override { return std::log(sigma_ * std::sqrt(2.0 * std::numbers::pi)); }
  double center_hint() const override { return m_; }
  double scale_hint() const override { return sigma_; }
  std::optional<std::pair<double, double>> gaussian_parameters() const override {
    return std::make_pair(m_, sigma_);
  }

 private:
  double m_, sigma_;
};

class UniformPotential final : public Potential1D {
 public:
  UniformPotential(double a, double b) : a_(a), b_(b) {}
  double value(double) const override { return log_normalizer(); }
  double d1(double) const override { return 0.0; }
  std::optional<double> d2(double) const override { return 0.0; }
  bool smooth() const override { return true; }
  std::optional<double> cdf(double x) const override { return (x - a_) / (b_ - a_); }
  std::optional<double> ccdf(double x) const override { return (b_ - x) / (b_ - a_); }
  double log_normalizer() const override { return std::log(b_ - a_); }
  double center_hint() const override { return 0.5 * (a_ + b_); }
  double scale_hint() const override { return b_ - a_; }

 private:
  double a_, b_;
};

class ExponentialPotential final : public Potential1D {
 public:
  explicit ExponentialPotential(double rate) : rate_(rate) {}
  double value(double x) const override { return rate_ * x + log_normalizer(); }
  double d1(double) const override { return rate_; }
  std::optional<double> d2(double) const override { return 0.0; }
  bool smooth() const override { return true; }
  std::optional<double> cdf(double x) const override { return -std::expm1(-rate_ * x); }
  std::optional<double> ccdf(double x) const override { return std::exp(-rate_ * x); }
  double log_normalizer() const override { return -std::log(rate_); }
  double center_hint() const override { return std::numbers::ln2 / rate_; }
  double scale_hint() const override { return 1.0 / rate_; }

 private:
  double rate_;
};

class GammaPotential final : public Potential1D {
 public:
  GammaPotential(double shape, double rate) : k_(shape), rate_(rate) {}
  double value(double x) const override {
    const double log_term = k_ == 1.0 ? 0.0 : (k_ - 1.0) * std::log(x);
    return -log_term + rate_ * x + log_normalizer();
  }
  double d1(double x) const override { return -(k_ - 1.0) / x + rate_; }
  std::optional<double> d2(double x) const override { return (k_ - 1.0) / (x * x); }
  bool smooth() const override { return true; }
  std::optional<double> cdf(double x) const override { return boost::math::gamma_p(k_, rate_ * x); }
  std::optional<double> ccdf(double x) const override { return boost::math::gamma_q(k_, rate_ * x); }
  double log_normalizer() const override { return std::lgamma(k_) - k_ * std::log(rate_); }
  double center_hint() const override { return k_ / rate_; }
  double scale_hint() const override { return std::sqrt(k_) / rate_; }

 private:
  double k_, rate_;
};

class BetaPotential final : public Potential1D {
 public:
  BetaPotential(double a, double b) : a_(a), b_(b) {}
  double value(double x) const override {
    double v = log_normalizer();
    if (a_ != 1.0) v -= (a_ - 1.0) * std::log(x);
    if (b_ != 1.0) v -= (b_ - 1.0) * std::log1p(-x);
    return v;
  }
  double d1(double x) const override { return -(a_ - 1.0) / x + (b_ - 1.0) / (1.0 - x); }
  std::optional<double> d2(double x) const override {
    return (a_ - 1.0) / (x * x) + (b_ - 1.0) / ((1.0 - x) * (1.0 - x));
  }
  bool smooth() const override { return true; }
  std::optional<double> cdf(double x) const override { return boost::math::ibeta(a_, b_, x); }
  std::optional<double> ccdf(double x) const override { return boost::math::ibetac(a_, b_, x); }
  double log_normalizer() const override { return std::lgamma(a_) + std::lgamma(b_) - std::lgamma(a_ + b_); }
  double center_hint() const override { return a_ / (a_ + b_); }
  double scale_hint() const override {
    const double s = a_ + b_;
    return std::sqrt(a_ * b_ / (s * s * (s + 1.0)));
  }

 private:
  double a_, b_;
};

class LogisticPotential final : public Potential1D {
 public:
  LogisticPotential(double m, double s) : m_(m), s_(s) {}
  double value(double x) const override {
    const double z = std::abs((x - m_) / s_);
    return z + 2.0 * std::log1p(std::exp(-z)) + log_normalizer();
  }
  double d1(double x) const override { return std::tanh(0.5 * (x - m_) / s_) / s_; }
  std::optional<double> d2(double x) const override {
    const double t = std::tanh(0.5 * (x - m_) / s_);
    return (1.0 - t * t) / (2.0 * s_ * s_);
  }
  bool smooth() const override { return true; }
  std::optional<double> cdf(double x) const override { return 1.0 / (1.0 + std::exp(-(x - m_) / s_)); }
  std::optional<double> ccdf(double x) const override { return 1.0 / (1.0 + std::exp((x - m_) / s_)); }
  double log_normalizer() const override { return std::log(s_); }
  double center_hint() const override { return m_; }
  double scale_hint() const override { return s_ * std::numbers::pi / std::numbers::sqrt3; }

 private:
  double m_, s_;
};

class LaplacePotential final : public Potential1D {
 public:
  LaplacePotential(double m, double b) : m_(m), b_(b) {}
  double value(double x) const override { return std::abs(x - m_) / b_ + log_normalizer(); }
  double d1(double x) const override { return (x >= m_ ? 1.0 : -1.0) / b_; }
  std::optional<double> d2(double) const override { return std::nullopt; }
  bool smooth() const override { return false; }
  std::optional<double> cdf(double x) const override {
    const double z = (x - m_) / b_;
    return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
  }
  std::optional<double> ccdf(double x) const override {
    const double z = (x - m_) / b_;
    return z >= 0.0 ? 0.5 * std::exp(-z) : 1.0 - 0.5 * std::exp(z);
  }
  double log_normalizer() const override { return std::log(2.0 * b_); }
  double center_hint() const override { return m_; }
  double scale_hint() const override { return b_ * std::numbers::sqrt2; }

 private:
  double m_, b_;
};

// Density proportional to exp(-|x|^p / p).
class SubbotinPotential final : public Potential1D {
 public:
  explicit SubbotinPotential(double p) : p_(p) {}
  double value(double x) const override { return std::pow(std::abs(x), p_) / p_ + log_normalizer(); }
  double d1(double x) const override {
    const double sign = x >= 0.0 ? 1.0 : -1.0;
    return p_ == 1.0 ? sign : sign * std::pow(std::abs(x), p_ - 1.0);
  }
  std::optional<double> d2(double x) const override {
    if (p_ < 2.0) return std::nullopt;
    return p_ == 2.0 ? 1.0 : (p_ - 1.0) * std::pow(std::abs(x), p_ - 2.0);
  }
  bool smooth() const override { return p_ >= 2.0; }
  std::optional<double> cdf(double x) const override {
    const double t = half_tail(x);
    return x < 0.0 ? t : 1.0 - t;
  }
  std::optional<double> ccdf(double x) const override {
    const double t = half_tail(x);
    return x >= 0.0 ? t : 1.0 - t;
  }
  double log_normalizer() const override {
    return std::log(2.0) + std::log(p_) / p_ + std::lgamma(1.0 + 1.0 / p_);
  }
  double center_hint() const override { return 0.0; }
  double scale_hint() const override {
    return std::sqrt(std::pow(p_, 2.0 / p_) * std::tgamma(3.0 / p_) / std::tgamma(1.0 / p_));
  }

 private:
  // Mass of (|x|, infinity).
  double half_tail(double x) const {
    return 0.5 * boost::math::gamma_q(1.0 / p_, std::pow(std::abs(x), p_) / p_);
  }
  double p_;
};

std::string describe(const std::string& name, const std::vector<double>& params) {
  std::ostringstream os;
  os << name << "(";
  for (std::size_t i = 0; i < params.size(); ++i) os << (i ? ", " : "") << params[i];
  os << ")";
  return os.str();
}

void require(bool ok, const std::string& name, const std::string& message) {
  if (!ok) throw DomainError(name + ": " + message);
}

}  // namespace

LogConcaveMeasure1D::LogConcaveMeasure1D(std::string name, Interval support,
                                         std::shared_ptr<const Potential1D> potential,
                                         std::vector<double> kinks, bool validate_now)
    : name_(std::move(name)), support_(support), potential_(std::move(potential)), kinks_(std::move(kinks)) {
  if (!potential_) throw DomainError(name_ + ": missing potential");
  if (!(support_.lo < support_.hi)) throw DomainError(name_ + ": empty support");
  std::sort(kinks_.begin(), kinks_.end());
  median_ = potential_->center_hint();
  scale_ = potential_->scale_hint();
  if (!std::isfinite(median_) || !(scale_ > 0.0)) throw DomainError(name_ + ": invalid center/scale hint");

  // Bracket the median around the center hint, then refine.
  auto balance = [this](double x) { return cdf(x) - ccdf(x); };
  double a = median_, b = median_;
  double step = scale_;
  for (int k = 0; balance(a) > 0.0; ++k) {
    a = std::isfinite(support_.lo) ? std::max(median_ - step, 0.5 * (support_.lo + a)) : median_ - step;
    step *= 2.0;
    if (k > 200) throw ConvergenceError(name_ + ": cannot bracket the median");
  }
  step = scale_;
  for (int k = 0; balance(b) < 0.0; ++k) {
    b = std::isfinite(support_.hi) ? std::min(median_ + step, 0.5 * (support_.hi + b)) : median_ + step;
    step *= 2.0;
    if (k > 200) throw ConvergenceError(name_ + ": cannot bracket the median");
  }
  if (a < b) {
    std::uintmax_t iters = 200;
    const auto root = boost::math::tools::toms748_solve(balance, a, b, boost::math::tools::eps_tolerance<double>(50),
                                                        iters);
    median_ = 0.5 * (root.first + root.second);
  } else {
    median_ = a;
  }
  const double f_med = density(median_);
  if (!(f_med > 0.0) || !std::isfinite(f_med)) throw DomainError(name_ + ": density vanishes at the median");
  scale_ = 1.0 / f_med;
  if (validate_now) validate();
}

double LogConcaveMeasure1D::potential(double x) const {
  if (!in_support(x)) return kInf;
  return potential_->value(x);
}

double LogConcaveMeasure1D::potential_d1(double x) const {
  if (!in_support(x)) throw DomainError(name_ + ": potential derivative requested outside the support");
  return potential_->d1(x);
}

std::optional<double> LogConcaveMeasure1D::potential_d2(double x) const {
  if (!in_support(x)) throw DomainError(name_ + ": potential derivative requested outside the support");
  return potential_->d2(x);
}

double LogConcaveMeasure1D::density(double x) const {
  if (!in_support(x)) return 0.0;
  return std::exp(-potential_->value(x));
}

std::vector<double> LogConcaveMeasure1D::breakpoints() const {
  std::vector<double> cuts = kinks_;
  cuts.push_back(median_);
  for (double h : potential_->quadrature_hints()) cuts.push_back(h);
  return cuts;
}

double LogConcaveMeasure1D::mass_between(double a, double b) const {
  a = std::max(a, support_.lo);
  b = std::min(b, support_.hi);
  if (!(a < b)) return 0.0;
  const auto cuts = breakpoints();
  return integrate([this](double x) { return density(x); }, a, b, cuts);
}

double LogConcaveMeasure1D::cdf_by_quadrature(double x) const {
  if (x <= support_.lo) return 0.0;
  if (x >= support_.hi) return 1.0;
  if (x <= median_) return mass_between(support_.lo, x);
  return 1.0 - mass_between(x, support_.hi);
}

double LogConcaveMeasure1D::ccdf_by_quadrature(double x) const {
  if (x <= support_.lo) return 1.0;
  if (x >= support_.hi) return 0.0;
  if (x >= median_) return mass_between(x, support_.hi);
  return 1.0 - mass_between(support_.lo, x);
}

double LogConcaveMeasure1D::total_mass_by_quadrature() const {
  return mass_between(support_.lo, median_) + mass_between(median_, support_.hi);
}

double LogConcaveMeasure1D::cdf(double x) const {
  if (x <= support_.lo) return 0.0;
  if (x >= support_.hi) return 1.0;
  if (auto c = potential_->cdf(x)) return *c;
  return cdf_by_quadrature(x);
}

double LogConcaveMeasure1D::ccdf(double x) const {
  if (x <= support_.lo) return 1.0;
  if (x >= support_.hi) return 0.0;
  if (auto c = potential_->ccdf(x)) return *c;
  return ccdf_by_quadrature(x);
}

double LogConcaveMeasure1D::tail(bool upper, double x) const { return upper ? ccdf(x) : cdf(x); }

// Works in the reflected coordinate y = sigma * x, in which the tail mass is
// increasing and log-concave. Starting at the median the first Newton step on
// log(tail) overshoots below the root; afterwards the iterates increase
// monotonically, so each new tail value is the previous one plus a short
// integral.
double LogConcaveMeasure1D::solve_tail(bool upper, double target) const {
  const double sigma = upper ? -1.0 : 1.0;
  const bool analytic = potential_->cdf(median_).has_value();
  const double log_target = std::log(target);
  auto to_x = [sigma](double y) { return sigma * y; };

  double y_hi = sigma * median_;
  double y_lo = upper ? -support_.hi : support_.lo;
  if (!std::isfinite(y_lo)) {
    double step = scale_;
    double y = y_hi - step;
    int k = 0;
    while (tail(upper, to_x(y)) >= target) {
      y_hi = y;
      step *= 2.0;
      y -= step;
      if (++k > 200) throw ConvergenceError(name_ + ": cannot bracket quantile");
    }
    y_lo = y;
  }

  double y = y_hi;
  double t = tail(upper, to_x(y));
  for (int iter = 0; iter < 300; ++iter) {
    const double dens = density(to_x(y));
    double y_new;
    bool bisected = false;
    if (t > 0.0 && dens > 0.0 && std::isfinite(dens)) {
      y_new = y + (log_target - std::log(t)) * t / dens;
    } else {
      y_new = std::numeric_limits<double>::quiet_NaN();
    }
    if (!(y_new > y_lo && y_new < y_hi)) {
      y_new = 0.5 * (y_lo + y_hi);
      bisected = true;
    }
    double t_new;
    if (!analytic && !bisected && y_new > y && t > 0.0) {
      t_new = t + mass_between(std::min(to_x(y), to_x(y_new)), std::max(to_x(y), to_x(y_new)));
    } else {
      t_new = tail(upper, to_x(y_new));
    }
    if (t_new < target) {
      y_lo = y_new;
    } else {
      y_hi = y_new;
    }
    const double tol = 1e-15 * (std::abs(y_new) + scale_);
    if (std::abs(y_new - y) <= tol || y_hi - y_lo <= tol || (t_new > 0.0 && std::abs(std::log(t_new) - log_target) <= 1e-15)) {
      return to_x(y_new);
    }
    y = y_new;
    t = t_new;
  }
  throw ConvergenceError(name_ + ": quantile iteration did not converge for tail mass " + std::to_string(target));
}

double LogConcaveMeasure1D::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(name_ + ": quantile level must lie in (0, 1), got " + std::to_string(p));
  if (p == 0.5) return median_;
  return p < 0.5 ? solve_tail(false, p) : solve_tail(true, 1.0 - p);
}

double LogConcaveMeasure1D::upper_quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw DomainError(name_ + ": tail level must lie in (0, 1), got " + std::to_string(q));
  if (q == 0.5) return median_;
  return q < 0.5 ? solve_tail(true, q) : solve_tail(false, 1.0 - q);
}

double LogConcaveMeasure1D::sample_from_uniform(double u) const {
  return u <= 0.5 ? quantile(u) : upper_quantile(1.0 - u);
}

double LogConcaveMeasure1D::sample(Rng& rng) const { return sample_from_uniform(open_uniform(rng)); }

void LogConcaveMeasure1D::validate() const {
  constexpr int kGrid = 1000;
  const double a = std::max(support_.lo, median_ - 30.0 * scale_);
  const double b = std::min(support_.hi, median_ + 30.0 * scale_);
  std::vector<double> xs(kGrid), vs(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    xs[i] = a + (b - a) * (i + 0.5) / kGrid;
    vs[i] = potential_->value(xs[i]);
  }
  if (potential_->smooth()) {
    std::vector<double> d2s(kGrid);
    double largest = 0.0;
    for (int i = 0; i < kGrid; ++i) {
      d2s[i] = potential_->d2(xs[i]).value();
      largest = std::max(largest, std::abs(d2s[i]));
    }
    for (int i = 0; i < kGrid; ++i) {
      if (d2s[i] < -1e-9 - 1e-11 * largest) {
        throw DomainError(name_ + ": potential not convex, V''(" + std::to_string(xs[i]) + ") = " + std::to_string(d2s[i]));
      }
    }
  } else {
    for (int i = 1; i + 1 < kGrid; ++i) {
      const double mid = 0.5 * (vs[i - 1] + vs[i + 1]);
      if (vs[i] > mid + 1e-9 * (1.0 + std::abs(mid))) {
        throw DomainError(name_ + ": potential not convex near x = " + std::to_string(xs[i]));
      }
    }
  }
  const double mass = total_mass_by_quadrature();
  if (!(std::abs(mass - 1.0) <= 1e-8)) {
    std::ostringstream os;
    os.precision(17);
    os << name_ << ": density integrates to " << mass << ", not 1";
    throw DomainError(os.str());
  }
}

LogConcaveMeasure1D make_catalog_measure(const std::string& name, const std::vector<double>& params) {
  const std::string label = describe(name, params);
  for (double v : params) require(std::isfinite(v), label, "parameters must be finite");
  auto arity = [&](std::size_t n) {
    require(params.size() == n, label, "expects " + std::to_string(n) + " parameter(s)");
  };
  if (name == "gaussian") {
    arity(2);
    require(params[1] > 0.0, label, "standard deviation must be positive");
    return {label, {}, std::make_shared<GaussianPotential>(params[0], params[1])};
  }
  if (name == "uniform") {
    arity(2);
    require(params[0] < params[1], label, "requires a < b");
    return {label, {params[0], params[1]}, std::make_shared<UniformPotential>(params[0], params[1])};
  }
  if (name == "exponential") {
    arity(1);
    require(params[0] > 0.0, label, "rate must be positive");
    return {label, {0.0, kInf}, std::make_shared<ExponentialPotential>(params[0])};
  }
  if (name == "gamma") {
    arity(2);
    require(params[0] >= 1.0, label, "shape must be >= 1 for log-concavity");
    require(params[1] > 0.0, label, "rate must be positive");
    return {label, {0.0, kInf}, std::make_shared<GammaPotential>(params[0], params[1])};
  }
  if (name == "beta") {
    arity(2);
    require(params[0] >= 1.0 && params[1] >= 1.0, label, "both shapes must be >= 1 for log-concavity");
    return {label, {0.0, 1.0}, std::make_shared<BetaPotential>(params[0], params[1])};
  }
  if (name == "logistic") {
    arity(2);
    require(params[1] > 0.0, label, "scale must be positive");
    return {label, {}, std::make_shared<LogisticPotential>(params[0], params[1])};
  }
  if (name == "laplace") {
    arity(2);
    require(params[1] > 0.0, label, "scale must be positive");
    return {label, {}, std::make_shared<LaplacePotential>(params[0], params[1]), {params[0]}};
  }
  if (name == "subbotin") {
    arity(1);
    require(params[0] >= 1.0, label, "exponent must be >= 1 for log-concavity");
    std::vector<double> kinks;
    if (params[0] < 2.0) kinks.push_back(0.0);
    return {label, {}, std::make_shared<SubbotinPotential>(params[0]), kinks};
  }
  throw DomainError("unknown catalog measure '" + name +
                    "' (expected gaussian, uniform, exponential, gamma, beta, logistic, laplace, subbotin)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Splits the argument list at top-level commas.
std::vector<std::string> split_arguments(const std::string& body) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : body) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

double parse_number(const std::string& text, const std::string& spec) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw DomainError("measure spec '" + spec + "': bad number '" + text + "'");
  return v;
}

}  // namespace

LogConcaveMeasure1D parse_measure_spec(const std::string& raw) {
  const std::string spec = trim(raw);
  const auto open = spec.find('(');
  if (open == std::string::npos || spec.back() != ')')
    throw DomainError("measure spec '" + spec + "': expected name(p1, ...)");
  const std::string name = trim(spec.substr(0, open));
  const auto args = split_arguments(spec.substr(open + 1, spec.size() - open - 2));
  if (name == "regularize") {
    if (args.size() != 2) throw DomainError("measure spec '" + spec + "': regularize(measure, N)");
    const double n = parse_number(args[1], spec);
    if (n < 1.0 || n != std::floor(n)) throw DomainError("measure spec '" + spec + "': N must be a positive integer");
    return regularize(parse_measure_spec(args[0]), static_cast<int>(n));
  }
  std::vector<double> params;
  for (const auto& a : args) params.push_back(parse_number(a, spec));
  return make_catalog_measure(name, params);
}

std::vector<std::string> catalog_names() {
  return {"gaussian", "uniform", "exponential", "gamma", "beta", "logistic", "laplace", "subbotin"};
}

}  // namespace otspec
