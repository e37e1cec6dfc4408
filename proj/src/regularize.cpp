#include "otspec/errors.hpp"
#include "otspec/measures.hpp"
#include "otspec/quadrature.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace otspec {

namespace {

// Potential of the smoothed measure. For a point x the convolution integral
// is the mass of the posterior exp(g(y)), g(y) = -V(y) - (x - y)^2 / (2 s^2),
// which is log-concave in y; it is integrated in log-space around its mode.
class RegularizedPotential final : public Potential1D {
 public:
  RegularizedPotential(LogConcaveMeasure1D base, int n)
      : base_(std::move(base)), s_(1.0 / n), damping_(static_cast<double>(n)) {}

  void set_log_z(double log_z) { log_z_ = log_z; }

  // Un-normalized potential without the normalizing constant.
  double raw_value(double x) const {
    // Far outside the bulk the density underflows; skip the root search there.
    if (std::abs(x - base_.median()) > 1e4 * (base_.scale() + s_)) return std::numeric_limits<double>::infinity();
    const Posterior post = posterior(x, false);
    return -(post.log_mass - std::log(s_ * std::sqrt(2.0 * std::numbers::pi))) + x * x / (2.0 * damping_);
  }

  double value(double x) const override { return raw_value(x) + log_z_; }
  double d1(double x) const override { return jet(x).d1; }
  std::optional<double> d2(double x) const override { return jet(x).d2; }
  bool smooth() const override { return true; }
  PotentialJet jet(double x) const override {
    const Posterior post = posterior(x, true);
    const double s2 = s_ * s_;
    PotentialJet j;
    j.value = -(post.log_mass - std::log(s_ * std::sqrt(2.0 * std::numbers::pi))) + x * x / (2.0 * damping_) + log_z_;
    j.d1 = (x - post.mean) / s2 + x / damping_;
    j.d2 = (s2 - post.variance) / (s2 * s2) + 1.0 / damping_;
    return j;
  }
  double log_normalizer() const override { return log_z_; }
  double center_hint() const override { return base_.median(); }
  double scale_hint() const override { return std::hypot(base_.scale(), s_); }
  std::vector<double> quadrature_hints() const override {
    std::vector<double> hints = base_.kinks();
    const Interval sup = base_.support();
    if (std::isfinite(sup.lo)) hints.push_back(sup.lo);
    if (std::isfinite(sup.hi)) hints.push_back(sup.hi);
    hints.push_back(base_.median());
    return hints;
  }

 private:
  struct Posterior {
    double log_mass;
    double mean;
    double variance;
  };

  double slope(double x, double y) const { return -base_.potential_d1(y) + (x - y) / (s_ * s_); }

  double mode(double x) const {
    const Interval sup = base_.support();
    const double lo_in = std::isfinite(sup.lo) ? sup.lo + 1e-13 * (1.0 + std::abs(sup.lo)) : sup.lo;
    const double hi_in = std::isfinite(sup.hi) ? sup.hi - 1e-13 * (1.0 + std::abs(sup.hi)) : sup.hi;
    const double y0 = std::clamp(x, lo_in, hi_in);
    const double g0 = slope(x, y0);
    if (g0 == 0.0) return y0;
    const double dir = g0 > 0.0 ? 1.0 : -1.0;
    const double end = g0 > 0.0 ? hi_in : lo_in;
    double inner = y0;
    double outer = y0;
    double step = s_;
    for (int k = 0;; ++k) {
      outer = y0 + dir * step;
      if ((dir > 0.0 && outer >= end) || (dir < 0.0 && outer <= end)) {
        outer = end;
        if (slope(x, outer) * dir > 0.0) return outer;
        break;
      }
      if (slope(x, outer) * dir <= 0.0) break;
      inner = outer;
      step *= 2.0;
      if (k > 400) throw ConvergenceError("regularize: cannot bracket the posterior mode at x = " + std::to_string(x));
    }
    double a = std::min(inner, outer), b = std::max(inner, outer);
    std::uintmax_t iters = 200;
    auto root = boost::math::tools::toms748_solve([&](double y) { return slope(x, y); }, a, b,
                                                  boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (root.first + root.second);
  }

  static const GaussRule& panel_rule() {
    static const GaussRule rule = gauss_legendre(20);
    return rule;
  }

  Posterior posterior(double x, bool with_moments) const {
    const double y_star = mode(x);
    const double s2 = s_ * s_;
    auto g = [&](double y) {
      const double d = x - y;
      return -base_.potential(y) - d * d / (2.0 * s2);
    };
    const double g_star = g(y_star);
    const Interval sup = base_.support();
    const double a = std::max(sup.lo, y_star - 8.0 * s_);
    const double b = std::min(sup.hi, y_star + 8.0 * s_);
    // The posterior is (1/s^2)-strongly log-concave, so its width is at most
    // s: composite Gauss-Legendre on panels of width <= s, split at kinks.
    std::vector<double> cuts{a, b, y_star};
    for (double k : base_.kinks()) {
      if (k > a && k < b) cuts.push_back(k);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const GaussRule& rule = panel_rule();
    double i0 = 0.0, i1 = 0.0, i2 = 0.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double lo = cuts[c], hi = cuts[c + 1];
      const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / s_)));
      const double width = (hi - lo) / panels;
      for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * width;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
          const double y = mid + 0.5 * width * rule.nodes[q];
          const double w = 0.5 * width * rule.weights[q] * std::exp(g(y) - g_star);
          const double d = y - y_star;
          i0 += w;
          i1 += w * d;
          i2 += w * d * d;
        }
      }
    }
    if (!(i0 > 0.0) || !std::isfinite(i0)) {
      std::ostringstream os;
      os << "regularize: convolution quadrature failed at x = " << x << " on [" << a << ", " << b << "]";
      throw ConvergenceError(os.str());
    }
    Posterior post{g_star + std::log(i0), y_star, 0.0};
    if (with_moments) {
      const double m1 = i1 / i0;
      post.mean = y_star + m1;
      post.variance = std::max(0.0, i2 / i0 - m1 * m1);
    }
    return post;
  }

  LogConcaveMeasure1D base_;
  double s_;
  double damping_;
  double log_z_ = 0.0;
};

}  // namespace

LogConcaveMeasure1D regularize(const LogConcaveMeasure1D& m, int n, bool use_closed_form) {
  if (n < 1) throw DomainError("regularize: N must be a positive integer, got " + std::to_string(n));
  const std::string label = "regularize(" + m.name() + ", " + std::to_string(n) + ")";
  const double s2 = 1.0 / (static_cast<double>(n) * n);
  if (use_closed_form) {
    if (auto gp = m.potential_oracle().gaussian_parameters()) {
      const double conv_var = gp->second * gp->second + s2;
      const double precision = 1.0 / conv_var + 1.0 / n;
      const double mean = gp->first / conv_var / precision;
      auto out = make_catalog_measure("gaussian", {mean, std::sqrt(1.0 / precision)});
      return LogConcaveMeasure1D(label, out.support(),
                                 std::shared_ptr<const Potential1D>(out.potential_oracle_ptr()), {}, false);
    }
  }
  auto pot = std::make_shared<RegularizedPotential>(m, n);
  std::vector<double> cuts = pot->quadrature_hints();
  const double z = integrate([&](double x) { return std::exp(-pot->raw_value(x)); }, -std::numeric_limits<double>::infinity(),
                             std::numeric_limits<double>::infinity(), cuts);
  if (!(z > 0.0) || !std::isfinite(z)) throw ConvergenceError(label + ": normalization integral failed");
  pot->set_log_z(std::log(z));
  return LogConcaveMeasure1D(label, Interval{}, pot, {}, true);
}

RegularizationDiagnostics regularization_diagnostics(const LogConcaveMeasure1D& regularized, int n) {
  std::vector<double> cuts = regularized.potential_oracle().quadrature_hints();
  cuts.push_back(regularized.median());
  const double moment = integrate(
      [&](double x) {
        const double d = regularized.potential_d1(x);
        const double dens = regularized.density(x);
        return dens > 0.0 ? d * d * d * d * dens : 0.0;
      },
      regularized.support().lo, regularized.support().hi, cuts);
  return {1.0 / (static_cast<double>(n) * n), static_cast<double>(n), moment};
}

}  // namespace otspec
