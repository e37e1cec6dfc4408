#include "otspec/quadrature.hpp"

#include "otspec/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace otspec {

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 31>;

struct Panel {
  double estimate;
  double error;  // |Kronrod - Gauss|
  double l1;
};

// Non-adaptive 15/31-point Gauss-Kronrod pair on [a, b].
Panel kronrod_panel(const ScalarFn& f, double a, double b) {
  const auto& x = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = boost::math::quadrature::gauss<double, 15>::weights();
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double f0 = f(c);
  double k = wk[0] * f0;
  double g = wg[0] * f0;
  double l1 = wk[0] * std::abs(f0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fp = f(c + h * x[i]);
    const double fm = f(c - h * x[i]);
    k += wk[i] * (fp + fm);
    l1 += wk[i] * (std::abs(fp) + std::abs(fm));
    if (i % 2 == 0) g += wg[i / 2] * (fp + fm);
  }
  return {h * k, std::abs(h * (k - g)), std::abs(h) * l1};
}

// Bisection until the local error estimate drops below abs_tol (halved at
// each level) or reaches the rounding floor of the panel.
double adaptive_panel(const ScalarFn& f, double a, double b, double abs_tol, unsigned depth) {
  const Panel p = kronrod_panel(f, a, b);
  const double floor = 50.0 * std::numeric_limits<double>::epsilon() * p.l1;
  if (depth == 0 || p.error <= std::max(abs_tol, floor)) return p.estimate;
  const double mid = 0.5 * (a + b);
  return adaptive_panel(f, a, mid, 0.5 * abs_tol, depth - 1) + adaptive_panel(f, mid, b, 0.5 * abs_tol, depth - 1);
}

double integrate_piece(const ScalarFn& f, double a, double b, const QuadratureOptions& opts) {
  if (a == b) return 0.0;
  double error = 0.0;
  if (std::isfinite(a) && std::isfinite(b)) {
    // The tolerance is relative to the L1 norm rather than to the value, so
    // sign-changing integrands with near-zero integrals terminate.
    const Panel coarse = kronrod_panel(f, a, b);
    const double abs_tol = opts.relative_tolerance * std::max(std::abs(coarse.estimate), coarse.l1);
    if (coarse.error <= abs_tol || abs_tol == 0.0) return coarse.estimate;
    return adaptive_panel(f, a, b, abs_tol, opts.max_depth);
  }
  if (!std::isfinite(a) && !std::isfinite(b)) {
    throw DomainError("integrate: doubly infinite piece must be split at a breakpoint");
  }
  static thread_local boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(f, a, b, opts.relative_tolerance, &error);
}

}  // namespace

double integrate(const ScalarFn& f, double a, double b, std::span<const double> breakpoints,
                 const QuadratureOptions& opts) {
  if (!(a < b)) {
    if (a == b) return 0.0;
    return -integrate(f, b, a, breakpoints, opts);
  }
  std::vector<double> cuts{a};
  for (double c : breakpoints) {
    if (c > a && c < b) cuts.push_back(c);
  }
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  if (!std::isfinite(a) && !std::isfinite(b) && cuts.size() == 1) cuts.push_back(0.0);
  cuts.push_back(b);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += integrate_piece(f, cuts[i], cuts[i + 1], opts);
  return total;
}

GaussRule gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre: n must be positive");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

std::vector<QuantileNode> graded_quantile_rule(int total_nodes, double clip, int panels_per_side) {
  if (!(clip > 0.0 && clip < 0.5)) throw DomainError("graded_quantile_rule: clip must lie in (0, 1/2)");
  if (panels_per_side < 1) throw DomainError("graded_quantile_rule: panels_per_side must be positive");
  const int per_panel = std::max(2, (total_nodes + 2 * panels_per_side - 1) / (2 * panels_per_side));
  const GaussRule gl = gauss_legendre(per_panel);

  // Breakpoints in the tail probability t in [clip, 1/2].
  std::vector<double> t(panels_per_side + 1);
  for (int k = 0; k <= panels_per_side; ++k) {
    t[k] = 0.5 * std::pow(2.0 * clip, static_cast<double>(k) / panels_per_side);
  }
  t[panels_per_side] = clip;

  std::vector<QuantileNode> lower;
  std::vector<QuantileNode> upper;
  for (int k = panels_per_side - 1; k >= 0; --k) {
    const double lo = t[k + 1];
    const double hi = t[k];
    const double mid = 0.5 * (lo + hi);
    const double rad = 0.5 * (hi - lo);
    for (int j = 0; j < per_panel; ++j) {
      const double tail = mid + rad * gl.nodes[j];
      const double w = rad * gl.weights[j];
      lower.push_back({tail, 1.0 - tail, w});
      upper.push_back({1.0 - tail, tail, w});
    }
  }
  std::vector<QuantileNode> out(lower.begin(), lower.end());
  out.insert(out.end(), upper.rbegin(), upper.rend());
  return out;
}

}  // namespace otspec
