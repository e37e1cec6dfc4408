#pragma once

#include <functional>
#include <span>
#include <vector>

namespace otspec {

using ScalarFn = std::function<double(double)>;

struct QuadratureOptions {
  double relative_tolerance = 1e-13;
  unsigned max_depth = 18;
};

// Integral of f over (a, b), either end possibly infinite. The range is split
// at every breakpoint strictly inside (a, b); finite pieces use adaptive
// Gauss-Kronrod, semi-infinite pieces the exp-sinh substitution.
double integrate(const ScalarFn& f, double a, double b, std::span<const double> breakpoints = {},
                 const QuadratureOptions& opts = {});

struct GaussRule {
  std::vector<double> nodes;    // in (-1, 1), ascending
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
GaussRule gauss_legendre(int n);

// A node of a rule in the probability (quantile) variable. Both p and its
// complement q = 1 - p are carried so that upper-tail quantiles can be taken
// from q without cancellation.
struct QuantileNode {
  double p;
  double q;
  double weight;
};

// Composite Gauss-Legendre rule on [clip, 1 - clip], with panels graded
// geometrically toward both endpoints (panels_per_side on each half). The
// weights sum to 1 - 2 clip.
std::vector<QuantileNode> graded_quantile_rule(int total_nodes, double clip = 1e-9,
                                               int panels_per_side = 16);

}  // namespace otspec
