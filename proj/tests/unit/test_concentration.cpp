#include "otspec/concentration.hpp"
#include "otspec/errors.hpp"
#include "otspec/quadrature.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace otspec;

namespace {

// One factor of a product map as a discrete law of Y = log Phi''(X):
// composite Gauss-Legendre in the quantile variable, with panels graded
// geometrically toward both ends.
struct DiscreteLaw {
  std::vector<double> y, w;
  // P(Y > t)
  [[nodiscard]] double upper(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] > t ? w[i] : 0.0;
    return s;
  }
};

DiscreteLaw factor_law(const Brenier1D& b) {
  std::vector<double> cuts = {0.5};
  for (double e = 0.1; e > 1e-10; e *= 0.1) {
    cuts.push_back(e);
    cuts.push_back(1.0 - e);
  }
  std::sort(cuts.begin(), cuts.end());
  const GaussRule gl = gauss_legendre(20);
  DiscreteLaw law;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c], bb = cuts[c + 1], half = 0.5 * (bb - a), mid = 0.5 * (a + bb);
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const double p = mid + half * gl.nodes[k];
      law.y.push_back(b.at_level(p, 1.0 - p).log_phi2);
      law.w.push_back(half * gl.weights[k]);
    }
  }
  return law;
}

// Variance of the k-th largest (k = 1..3) of three independent Y_i:
// E h(Y_(k)) = sum_i E[h(Y_i) P(exactly k-1 of the others exceed Y_i)].
std::vector<double> order_statistic_variances(const std::vector<DiscreteLaw>& laws) {
  std::vector<double> out;
  for (int k = 1; k <= 3; ++k) {
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      const DiscreteLaw& a = laws[(i + 1) % 3];
      const DiscreteLaw& c = laws[(i + 2) % 3];
      for (std::size_t m = 0; m < laws[i].y.size(); ++m) {
        const double y = laws[i].y[m];
        const double pa = a.upper(y), pc = c.upper(y);
        const double pk = k == 1 ? (1 - pa) * (1 - pc) : k == 2 ? pa * (1 - pc) + (1 - pa) * pc : pa * pc;
        m1 += laws[i].w[m] * pk * y;
        m2 += laws[i].w[m] * pk * y * y;
      }
    }
    out.push_back(m2 - m1 * m1);
  }
  return out;
}

std::vector<Brenier1D> product_factors() {
  return {Brenier1D(parse_measure_spec("gaussian(0, 1)"), parse_measure_spec("logistic(0, 1)")),
          Brenier1D(parse_measure_spec("uniform(0, 1)"), parse_measure_spec("exponential(1)")),
          Brenier1D(parse_measure_spec("beta(2, 2)"), parse_measure_spec("laplace(0, 1)"))};
}

}  // namespace

TEST(VarianceQuadrature, UniformToExponentialIsOne) {
  // log Phi'' = -log(1 - U), an Exp(1) variable: variance 1.
  const Brenier1D b(parse_measure_spec("uniform(0, 1)"), parse_measure_spec("exponential(1)"));
  const VarianceReport r = eigen_log_variance_quadrature_1d(b);
  ASSERT_EQ(r.variance.size(), 1u);
  EXPECT_NEAR(r.variance[0], 1.0, 1e-6);
  EXPECT_NEAR(r.margin[0], 3.0, 1e-6);
  EXPECT_LE(r.truncation_bound, 1e-6);
}

TEST(VarianceQuadrature, GaussianPairIsZero) {
  const Brenier1D b(parse_measure_spec("gaussian(0, 1)"), parse_measure_spec("gaussian(1, 3)"));
  EXPECT_NEAR(eigen_log_variance_quadrature_1d(b).variance[0], 0.0, 1e-12);
}

TEST(VarianceMc, GaussianLinearMapIsZero) {
  Rng rng = make_stream(1, 0);
  const GaussianLinearMap t(GaussianMeasure(Vec::Zero(4), random_spd(4, rng, 1.0)),
                            GaussianMeasure(Vec::Ones(4), random_spd(4, rng, 1.0)));
  const VarianceReport r = eigen_log_variance_mc(t, 2000, 5);
  for (double v : r.variance) EXPECT_NEAR(v, 0.0, 1e-20);
}

TEST(VarianceMc, ProductMatchesOrderStatisticOracle) {
  const auto factors = product_factors();
  std::vector<DiscreteLaw> laws;
  for (const auto& f : factors) laws.push_back(factor_law(f));
  const std::vector<double> oracle = order_statistic_variances(laws);
  const ProductMap p(factors);
  const VarianceReport r = eigen_log_variance_mc(p, 200000, 17);
  ASSERT_EQ(r.variance.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.variance[k], oracle[k], 4.0 * r.standard_error[k] + 1e-3) << "index " << k;
    EXPECT_LE(r.variance[k], 4.0);
  }
}

TEST(VarianceMc, QuadratureAgreesWithMcIn1D) {
  const Brenier1D b(parse_measure_spec("gamma(2, 1)"), parse_measure_spec("beta(2, 2)"));
  const double q = eigen_log_variance_quadrature_1d(b).variance[0];
  const VarianceReport mc = eigen_log_variance_mc(b, 100000, 3);
  EXPECT_NEAR(mc.variance[0], q, 4.0 * mc.standard_error[0]);
}

TEST(VarianceMc, DeterministicForSeed) {
  const Brenier1D b(parse_measure_spec("laplace(0, 1)"), parse_measure_spec("gaussian(0, 2)"));
  const VarianceReport a = eigen_log_variance_mc(b, 5000, 99), c = eigen_log_variance_mc(b, 5000, 99);
  EXPECT_EQ(a.variance, c.variance);
  EXPECT_EQ(a.standard_error, c.standard_error);
  EXPECT_NE(a.variance, eigen_log_variance_mc(b, 5000, 100).variance);
}

TEST(VarianceMc, RequiresEnoughSamples) {
  const Brenier1D b(parse_measure_spec("gaussian(0, 1)"), parse_measure_spec("logistic(0, 1)"));
  EXPECT_THROW(eigen_log_variance_mc(b, 500, 1), DomainError);
}

TEST(Poincare, ConstantFunctionHasZeroRatio) {
  const Brenier1D b(parse_measure_spec("uniform(0, 1)"), parse_measure_spec("exponential(1)"));
  const SpectralSampleSet s = collect_spectral_samples(b, 5000, 4);
  const RatioEstimate r = poincare_ratio(s, constant_function(2.0));
  EXPECT_EQ(r.ratio, 0.0);
  EXPECT_FALSE(r.violation_candidate);
}

TEST(Poincare, CoordinateRatioIsVarianceOverFour) {
  // f = Lambda_1 has |grad f| = 1, so the ratio is Var / 4.
  const Brenier1D b(parse_measure_spec("uniform(0, 1)"), parse_measure_spec("exponential(1)"));
  const SpectralSampleSet s = collect_spectral_samples(b, 20000, 4);
  const auto bank = lambda_function_bank(1);
  const RatioEstimate r = poincare_ratio(s, bank.front());
  EXPECT_NEAR(r.ratio, eigen_log_variance_mc(s).variance[0] / 4.0, 1e-12);
  EXPECT_NEAR(r.ratio, 0.25, 4.0 * r.standard_error);
}

TEST(PoincareProperty, BanksStayBelowOne) {
  const ProductMap p(product_factors());
  const SpectralSampleSet s = collect_spectral_samples(p, 20000, 8, {Vec::Unit(3, 0), Vec::Ones(3).normalized()});
  for (const auto& f : lambda_function_bank(3)) {
    const RatioEstimate r = poincare_ratio(s, f);
    EXPECT_LE(r.ratio, 1.0 + 3.0 * r.standard_error) << f.name;
  }
  for (int d = 0; d < 2; ++d) {
    for (const auto& f : quadform_function_bank()) {
      const RatioEstimate r = quadform_poincare(s, d, f);
      EXPECT_LE(r.ratio, 1.0 + 3.0 * r.standard_error) << f.name;
    }
  }
  for (const auto& f : theta_function_bank(3)) {
    const RatioEstimate r = theta_poincare(s, f);
    EXPECT_LE(r.ratio, 1.0 + 3.0 * r.standard_error) << f.name;
  }
}

TEST(LipschitzBank, GradientBoundsMatchFiniteDifferences) {
  const Vec x = (Vec(3) << 0.3, -1.2, 0.7).finished();
  for (const auto& f : lambda_function_bank(3)) {
    Vec g(3);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
      Vec e = Vec::Zero(3);
      e(i) = h;
      g(i) = (f.value(x + e) - f.value(x - e)) / (2 * h);
    }
    EXPECT_NEAR(g.squaredNorm(), f.grad_norm_sq(x), 1e-6) << f.name;
    EXPECT_LE(f.grad_norm_sq(x), f.lipschitz * f.lipschitz + 1e-12) << f.name;
  }
}

TEST(ExpConcentration, ConstantFunctionIsOne) {
  const Brenier1D b(parse_measure_spec("gaussian(0, 1)"), parse_measure_spec("logistic(0, 1)"));
  const SpectralSampleSet s = collect_spectral_samples(b, 2000, 2);
  EXPECT_DOUBLE_EQ(exp_concentration(s, constant_function(1.5), 0.1).value, 1.0);
}

TEST(ExpConcentration, BoundedByTwoAndMonotoneInC) {
  const Brenier1D b(parse_measure_spec("uniform(0, 1)"), parse_measure_spec("exponential(1)"));
  const SpectralSampleSet s = collect_spectral_samples(b, 50000, 12);
  const auto f = lambda_function_bank(1).front();
  const Estimate e = exp_concentration(s, f, 0.1);
  EXPECT_LE(e.value, 2.0 + 3.0 * e.standard_error);
  EXPECT_GT(e.standard_error, 0.0);
  const auto sweep = exp_concentration_sweep(s, f, default_c_grid());
  ASSERT_EQ(sweep.size(), 10u);
  for (std::size_t i = 1; i < sweep.size(); ++i) EXPECT_GE(sweep[i].value, sweep[i - 1].value);
  for (const auto& v : sweep) EXPECT_EQ(v.standard_error, 0.0);
}

TEST(ExpConcentration, RejectsNonPositiveC) {
  const Brenier1D b(parse_measure_spec("gaussian(0, 1)"), parse_measure_spec("logistic(0, 1)"));
  const SpectralSampleSet s = collect_spectral_samples(b, 2000, 2);
  EXPECT_THROW(exp_concentration(s, lambda_function_bank(1).front(), 0.0), DomainError);
}

TEST(CGrid, Values) {
  const auto g = default_c_grid();
  ASSERT_EQ(g.size(), 10u);
  EXPECT_DOUBLE_EQ(g.front(), 0.05);
  EXPECT_NEAR(g.back(), 0.5, 1e-15);
}
