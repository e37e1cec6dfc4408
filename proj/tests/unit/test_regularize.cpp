#include "otspec/concentration.hpp"
#include "otspec/errors.hpp"
#include "otspec/measures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace otspec;

namespace {

// N(m, s^2) convolved with N(0, 1/N^2), times the N(0, N) damping density:
// the result is Gaussian with precision 1/(s^2 + 1/N^2) + 1/N.
struct GaussOracle {
  double mean;
  double var;
};

GaussOracle regularized_gaussian(double m, double s, int n) {
  const double v = s * s + 1.0 / (double(n) * n);
  const double prec = 1.0 / v + 1.0 / n;
  return {(m / v) / prec, 1.0 / prec};
}

}  // namespace

TEST(Regularize, GaussianQuadraturePathMatchesClosedForm) {
  for (int n : {5, 10, 40}) {
    const LogConcaveMeasure1D base = parse_measure_spec("gaussian(1, 2)");
    const GaussOracle o = regularized_gaussian(1.0, 2.0, n);
    const LogConcaveMeasure1D quad = regularize(base, n, false);
    const LogConcaveMeasure1D closed = regularize(base, n, true);
    for (double x : {-3.0, 0.0, 0.8, 4.0}) {
      const double v = 0.5 * (x - o.mean) * (x - o.mean) / o.var + 0.5 * std::log(2 * std::numbers::pi * o.var);
      EXPECT_NEAR(quad.potential(x), v, 1e-8) << "N=" << n << " x=" << x;
      EXPECT_NEAR(closed.potential(x), v, 1e-10);
      EXPECT_NEAR(quad.potential_d1(x), (x - o.mean) / o.var, 1e-8);
      EXPECT_NEAR(*quad.potential_d2(x), 1.0 / o.var, 1e-7);
    }
  }
}

TEST(Regularize, NormalizedAndSmooth) {
  for (const char* spec : {"uniform(0, 1)", "laplace(0, 1)", "exponential(1)", "beta(2, 3)"}) {
    const LogConcaveMeasure1D r = regularize(parse_measure_spec(spec), 10);
    EXPECT_TRUE(r.has_potential_d2()) << spec;
    EXPECT_NEAR(r.total_mass_by_quadrature(), 1.0, 1e-8) << spec;
    EXPECT_TRUE(std::isinf(r.support().lo) && std::isinf(r.support().hi)) << spec;
  }
}

TEST(RegularizeProperty, DampingAddsCurvature) {
  // V_N'' >= 1/N everywhere.
  for (const char* spec : {"uniform(0, 1)", "laplace(0, 1)", "exponential(1)", "gamma(2, 1)"}) {
    for (int n : {5, 20}) {
      const LogConcaveMeasure1D r = regularize(parse_measure_spec(spec), n);
      for (double x = -5.0; x <= 5.0; x += 0.37) {
        EXPECT_GE(*r.potential_d2(x), 1.0 / n - 1e-9) << spec << " N=" << n << " x=" << x;
      }
    }
  }
}

TEST(Regularize, DerivativesMatchFiniteDifferences) {
  const LogConcaveMeasure1D r = regularize(parse_measure_spec("laplace(0, 1)"), 10);
  for (double x : {-1.0, -0.05, 0.0, 0.3, 2.0}) {
    const double h = 1e-5;
    EXPECT_NEAR(r.potential_d1(x), (r.potential(x + h) - r.potential(x - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(*r.potential_d2(x), (r.potential_d1(x + h) - r.potential_d1(x - h)) / (2 * h), 1e-5);
  }
}

TEST(Regularize, ConvergesToBase) {
  // The regularized CDF approaches the base CDF as N grows.
  const LogConcaveMeasure1D base = parse_measure_spec("exponential(1)");
  double prev = 1.0;
  for (int n : {5, 10, 20, 40}) {
    const LogConcaveMeasure1D r = regularize(base, n);
    double err = 0.0;
    for (double x : {0.5, 1.0, 2.0}) err = std::max(err, std::abs(r.cdf(x) - base.cdf(x)));
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(Regularize, RejectsBadN) {
  EXPECT_THROW(regularize(parse_measure_spec("gaussian(0, 1)"), 0), DomainError);
  EXPECT_THROW(regularize(parse_measure_spec("gaussian(0, 1)"), -3), DomainError);
}

TEST(Regularize, SpecStringForm) {
  const LogConcaveMeasure1D a = parse_measure_spec("regularize(uniform(0, 1), 10)");
  const LogConcaveMeasure1D b = regularize(parse_measure_spec("uniform(0, 1)"), 10);
  for (double x : {-0.2, 0.5, 1.1}) EXPECT_NEAR(a.potential(x), b.potential(x), 1e-12);
}

TEST(Regularize, Diagnostics) {
  const int n = 10;
  const RegularizationDiagnostics d = regularization_diagnostics(regularize(parse_measure_spec("uniform(0, 1)"), n), n);
  EXPECT_DOUBLE_EQ(d.convolution_variance, 1.0 / (n * n));
  EXPECT_DOUBLE_EQ(d.damping_variance, double(n));
  EXPECT_TRUE(std::isfinite(d.gradient_fourth_moment));
  EXPECT_GT(d.gradient_fourth_moment, 0.0);
}

TEST(CaffarelliFloor, GaussianPairIsConstant) {
  const int n = 10;
  const GaussOracle a = regularized_gaussian(0.0, 1.0, n), b = regularized_gaussian(1.0, 3.0, n);
  const FloorCheck f = caffarelli_floor_check(parse_measure_spec("gaussian(0, 1)"), parse_measure_spec("gaussian(1, 3)"), n);
  EXPECT_NEAR(f.min_phi2, std::sqrt(b.var / a.var), 1e-8);
  EXPECT_DOUBLE_EQ(f.floor, 1.0 / (n * n));
  EXPECT_GT(f.margin, 0.0);
  EXPECT_EQ(f.levels, 100);
}

TEST(CaffarelliFloor, NonSmoothPairsClearTheFloor) {
  for (const auto& [a, b] : std::vector<std::pair<const char*, const char*>>{
           {"uniform(0, 1)", "exponential(1)"}, {"laplace(0, 1)", "uniform(-1, 1)"}}) {
    const FloorCheck f = caffarelli_floor_check(parse_measure_spec(a), parse_measure_spec(b), 10);
    EXPECT_GE(f.margin, 0.0) << a << " -> " << b;
    EXPECT_NEAR(f.margin, f.min_phi2 - f.floor, 1e-15);
  }
}
