#include "otspec/brenier.hpp"
#include "otspec/errors.hpp"

#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace otspec;

namespace {

Vec v1(double x) { return (Vec(1) << x).finished(); }

Mat sqrtm(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

TEST(Brenier1D, UniformToExponentialClosedForm) {
  // T(x) = -log(1 - x), Phi'' = 1 / (1 - x), Phi''' = 1 / (1 - x)^2.
  const Brenier1D b(parse_measure_spec("uniform(0, 1)"), parse_measure_spec("exponential(1)"));
  for (double x : {0.01, 0.2, 0.5, 0.9, 0.999}) {
    EXPECT_NEAR(b.transport(x), -std::log1p(-x), 1e-9 * (1.0 - std::log1p(-x)));
    EXPECT_NEAR(b.second_derivative(x), 1.0 / (1.0 - x), 1e-8 / (1.0 - x));
    EXPECT_NEAR(b.third_derivative(x), 1.0 / ((1.0 - x) * (1.0 - x)), 1e-7 / ((1.0 - x) * (1.0 - x)));
    EXPECT_NEAR(b.density_ratio(x), b.second_derivative(x), 1e-8 * b.second_derivative(x));
  }
}

TEST(Brenier1D, GaussianToGaussianIsAffine) {
  const Brenier1D b(parse_measure_spec("gaussian(0, 1)"), parse_measure_spec("gaussian(1, 3)"));
  for (double x : {-4.0, -1.0, 0.0, 2.5}) {
    EXPECT_NEAR(b.transport(x), 1.0 + 3.0 * x, 1e-8 * (1.0 + std::abs(x)));
    EXPECT_NEAR(b.second_derivative(x), 3.0, 1e-8);
    EXPECT_NEAR(b.third_derivative(x), 0.0, 1e-6);
  }
}

TEST(Brenier1D, PushforwardMatchesCdfs) {
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"gamma(2, 1)", "beta(2, 2)"}, {"laplace(0, 1)", "gaussian(0, 2)"}, {"beta(2, 3)", "subbotin(4)"}};
  for (const auto& [a, c] : pairs) {
    const Brenier1D b(parse_measure_spec(a), parse_measure_spec(c));
    for (double p : {0.01, 0.3, 0.5, 0.8, 0.99}) {
      const double x = b.source().quantile(p);
      EXPECT_NEAR(b.target().cdf(b.transport(x)), p, 1e-9) << a << " -> " << c;
    }
  }
}

TEST(Brenier1D, DerivativesMatchFiniteDifferences) {
  const Brenier1D b(parse_measure_spec("gamma(2, 1)"), parse_measure_spec("logistic(0, 1)"));
  for (double p : {0.1, 0.4, 0.7, 0.95}) {
    const double x = b.source().quantile(p);
    const double h = 1e-4 * std::max(1.0, x);
    const double fd2 = (b.transport(x + h) - b.transport(x - h)) / (2 * h);
    EXPECT_NEAR(b.second_derivative(x), fd2, 1e-6 * fd2);
    const double fd3 = (b.second_derivative(x + h) - b.second_derivative(x - h)) / (2 * h);
    EXPECT_NEAR(b.third_derivative(x), fd3, 1e-5 * (1.0 + std::abs(fd3)));
  }
}

TEST(Brenier1D, TransportResidualVanishes) {
  const Brenier1D b(parse_measure_spec("laplace(0, 1)"), parse_measure_spec("gaussian(0, 2)"));
  for (double x : {-3.0, -0.3, 0.4, 2.0}) EXPECT_NEAR(transport_residual(b, v1(x)), 0.0, 1e-9);
}

TEST(Brenier1D, OutsideClipIsRejected) {
  const Brenier1D b(parse_measure_spec("gaussian(0, 1)"), parse_measure_spec("logistic(0, 1)"));
  EXPECT_THROW((void)b.transport(40.0), DomainError);
}

TEST(Brenier1D, AtLevelIsConsistent) {
  const Brenier1D b(parse_measure_spec("uniform(0, 1)"), parse_measure_spec("exponential(1)"));
  // Upper tail: q = 1e-12 gives y = -log q without cancellation.
  const auto pt = b.at_level(1.0 - 1e-12, 1e-12);
  EXPECT_NEAR(pt.y, -std::log(1e-12), 1e-6);
  EXPECT_NEAR(pt.log_phi2, -std::log(1e-12), 1e-6);
}

TEST(GaussianLinearMap, PushesCovarianceForward) {
  Rng rng = make_stream(3, 0);
  for (int n : {2, 3, 5}) {
    const SpdMatrix c1 = random_spd(n, rng, 1.0), c2 = random_spd(n, rng, 1.0);
    const Vec m1 = Vec::Random(n), m2 = Vec::Random(n);
    const GaussianLinearMap t(GaussianMeasure(m1, c1), GaussianMeasure(m2, c2));
    const Mat& a = t.matrix().matrix();
    EXPECT_LE((a * c1.matrix() * a - c2.matrix()).norm(), 1e-9 * c2.matrix().norm());
    // Independent construction: C1^{-1/2} (C1^{1/2} C2 C1^{1/2})^{1/2} C1^{-1/2}.
    const Mat s1 = sqrtm(c1.matrix()), s1i = s1.inverse();
    const Mat oracle = s1i * sqrtm(s1 * c2.matrix() * s1) * s1i;
    EXPECT_LE((a - oracle).norm(), 1e-9 * oracle.norm());
    const Vec x = Vec::Random(n);
    EXPECT_LE((t.map(x) - (m2 + oracle * (x - m1))).norm(), 1e-9 * (1.0 + x.norm()));
    EXPECT_NEAR(transport_residual(t, x), 0.0, 1e-9);
  }
}

TEST(ProductMap, BlockDiagonalHessian) {
  std::vector<Brenier1D> f;
  f.emplace_back(parse_measure_spec("uniform(0, 1)"), parse_measure_spec("exponential(1)"));
  f.emplace_back(parse_measure_spec("gaussian(0, 1)"), parse_measure_spec("gaussian(1, 3)"));
  const ProductMap p(f);
  const Vec x = (Vec(2) << 0.5, 0.7).finished();
  const Mat h = p.hessian(x).matrix();
  EXPECT_NEAR(h(0, 0), 2.0, 1e-8);
  EXPECT_NEAR(h(1, 1), 3.0, 1e-8);
  EXPECT_EQ(h(0, 1), 0.0);
  EXPECT_NEAR(p.map(x)(0), std::log(2.0), 1e-9);
  EXPECT_NEAR(p.map(x)(1), 3.1, 1e-8);
  EXPECT_NEAR(transport_residual(p, x), 0.0, 1e-9);
}

TEST(RadialMap, UniformBallToGaussianProfile) {
  // Mass balance r^n = P(chi_n <= phi(r)): phi(r) = sqrt(2 P^{-1}(n/2, r^n)).
  for (int n : {2, 3, 5, 8}) {
    const RadialMap t(RadialMeasure::uniform_ball(n, 1.0), RadialMeasure::gaussian(n, 1.0));
    for (double r : {0.05, 0.3, 0.7, 0.95}) {
      const double oracle = std::sqrt(2.0 * boost::math::gamma_p_inv(n / 2.0, std::pow(r, n)));
      EXPECT_NEAR(t.profile(r), oracle, 1e-9 * (1.0 + oracle)) << "n=" << n << " r=" << r;
    }
  }
}

TEST(RadialMap, HessianEigenstructure) {
  const int n = 3;
  const RadialMap t(RadialMeasure::uniform_ball(n, 1.0), RadialMeasure::gaussian(n, 1.0));
  const Vec x = (Vec(3) << 0.2, -0.3, 0.4).finished();
  const double r = x.norm();
  const Vec e = x / r;
  const Mat h = t.hessian(x).matrix();
  EXPECT_NEAR(e.dot(h * e), t.profile_derivative(r), 1e-9);
  Vec perp = (Vec(3) << 0.3, 0.2, 0.0).finished();
  perp.normalize();
  EXPECT_NEAR(perp.dot(h * perp), t.profile(r) / r, 1e-9);
  EXPECT_NEAR(t.tangential_ratio(r), t.profile(r) / r, 1e-12);
  EXPECT_NEAR(transport_residual(t, x), 0.0, 1e-8);
  const double hh = 1e-6;
  EXPECT_NEAR(t.profile_derivative(r), (t.profile(r + hh) - t.profile(r - hh)) / (2 * hh), 1e-6);
}

TEST(RadialMap, PushforwardSecondMoment) {
  // Target N(0, I_n): E|T(X)|^2 = n.
  const int n = 5;
  const RadialMap t(RadialMeasure::uniform_ball(n, 1.0), RadialMeasure::gaussian(n, 1.0));
  Rng rng = make_stream(11, 0);
  const int m = 50000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double v = t.map(t.sample_source(rng)).squaredNorm();
    s += v;
    s2 += v * v;
  }
  const double mu = s / m, se = std::sqrt((s2 / m - mu * mu) / m);
  EXPECT_NEAR(mu, n, 5.0 * se);
}

TEST(TransportMap, SamplePairIsConsistent) {
  const auto b = brenier_1d(parse_measure_spec("beta(2, 3)"), parse_measure_spec("laplace(0, 1)"));
  Rng rng = make_stream(5, 0);
  for (int i = 0; i < 100; ++i) {
    const MapSample s = b->sample_pair(rng);
    EXPECT_NEAR(s.y(0), b->transport(s.x(0)), 1e-9 * (1.0 + std::abs(s.y(0))));
    EXPECT_NEAR(s.hessian.matrix()(0, 0), b->second_derivative(s.x(0)), 1e-8 * s.hessian.matrix()(0, 0));
  }
  const LogSpectrum ls = hessian_spectrum_at(*b, v1(0.3));
  EXPECT_NEAR(ls[0], b->log_second_derivative(0.3), 1e-12);
}
