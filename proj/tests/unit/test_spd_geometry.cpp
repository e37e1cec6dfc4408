#include "otspec/errors.hpp"
#include "otspec/random.hpp"
#include "otspec/spd_geometry.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

using namespace otspec;

namespace {

// Independent route to the distance: generalized eigenvalues of (B, A) are the
// eigenvalues of A^{-1} B.
double distance_oracle(const Mat& a, const Mat& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(b, a);
  return std::sqrt(ges.eigenvalues().array().log().square().sum());
}

Mat sym_random(int n, Rng& rng) {
  std::normal_distribution<double> g;
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  return 0.5 * (m + m.transpose());
}

}  // namespace

TEST(MatrixFunction, IdentityFunctionReturnsInput) {
  Rng rng = make_stream(1, 0);
  const SpdMatrix a = random_spd(4, rng);
  const SymMatrix f = matrix_function(a, [](double t) { return t; });
  EXPECT_LE((f.matrix() - a.matrix()).norm(), 1e-12 * a.matrix().norm());
}

TEST(MatrixFunction, LogOfDiagonal) {
  const SpdMatrix a = SpdMatrix::diagonal((Vec(2) << std::numbers::e, std::exp(2.0)).finished());
  const Mat l = matrix_function(a, [](double t) { return std::log(t); }).matrix();
  EXPECT_NEAR(l(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(l(1, 1), 2.0, 1e-14);
  EXPECT_NEAR(l(0, 1), 0.0, 1e-14);
}

TEST(MatrixFunction, SquareRootSquaredReproducesInput) {
  Rng rng = make_stream(2, 0);
  for (int n = 2; n <= 8; ++n) {
    const SpdMatrix a = random_spd(n, rng);
    const Mat s = matrix_function(a, [](double t) { return std::sqrt(t); }).matrix();
    EXPECT_LE((s * s - a.matrix()).norm(), 1e-10 * a.matrix().norm()) << "n = " << n;
  }
}

TEST(MatrixFunction, NonFiniteValueIsRejected) {
  const SpdMatrix a = SpdMatrix::diagonal((Vec(2) << 1.0, 2.0).finished());
  EXPECT_THROW(matrix_function(a, [](double t) { return std::log(t - 1.0); }), DomainError);
}

TEST(SpdMatrix, RejectsIndefiniteAndSymmetrizes) {
  Mat m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(SpdMatrix{m}, DomainError);
  Mat s(2, 2);
  s << 2.0, 1.0 + 1e-14, 1.0, 3.0;
  const SpdMatrix a(s);
  EXPECT_EQ(a.matrix()(0, 1), a.matrix()(1, 0));
}

TEST(SpdMatrix, SpectralReconstructionAndOrdering) {
  Rng rng = make_stream(3, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const SpdMatrix a = random_spd(2 + trial % 7, rng);
    const Mat& v = a.eigenvectors();
    const Mat rebuilt = v * a.eigenvalues().asDiagonal() * v.transpose();
    EXPECT_LE((rebuilt - a.matrix()).norm(), 1e-10 * a.matrix().norm());
    for (int i = 1; i < a.dim(); ++i) EXPECT_GE(a.eigenvalues()(i - 1), a.eigenvalues()(i));
  }
}

TEST(SpdDistance, TrivialValues) {
  EXPECT_EQ(spd_distance(SpdMatrix::identity(3), SpdMatrix::identity(3)), 0.0);
  const SpdMatrix b = SpdMatrix::diagonal((Vec(2) << std::exp(2.0), std::exp(-1.0)).finished());
  EXPECT_NEAR(spd_distance(SpdMatrix::identity(2), b), std::sqrt(5.0), 1e-14);
}

TEST(SpdDistance, DimensionMismatchThrows) {
  EXPECT_THROW(spd_distance(SpdMatrix::identity(2), SpdMatrix::identity(3)), DimensionMismatch);
}

TEST(SpdDistance, MatchesGeneralizedEigenvalueOracle) {
  Rng rng = make_stream(4, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 7;
    const SpdMatrix a = random_spd(n, rng), b = random_spd(n, rng);
    EXPECT_NEAR(spd_distance(a, b), distance_oracle(a.matrix(), b.matrix()), 1e-9);
  }
}

TEST(SpdDistanceProperty, MetricAxiomsAndInvariances) {
  Rng rng = make_stream(5, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 7;
    const SpdMatrix a = random_spd(n, rng), b = random_spd(n, rng), c = random_spd(n, rng);
    const double d = spd_distance(a, b);
    EXPECT_NEAR(d, spd_distance(b, a), 1e-9);
    EXPECT_GE(d + spd_distance(b, c) - spd_distance(a, c), -1e-9);
    const Mat t = random_invertible(n, rng, 10.0);
    const SpdMatrix ta(t * a.matrix() * t.transpose()), tb(t * b.matrix() * t.transpose());
    EXPECT_NEAR(spd_distance(ta, tb), d, 1e-9);
    EXPECT_NEAR(spd_distance(a.inverse(), b.inverse()), d, 1e-9);
  }
}

TEST(Geodesic, EndpointsAndConstantSpeed) {
  Rng rng = make_stream(6, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 7;
    const SpdMatrix a = random_spd(n, rng), b = random_spd(n, rng);
    const double d = spd_distance(a, b);
    EXPECT_LE((geodesic_point(a, b, 0.0).matrix() - a.matrix()).norm(), 1e-9 * a.matrix().norm());
    EXPECT_LE((geodesic_point(a, b, 1.0).matrix() - b.matrix()).norm(), 1e-9 * b.matrix().norm());
    for (double s : {0.25, 0.5, 0.8}) {
      const SpdMatrix g = geodesic_point(a, b, s);
      EXPECT_NEAR(spd_distance(a, g), s * d, 1e-9);
      EXPECT_NEAR(spd_distance(g, b), (1.0 - s) * d, 1e-9);
    }
  }
}

TEST(Geodesic, SampledLengthEqualsDistance) {
  Rng rng = make_stream(7, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 7;
    const SpdMatrix a = random_spd(n, rng), b = random_spd(n, rng);
    std::vector<SpdMatrix> curve;
    for (int k = 0; k < 1000; ++k) curve.push_back(geodesic_point(a, b, k / 999.0));
    EXPECT_NEAR(curve_length(curve), spd_distance(a, b), 1e-4);
  }
}

TEST(Geodesic, NonGeodesicCurveIsLonger) {
  Rng rng = make_stream(8, 0);
  const SpdMatrix a = random_spd(3, rng), b = random_spd(3, rng);
  std::vector<SpdMatrix> straight;
  for (int k = 0; k < 400; ++k) {
    const double s = k / 399.0;
    straight.emplace_back((1.0 - s) * a.matrix() + s * b.matrix());
  }
  EXPECT_GE(curve_length(straight), spd_distance(a, b) - 1e-9);
}

TEST(ExpMap, DistanceEqualsLocalNorm) {
  Rng rng = make_stream(9, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    const SpdMatrix a = random_spd(n, rng);
    const SymMatrix t(0.3 * sym_random(n, rng));
    EXPECT_NEAR(spd_distance(a, exp_map(a, t)), local_norm(a, t), 1e-9 * (1.0 + local_norm(a, t)));
    EXPECT_NEAR(local_norm(a, t), local_norm_trace_form(a, t), 1e-10);
  }
}

TEST(LocalNorm, InfinitesimalDistance) {
  // lim dist^2(A + eps B, A) / eps^2 = ||A^{-1/2} B A^{-1/2}||^2.
  Rng rng = make_stream(10, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    const SpdMatrix a = random_spd(n, rng);
    const Mat b = sym_random(n, rng);
    const double eps = 1e-6;
    const double ratio = spd_distance(SpdMatrix(a.matrix() + eps * b), a) / eps;
    EXPECT_NEAR(ratio, local_norm(a, SymMatrix(b)), 1e-4 * (1.0 + ratio));
  }
}

TEST(LogEigenMap, SortedAndOneLipschitz) {
  Rng rng = make_stream(11, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 7;
    const SpdMatrix a = random_spd(n, rng), b = random_spd(n, rng);
    const Vec la = log_eigen_map(a).values(), lb = log_eigen_map(b).values();
    for (int i = 1; i < n; ++i) EXPECT_GE(la(i - 1), la(i));
    const double d = spd_distance(a, b);
    EXPECT_GE(d - (la - lb).norm(), -1e-9);
    EXPECT_GE(d * d - (la - lb).squaredNorm(), -1e-9);
  }
}

TEST(LogEigenMap, DifferentialMatchesFiniteDifferences) {
  Rng rng = make_stream(12, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    const SpdMatrix a = random_spd(n, rng);
    const Mat b = sym_random(n, rng);
    const double h = 1e-6;
    const Vec fd = (log_eigen_map(SpdMatrix(a.matrix() + h * b)).values() -
                    log_eigen_map(SpdMatrix(a.matrix() - h * b)).values()) / (2.0 * h);
    const Vec an = log_spectrum_differential(a, SymMatrix(b));
    EXPECT_LE((fd - an).norm(), 1e-5 * (1.0 + an.norm()));
    EXPECT_LE(an.norm(), local_norm(a, SymMatrix(b)) + 1e-12);
  }
}

TEST(LogQuadraticForm, OneLipschitz) {
  Rng rng = make_stream(13, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 7;
    const SpdMatrix a = random_spd(n, rng), b = random_spd(n, rng);
    const Vec v = random_unit_vector(n, rng);
    EXPECT_GE(spd_distance(a, b) - std::abs(log_quadratic_form(a, v) - log_quadratic_form(b, v)), -1e-9);
  }
}

TEST(LogQuadraticForm, ZeroVectorRejected) {
  EXPECT_THROW(log_quadratic_form(SpdMatrix::identity(2), Vec::Zero(2)), DomainError);
}

TEST(VolumeRatio, MatchesSingularValues) {
  Rng rng = make_stream(14, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    const Mat t = random_invertible(n, rng, 100.0);
    const Vec s = Eigen::JacobiSVD<Mat>(t).singularValues();
    double prod = 1.0;
    for (int k = 1; k <= n; ++k) {
      prod *= s(k - 1);
      EXPECT_NEAR(volume_ratio(t, k), prod, 1e-10 * prod);
    }
  }
}

TEST(Majorization, PartialSumsAndConvexOrder) {
  Rng rng = make_stream(15, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 7;
    const SpdMatrix a = random_spd(n, rng), b = random_spd(n, rng);
    const MajorizationReport r = majorization_check(a, b);
    EXPECT_TRUE(r.holds(1e-9)) << "min margin " << r.min_margin();
    // Full sums are equal: log det is additive.
    EXPECT_NEAR(r.partial_sum_margins(n - 1), 0.0, 1e-9);
    EXPECT_GE(weyl_polya_margin(r, [](double t) { return std::exp(t); }), -1e-9 * std::exp(r.gamma.maxCoeff()) * n);
  }
}

TEST(UpperGradient, DistanceFunctionIsOneLipschitz) {
  std::mt19937_64 rng(16);
  Rng gen = make_stream(16, 0);
  const SpdMatrix id = SpdMatrix::identity(3);
  const SpdMatrix a = random_spd(3, gen);
  const SpdFunctional f = [&](const SpdMatrix& m) { return spd_distance(m, id); };
  const double g = numeric_upper_gradient(f, a, 1e-3, 200, rng);
  EXPECT_LE(g, 1.0 + 1e-6);
  EXPECT_GE(g, 0.9);
}
