#include "otspec/errors.hpp"
#include "otspec/gamma2.hpp"
#include "otspec/triples.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace otspec;

namespace {

Mat m2(double a, double b, double c) { return (Mat(2, 2) << a, b, b, c).finished(); }

std::shared_ptr<SyntheticTriple> synthetic(int n, std::uint64_t seed, double strength) {
  SyntheticTripleParams p;
  p.dim = n;
  p.seed = seed;
  p.strength = strength;
  return std::make_shared<SyntheticTriple>(p);
}

std::vector<SmoothTriplePtr> small_suite() {
  std::vector<SmoothTriplePtr> out;
  out.push_back(one_dim_triple("gamma(2, 1)", "logistic(0, 1)"));
  out.push_back(one_dim_triple("gaussian(0, 1)", "subbotin(4)"));
  out.push_back(std::make_shared<GaussianTriple>(GaussianMeasure(Vec::Zero(2), SpdMatrix(m2(1.0, 0.3, 0.8))),
                                                 GaussianMeasure(Vec::Ones(2), SpdMatrix(m2(2.0, -0.4, 0.5)))));
  out.push_back(synthetic(2, 3, 0.3));
  out.push_back(synthetic(3, 4, 0.6));
  return out;
}

}  // namespace

TEST(Gamma2, OrnsteinUhlenbeckReduction) {
  // mu = nu = N(0, I): Phi = |x|^2/2, L u = Lap u - x . grad u and
  // Gamma_2(u) = ||D^2 u||^2 + |grad u|^2.
  const GaussianTriple t(GaussianMeasure(Vec::Zero(3), SpdMatrix::identity(3)),
                         GaussianMeasure(Vec::Zero(3), SpdMatrix::identity(3)));
  Rng rng = make_stream(1, 0);
  for (const auto& u : test_function_bank(3, 7, 4)) {
    for (int k = 0; k < 10; ++k) {
      const Vec x = t.random_point(rng);
      const UJet uj = u->jet(x);
      EXPECT_NEAR(operator_L(t, *u, x), uj.d2.trace() - x.dot(uj.d1), 1e-10);
      const double oracle = uj.d2.squaredNorm() + uj.d1.squaredNorm();
      EXPECT_NEAR(gamma2_expanded(t, *u, x), oracle, 1e-10 * (1.0 + oracle));
      EXPECT_NEAR(gamma2_lower_bound(t, *u, x), 0.0, 1e-14);
    }
  }
}

TEST(Gamma2, GaussianPairClosedForm) {
  // Quadratic Phi with Hessian A: Gamma_2(u) = Tr((A^{-1} D^2u)^2) + grad u^T A^{-1} C1^{-1} A^{-1} grad u,
  // since Ric = (C1^{-1} + A C2^{-1} A) / 2 = C1^{-1}.
  const Mat c1 = m2(1.0, 0.3, 0.8), c2 = m2(2.0, -0.4, 0.5);
  const GaussianMeasure mu(Vec::Zero(2), SpdMatrix(c1)), nu((Vec(2) << 1.0, -1.0).finished(), SpdMatrix(c2));
  const GaussianTriple t(mu, nu);
  const Mat a = GaussianLinearMap(mu, nu).matrix().matrix();
  const Mat ai = a.inverse(), c1i = c1.inverse();
  Rng rng = make_stream(2, 0);
  for (const auto& u : test_function_bank(2, 8, 4)) {
    for (int k = 0; k < 10; ++k) {
      const Vec x = t.random_point(rng);
      const UJet uj = u->jet(x);
      const Mat m = ai * uj.d2;
      const double oracle = (m * m).trace() + uj.d1.dot(ai * c1i * ai * uj.d1);
      EXPECT_NEAR(gamma2_expanded(t, *u, x), oracle, 1e-9 * (1.0 + std::abs(oracle)));
      const TripleJet j = t.jet(x);
      const ContractedTensors ct = contracted_tensors(j);
      EXPECT_LE((ricci_tensor(j, ct) - c1i).norm(), 1e-9);
    }
  }
}

TEST(Gamma2, OneDimensionalLowerBoundAndPullback) {
  // n = 1: lower bound (1/4) (Phi'''/Phi''^2)^2 u'^2, pullback metric (Phi'''/Phi'')^2.
  const auto t = one_dim_triple("gamma(2, 1)", "logistic(0, 1)");
  const Brenier1D& b = t->map();
  const auto u = linear_test_function((Vec(1) << 1.3).finished());
  for (double p : {0.1, 0.4, 0.8}) {
    const double x = b.source().quantile(p);
    const Vec xv = (Vec(1) << x).finished();
    const double p2 = b.second_derivative(x), p3 = b.third_derivative(x);
    EXPECT_NEAR(gamma2_lower_bound(*t, *u, xv), 0.25 * std::pow(p3 / (p2 * p2), 2) * 1.69, 1e-8);
    const TripleJet j = t->jet(xv);
    const PullbackMetric g = pullback_metric(j, contracted_tensors(j));
    EXPECT_NEAR(g.contracted(0, 0), std::pow(p3 / p2, 2), 1e-8 * (1.0 + std::pow(p3 / p2, 2)));
  }
}

TEST(Gamma2Property, IdentitiesHoldAcrossTriples) {
  Rng rng = make_stream(3, 0);
  for (const auto& t : small_suite()) {
    const int n = t->dim();
    for (const auto& u : test_function_bank(n, 11, 4)) {
      for (int k = 0; k < 10; ++k) {
        const Vec x = t->random_point(rng);
        const TripleJet j = t->jet(x);
        const ContractedTensors ct = contracted_tensors(j);
        const UJet uj = u->jet(x);
        const double g2 = gamma2_expanded(j, ct, uj);
        const double scale = 1.0 + std::abs(g2);
        EXPECT_LE(transport_identity_residual(j, ct).norm(), 1e-8) << t->name();
        EXPECT_LE(generator_on_gradient_residual(j, ct).norm(), 1e-8) << t->name();
        EXPECT_NEAR(bochner_residual(j, ct, uj), 0.0, 1e-8 * scale) << t->name();
        const LForms lf = operator_L_forms(j, ct, uj);
        EXPECT_NEAR(lf.w_form, lf.v_form, 1e-8 * (1.0 + std::abs(lf.w_form))) << t->name();
        const BMatrixCertificate bc = bmatrix_certificate(j, ct, uj);
        EXPECT_NEAR(bc.trace_b2, bc.congruence_trace, 1e-8 * (1.0 + std::abs(bc.trace_b2))) << t->name();
        EXPECT_LE(bc.asymmetry, 1e-10) << t->name();
        const PullbackMetric g = pullback_metric(j, ct);
        EXPECT_LE((g.contracted - g.trace_form).norm(), 1e-8 * (1.0 + g.contracted.norm())) << t->name();
        EXPECT_NEAR(g2, gamma2_direct(*t, *u, x), 1e-4 * scale) << t->name();
        if (t->potentials_convex()) {
          EXPECT_GE(g2 - gamma2_lower_bound(j, ct, uj), -1e-8 * scale) << t->name();
          EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat>(ricci_tensor(j, ct)).eigenvalues().minCoeff(), -1e-10);
        }
      }
    }
  }
}

TEST(Gamma2, PullbackMatchesSpdDistance) {
  // dist(D^2 Phi(x + h e), D^2 Phi(x)) / h -> sqrt(e^T g e).
  const auto t = synthetic(2, 5, 0.6);
  const Vec x = (Vec(2) << 0.2, -0.3).finished();
  const Vec e = (Vec(2) << 0.6, 0.8).finished();
  const TripleJet j = t->jet(x);
  const PullbackMetric g = pullback_metric(j, contracted_tensors(j));
  const double h = 1e-6;
  const double d = spd_distance(SpdMatrix(t->jet(x + h * e).phi2), SpdMatrix(j.phi2)) / h;
  EXPECT_NEAR(d, std::sqrt(e.dot(g.contracted * e)), 1e-5);
}

TEST(Gamma2, PartialDerivativeIdentity) {
  Rng rng = make_stream(6, 0);
  for (const auto& t : small_suite()) {
    for (int k = 0; k < t->dim(); ++k) {
      const Vec x = t->random_point(rng);
      const PhiPartial u(t, k);
      const double direct = gamma2_expanded(*t, u, x);
      EXPECT_NEAR(gamma2_of_partial_via_identity(*t, k, x), direct, 1e-6 * (1.0 + std::abs(direct))) << t->name();
    }
  }
}

TEST(Gamma2, IntegrationByParts) {
  for (const auto& t : small_suite()) {
    const auto bank = test_function_bank(t->dim(), 13, 3);
    const auto [defect, scale] = integration_by_parts_defect(*t, *bank[2], t->dim() == 3 ? 16 : 24);
    EXPECT_LE(std::abs(defect), 1e-6 * (1.0 + scale)) << t->name();
  }
}

TEST(Gamma2, ThirdDerivativeTensorIsSymmetric) {
  const auto t = synthetic(3, 9, 0.9);
  Rng rng = make_stream(7, 0);
  EXPECT_LE(t->jet(t->random_point(rng)).phi3.symmetry_defect(), 1e-12);
}

TEST(Gamma2, IllConditionedHessianIsRejected) {
  TripleJet j;
  j.x = Vec::Zero(2);
  j.t = Vec::Zero(2);
  j.phi2 = m2(1.0, 0.0, 1e-13);
  j.phi3 = Tensor3(2);
  j.v1 = j.w1 = Vec::Zero(2);
  j.v2 = j.w2 = Mat::Identity(2, 2);
  EXPECT_THROW(contracted_tensors(j), DomainError);
}

TEST(TripleSuite, HasAtLeastTwentyMembers) {
  const auto suite = standard_triple_suite(1);
  EXPECT_GE(suite.size(), 20u);
  bool has1 = false, has2 = false, has3 = false;
  for (const auto& t : suite) {
    has1 |= t->dim() == 1;
    has2 |= t->dim() == 2;
    has3 |= t->dim() == 3;
  }
  EXPECT_TRUE(has1 && has2 && has3);
}

TEST(TestFunctions, JetsMatchFiniteDifferences) {
  Rng rng = make_stream(8, 0);
  for (const auto& u : test_function_bank(3, 21, 4)) {
    const Vec x = Vec::Random(3) * 0.5;
    const UJet uj = u->jet(x);
    const double h = 1e-5;
    for (int i = 0; i < 3; ++i) {
      Vec e = Vec::Zero(3);
      e(i) = h;
      EXPECT_NEAR(uj.d1(i), (u->jet(x + e).value - u->jet(x - e).value) / (2 * h), 1e-6) << u->name();
      const Vec col = (u->jet(x + e).d1 - u->jet(x - e).d1) / (2 * h);
      EXPECT_LE((uj.d2.col(i) - col).norm(), 1e-6) << u->name();
    }
  }
}
