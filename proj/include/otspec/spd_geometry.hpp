#pragma once

// Geometry of the cone of symmetric positive-definite matrices under the
// affine-invariant metric dist(A, B) = || log(A^{-1/2} B A^{-1/2}) ||_HS.
//
// Every matrix function (powers, square roots, logarithms) goes through the
// eigendecomposition cached inside SpdMatrix, so distances, geodesics and
// matrix functions share one numerical pathway.

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <span>
#include <vector>

namespace otspec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Symmetric (not necessarily definite) matrix. Tangent vectors at a point of
// the SPD cone live here.
class SymMatrix {
 public:
  explicit SymMatrix(const Mat& m);

  [[nodiscard]] int dim() const { return static_cast<int>(m_.rows()); }
  [[nodiscard]] const Mat& matrix() const { return m_; }

 private:
  Mat m_;
};

// Eigenvalues sorted non-increasing (largest first).
class LogSpectrum {
 public:
  LogSpectrum() = default;
  explicit LogSpectrum(Vec values);

  [[nodiscard]] int dim() const { return static_cast<int>(values_.size()); }
  [[nodiscard]] const Vec& values() const { return values_; }
  [[nodiscard]] double operator[](int i) const { return values_(i); }

 private:
  Vec values_;
};

class SpdMatrix {
 public:
  // Symmetrizes the input (rejects relative asymmetry above 1e-8) and caches
  // the spectral decomposition. Throws DomainError unless every eigenvalue is
  // strictly positive and finite.
  explicit SpdMatrix(const Mat& m);

  static SpdMatrix identity(int n);
  static SpdMatrix diagonal(const Vec& d);

  [[nodiscard]] int dim() const { return static_cast<int>(m_.rows()); }
  [[nodiscard]] const Mat& matrix() const { return m_; }
  // Descending.
  [[nodiscard]] const Vec& eigenvalues() const { return eigenvalues_; }
  // Column i pairs with eigenvalues()(i).
  [[nodiscard]] const Mat& eigenvectors() const { return eigenvectors_; }

  // sum_i f(lambda_i) v_i v_i^T without validation of f.
  [[nodiscard]] Mat apply(const std::function<double(double)>& f) const;
  [[nodiscard]] Mat power(double s) const;
  [[nodiscard]] Mat sqrt() const { return power(0.5); }
  [[nodiscard]] Mat inv_sqrt() const { return power(-0.5); }
  [[nodiscard]] Mat log() const;
  [[nodiscard]] SpdMatrix inverse() const;
  [[nodiscard]] double log_det() const;
  [[nodiscard]] double condition_number() const {
    return eigenvalues_(0) / eigenvalues_(eigenvalues_.size() - 1);
  }

 private:
  Mat m_;
  Vec eigenvalues_;
  Mat eigenvectors_;
};

// f(A) = sum_i f(lambda_i) v_i v_i^T. Throws DomainError naming the offending
// eigenvalue when f is not finite on the spectrum.
SymMatrix matrix_function(const SpdMatrix& a, const std::function<double(double)>& f);

double spd_distance(const SpdMatrix& a, const SpdMatrix& b);

// ||A^{-1/2} B A^{-1/2}||_HS.
double local_norm(const SpdMatrix& a, const SymMatrix& b);
// sqrt(Tr[(A^{-1} B)^2]); algebraically equal to local_norm.
double local_norm_trace_form(const SpdMatrix& a, const SymMatrix& b);

// A^{1/2} (A^{-1/2} B A^{-1/2})^s A^{1/2}, s in [0, 1].
SpdMatrix geodesic_point(const SpdMatrix& a, const SpdMatrix& b, double s);

// Exponential map: A^{1/2} exp(A^{-1/2} T A^{-1/2}) A^{1/2}. The result lies at
// distance local_norm(A, T) from A.
SpdMatrix exp_map(const SpdMatrix& a, const SymMatrix& tangent);

// Riemannian length of a curve sampled at uniform parameters on [0, 1].
// Tangents use fourth-order finite differences when at least five samples are
// available, the integral uses the trapezoidal rule.
double curve_length(std::span<const SpdMatrix> points);

LogSpectrum log_eigen_map(const SpdMatrix& a);

// Directional derivative of the log-spectrum along B:
// (B v_i . v_i / lambda_i)_i. Valid where the spectrum of A is simple.
Vec log_spectrum_differential(const SpdMatrix& a, const SymMatrix& b);

// log(A v . v); 1-Lipschitz on the SPD cone.
double log_quadratic_form(const SpdMatrix& a, const Vec& v);

// Product of the k largest singular values (the maximal k-volume distortion).
double volume_ratio(const Mat& t, int k);
// For SPD input: product of the k largest eigenvalues.
double volume_ratio(const SpdMatrix& a, int k);

struct MajorizationReport {
  Vec gamma;  // Lambda(A^{1/2} B A^{1/2})
  Vec alpha;  // Lambda(A)
  Vec beta;   // Lambda(B)
  // k-th entry: sum_{i<=k} (alpha_i + beta_i) - sum_{i<=k} gamma_i.
  Vec partial_sum_margins;
  // k-th entry: sum over the k smallest indices of (gamma_i - alpha_i - beta_i).
  Vec tail_sum_margins;
  double positive_part_margin = 0.0;  // sum ((a+b)_+)^2 - sum (gamma_+)^2
  double negative_part_margin = 0.0;  // sum ((-a-b)_+)^2 - sum ((-gamma)_+)^2
  double sum_of_squares_margin = 0.0; // sum (a+b)^2 - sum gamma^2
  double triangle_margin = 0.0;       // |alpha| + |beta| - |gamma|

  [[nodiscard]] double min_margin() const;
  [[nodiscard]] bool holds(double tolerance) const { return min_margin() >= -tolerance; }
};

MajorizationReport majorization_check(const SpdMatrix& a, const SpdMatrix& b);

// sum_i h(alpha_i + beta_i) - sum_i h(gamma_i) for a caller-supplied convex
// non-decreasing h; nonnegative whenever the partial-sum margins are.
double weyl_polya_margin(const MajorizationReport& report, const std::function<double(double)>& h);

using SpdFunctional = std::function<double(const SpdMatrix&)>;

// Lower estimate of the upper gradient |grad F|(A): the largest difference
// quotient |F(Y) - F(Z)| / dist(Y, Z) over `probes` random pairs in the
// geodesic ball of radius eps around A.
double numeric_upper_gradient(const SpdFunctional& f, const SpdMatrix& a, double eps, int probes,
                              std::mt19937_64& rng);

}  // namespace otspec
