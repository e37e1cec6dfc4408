#include "otspec/spd_geometry.hpp"

#include "otspec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace otspec {

namespace {

constexpr double kInputAsymmetryTolerance = 1e-8;
constexpr double kReconstructionTolerance = 1e-10;

Mat symmetrized(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) throw DimensionMismatch(what, m.rows(), m.cols());
  if (m.rows() == 0) throw DomainError(std::string(what) + ": empty matrix");
  if (!m.allFinite()) throw DomainError(std::string(what) + ": non-finite entry");
  const double scale = std::max(m.norm(), 1e-300);
  const double asym = (m - m.transpose()).norm();
  if (asym > kInputAsymmetryTolerance * scale) {
    std::ostringstream os;
    os << what << ": matrix is not symmetric (relative asymmetry " << asym / scale << ")";
    throw DomainError(os.str());
  }
  return 0.5 * (m + m.transpose());
}

Vec symmetric_eigenvalues_descending(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().reverse();
}

}  // namespace

SymMatrix::SymMatrix(const Mat& m) : m_(symmetrized(m, "SymMatrix")) {}

LogSpectrum::LogSpectrum(Vec values) : values_(std::move(values)) {
  for (Eigen::Index i = 1; i < values_.size(); ++i) {
    if (values_(i) > values_(i - 1)) throw DomainError("LogSpectrum: values must be non-increasing");
  }
}

SpdMatrix::SpdMatrix(const Mat& m) : m_(symmetrized(m, "SpdMatrix")) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(m_);
  if (solver.info() != Eigen::Success) throw DomainError("SpdMatrix: eigensolver failed");
  const Eigen::Index n = m_.rows();
  eigenvalues_ = solver.eigenvalues().reverse();
  eigenvectors_ = solver.eigenvectors().rowwise().reverse();
  if (!(eigenvalues_(n - 1) > 0.0) || !std::isfinite(eigenvalues_(0))) {
    std::ostringstream os;
    os << "SpdMatrix: matrix is not positive definite (smallest eigenvalue " << eigenvalues_(n - 1)
       << ")";
    throw DomainError(os.str());
  }
  const Mat rebuilt = eigenvectors_ * eigenvalues_.asDiagonal() * eigenvectors_.transpose();
  if ((rebuilt - m_).norm() > kReconstructionTolerance * m_.norm()) {
    throw DomainError("SpdMatrix: spectral reconstruction failed");
  }
}

SpdMatrix SpdMatrix::identity(int n) { return SpdMatrix(Mat::Identity(n, n)); }

SpdMatrix SpdMatrix::diagonal(const Vec& d) { return SpdMatrix(Mat(d.asDiagonal())); }

Mat SpdMatrix::apply(const std::function<double(double)>& f) const {
  Vec fl(eigenvalues_.size());
  for (Eigen::Index i = 0; i < fl.size(); ++i) fl(i) = f(eigenvalues_(i));
  Mat out = eigenvectors_ * fl.asDiagonal() * eigenvectors_.transpose();
  return 0.5 * (out + out.transpose());
}

Mat SpdMatrix::power(double s) const {
  return apply([s](double l) { return std::pow(l, s); });
}

Mat SpdMatrix::log() const {
  return apply([](double l) { return std::log(l); });
}

SpdMatrix SpdMatrix::inverse() const { return SpdMatrix(power(-1.0)); }

double SpdMatrix::log_det() const { return eigenvalues_.array().log().sum(); }

SymMatrix matrix_function(const SpdMatrix& a, const std::function<double(double)>& f) {
  const Vec& l = a.eigenvalues();
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    const double v = f(l(i));
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "matrix_function: f is not finite at eigenvalue " << l(i) << " (index " << i << ")";
      throw DomainError(os.str());
    }
  }
  return SymMatrix(a.apply(f));
}

double spd_distance(const SpdMatrix& a, const SpdMatrix& b) {
  require_same_dim("spd_distance", a.dim(), b.dim());
  const Mat w = a.inv_sqrt();
  const Mat c = w * b.matrix() * w;
  const Vec l = symmetric_eigenvalues_descending(0.5 * (c + c.transpose()));
  return std::sqrt(l.array().log().square().sum());
}

double local_norm(const SpdMatrix& a, const SymMatrix& b) {
  require_same_dim("local_norm", a.dim(), b.dim());
  const Mat w = a.inv_sqrt();
  return (w * b.matrix() * w).norm();
}

double local_norm_trace_form(const SpdMatrix& a, const SymMatrix& b) {
  require_same_dim("local_norm_trace_form", a.dim(), b.dim());
  const Mat p = a.power(-1.0) * b.matrix();
  return std::sqrt(std::max(0.0, (p * p).trace()));
}

SpdMatrix geodesic_point(const SpdMatrix& a, const SpdMatrix& b, double s) {
  require_same_dim("geodesic_point", a.dim(), b.dim());
  if (!(s >= 0.0 && s <= 1.0)) throw DomainError("geodesic_point: s must lie in [0, 1]");
  if (s == 0.0) return a;
  if (s == 1.0) return b;
  const Mat r = a.sqrt();
  const Mat w = a.inv_sqrt();
  const SpdMatrix c(w * b.matrix() * w);
  return SpdMatrix(r * c.power(s) * r);
}

SpdMatrix exp_map(const SpdMatrix& a, const SymMatrix& tangent) {
  require_same_dim("exp_map", a.dim(), tangent.dim());
  const Mat r = a.sqrt();
  const Mat w = a.inv_sqrt();
  const Mat s = w * tangent.matrix() * w;
  Eigen::SelfAdjointEigenSolver<Mat> solver(0.5 * (s + s.transpose()));
  const Mat e = solver.eigenvectors() * solver.eigenvalues().array().exp().matrix().asDiagonal() *
                solver.eigenvectors().transpose();
  return SpdMatrix(r * e * r);
}

double curve_length(std::span<const SpdMatrix> points) {
  const std::size_t m = points.size();
  if (m < 2) throw DomainError("curve_length: at least two points are required");
  const int n = points[0].dim();
  for (const auto& p : points) require_same_dim("curve_length", n, p.dim());
  const double h = 1.0 / static_cast<double>(m - 1);

  auto at = [&](std::size_t i) -> const Mat& { return points[i].matrix(); };
  auto tangent = [&](std::size_t i) -> Mat {
    if (m >= 5) {
      if (i >= 2 && i + 2 < m) {
        return (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * h);
      }
      if (i == 0) {
        return (-25.0 * at(0) + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4)) / (12.0 * h);
      }
      if (i == 1) {
        return (-3.0 * at(0) - 10.0 * at(1) + 18.0 * at(2) - 6.0 * at(3) + at(4)) / (12.0 * h);
      }
      if (i == m - 1) {
        return (25.0 * at(m - 1) - 48.0 * at(m - 2) + 36.0 * at(m - 3) - 16.0 * at(m - 4) +
                3.0 * at(m - 5)) / (12.0 * h);
      }
      return (3.0 * at(m - 1) + 10.0 * at(m - 2) - 18.0 * at(m - 3) + 6.0 * at(m - 4) - at(m - 5)) /
             (12.0 * h);
    }
    if (m == 2) return (at(1) - at(0)) / h;
    if (i == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    if (i == m - 1) return (3.0 * at(m - 1) - 4.0 * at(m - 2) + at(m - 3)) / (2.0 * h);
    return (at(i + 1) - at(i - 1)) / (2.0 * h);
  };

  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const Mat t = tangent(i);
    const double speed = local_norm(points[i], SymMatrix(0.5 * (t + t.transpose())));
    total += (i == 0 || i == m - 1) ? 0.5 * speed : speed;
  }
  return total * h;
}

LogSpectrum log_eigen_map(const SpdMatrix& a) {
  return LogSpectrum(a.eigenvalues().array().log().matrix());
}

Vec log_spectrum_differential(const SpdMatrix& a, const SymMatrix& b) {
  require_same_dim("log_spectrum_differential", a.dim(), b.dim());
  const Mat& v = a.eigenvectors();
  Vec out(a.dim());
  for (int i = 0; i < a.dim(); ++i) {
    out(i) = v.col(i).dot(b.matrix() * v.col(i)) / a.eigenvalues()(i);
  }
  return out;
}

double log_quadratic_form(const SpdMatrix& a, const Vec& v) {
  require_same_dim("log_quadratic_form", a.dim(), v.size());
  if (v.squaredNorm() == 0.0) throw DomainError("log_quadratic_form: v must be nonzero");
  return std::log(v.dot(a.matrix() * v));
}

double volume_ratio(const Mat& t, int k) {
  if (t.rows() != t.cols()) throw DimensionMismatch("volume_ratio", t.rows(), t.cols());
  if (k < 1 || k > t.rows()) throw DomainError("volume_ratio: k out of range");
  Eigen::JacobiSVD<Mat> svd(t);
  const Vec& s = svd.singularValues();  // descending
  double out = 1.0;
  for (int i = 0; i < k; ++i) out *= s(i);
  return out;
}

double volume_ratio(const SpdMatrix& a, int k) {
  if (k < 1 || k > a.dim()) throw DomainError("volume_ratio: k out of range");
  double out = 1.0;
  for (int i = 0; i < k; ++i) out *= a.eigenvalues()(i);
  return out;
}

double MajorizationReport::min_margin() const {
  double m = std::min({positive_part_margin, negative_part_margin, sum_of_squares_margin, triangle_margin});
  if (partial_sum_margins.size() > 0) m = std::min(m, partial_sum_margins.minCoeff());
  if (tail_sum_margins.size() > 0) m = std::min(m, tail_sum_margins.minCoeff());
  return m;
}

MajorizationReport majorization_check(const SpdMatrix& a, const SpdMatrix& b) {
  require_same_dim("majorization_check", a.dim(), b.dim());
  const int n = a.dim();
  const Mat r = a.sqrt();
  MajorizationReport rep;
  rep.gamma = log_eigen_map(SpdMatrix(r * b.matrix() * r)).values();
  rep.alpha = log_eigen_map(a).values();
  rep.beta = log_eigen_map(b).values();
  const Vec sum = rep.alpha + rep.beta;

  rep.partial_sum_margins.resize(n);
  rep.tail_sum_margins.resize(n);
  double head = 0.0;
  double tail = 0.0;
  for (int k = 0; k < n; ++k) {
    head += sum(k) - rep.gamma(k);
    rep.partial_sum_margins(k) = head;
    tail += rep.gamma(n - 1 - k) - sum(n - 1 - k);
    rep.tail_sum_margins(k) = tail;
  }
  auto pos_sq = [](double t) { return t > 0.0 ? t * t : 0.0; };
  double pp_sum = 0.0, pp_gamma = 0.0, np_sum = 0.0, np_gamma = 0.0;
  for (int i = 0; i < n; ++i) {
    pp_sum += pos_sq(sum(i));
    pp_gamma += pos_sq(rep.gamma(i));
    np_sum += pos_sq(-sum(i));
    np_gamma += pos_sq(-rep.gamma(i));
  }
  rep.positive_part_margin = pp_sum - pp_gamma;
  rep.negative_part_margin = np_sum - np_gamma;
  rep.sum_of_squares_margin = sum.squaredNorm() - rep.gamma.squaredNorm();
  rep.triangle_margin = rep.alpha.norm() + rep.beta.norm() - rep.gamma.norm();
  return rep;
}

double weyl_polya_margin(const MajorizationReport& report, const std::function<double(double)>& h) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < report.gamma.size(); ++i) {
    out += h(report.alpha(i) + report.beta(i)) - h(report.gamma(i));
  }
  return out;
}

namespace {

// Symmetric matrix with i.i.d. Gaussian entries, scaled to unit HS norm.
Mat random_unit_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Mat s(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      s(i, j) = normal(rng);
      s(j, i) = s(i, j);
    }
  }
  return s / s.norm();
}

}  // namespace

double numeric_upper_gradient(const SpdFunctional& f, const SpdMatrix& a, double eps, int probes,
                              std::mt19937_64& rng) {
  if (!(eps > 0.0)) throw DomainError("numeric_upper_gradient: eps must be positive");
  if (probes < 1) throw DomainError("numeric_upper_gradient: probes must be positive");
  const int n = a.dim();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Mat ra = a.sqrt();

  auto eval = [&](const SpdMatrix& p, int probe) {
    const double v = f(p);
    if (!std::isfinite(v)) {
      throw DomainError("numeric_upper_gradient: F is not finite at probe " + std::to_string(probe));
    }
    return v;
  };

  double best = 0.0;
  for (int k = 0; k < probes; ++k) {
    // Y within eps/2 of A, Z within eps/2 of Y: both inside B(A, eps).
    const double ry = 0.5 * eps * unit(rng);
    const SpdMatrix y = exp_map(a, SymMatrix(ra * (ry * random_unit_symmetric(n, rng)) * ra));
    const double rz = 0.5 * eps * (1.0 - unit(rng));
    const Mat sy = y.sqrt();
    const SpdMatrix z = exp_map(y, SymMatrix(sy * (rz * random_unit_symmetric(n, rng)) * sy));
    const double d = spd_distance(y, z);
    if (d <= 0.0) continue;
    best = std::max(best, std::abs(eval(y, k) - eval(z, k)) / d);
  }
  return best;
}

}  // namespace otspec
