#include "otspec/gamma2.hpp"

#include "otspec/errors.hpp"
#include "otspec/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace otspec {

double Tensor3::symmetry_defect() const {
  double scale = 0.0;
  for (double v : data_) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k) {
        const double a = (*this)(i, j, k);
        worst = std::max({worst, std::abs(a - (*this)(j, i, k)), std::abs(a - (*this)(i, k, j)),
                          std::abs(a - (*this)(k, j, i))});
      }
  return worst / scale;
}

ContractedTensors contracted_tensors(const TripleJet& jet) {
  const int n = jet.dim();
  require_same_dim("contracted_tensors: Hessian", n, jet.phi2.rows());
  require_same_dim("contracted_tensors: third derivatives", n, jet.phi3.dim());

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (jet.phi2 + jet.phi2.transpose()));
  const Vec& lam = es.eigenvalues();
  const double lo = lam(0), hi = lam(n - 1);
  const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(lo > 0.0) || condition > 1e12) {
    std::ostringstream os;
    os << "contracted_tensors: Hessian near-singular, condition estimate " << condition;
    throw DomainError(os.str());
  }

  ContractedTensors ct;
  ct.condition = condition;
  ct.inv = es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  ct.inv = 0.5 * (ct.inv + ct.inv.transpose());
  const Mat& p = ct.inv;

  ct.mixed = Tensor3(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += p(i, l) * jet.phi3(j, k, l);
        ct.mixed(i, j, k) = s;
      }

  ct.up2 = Tensor3(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += p(j, m) * ct.mixed(i, k, m);
        ct.up2(i, j, k) = s;
      }

  ct.up3 = Tensor3(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += p(k, c) * ct.up2(i, j, c);
        ct.up3(i, j, k) = s;
      }
  return ct;
}

namespace {

void check_u(const TripleJet& jet, const UJet& u) {
  require_same_dim("test function gradient", jet.dim(), u.d1.size());
  require_same_dim("test function Hessian", jet.dim(), u.d2.rows());
}

// M_ij = Phi^{ik}_l Phi^{jl}_k.
Mat third_order_square(const ContractedTensors& ct) {
  const int n = ct.inv.rows();
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += ct.up2(i, k, l) * ct.up2(j, l, k);
      m(i, j) = s;
    }
  return m;
}

// Phi^{kl} Phi^{ij} u_ik u_jl
double hessian_pairing(const Mat& p, const Mat& u2) {
  const int n = p.rows();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += p(k, l) * p(i, j) * u2(i, k) * u2(j, l);
  return s;
}

// Phi^{ijk} u_ij u_k
double cubic_pairing(const ContractedTensors& ct, const UJet& u) {
  const int n = ct.inv.rows();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) s += ct.up3(i, j, k) * u.d2(i, j) * u.d1(k);
  return s;
}

struct PointEval {
  TripleJet jet;
  ContractedTensors ct;
  UJet u;
};

PointEval evaluate(const SmoothTriple& t, const TestFunction& u, const Vec& x) {
  require_same_dim("evaluation point", t.dim(), x.size());
  PointEval e;
  e.jet = t.jet(x);
  e.ct = contracted_tensors(e.jet);
  e.u = u.jet(x);
  check_u(e.jet, e.u);
  return e;
}

double fd_step(const Vec& x) { return 1e-4 * (1.0 + x.lpNorm<Eigen::Infinity>()); }

}  // namespace

LForms operator_L_forms(const TripleJet& jet, const ContractedTensors& ct, const UJet& u) {
  check_u(jet, u);
  const int n = jet.dim();
  const Mat& p = ct.inv;
  double second = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) second += p(i, j) * u.d2(i, j);
  double w_drift = 0.0, v_drift = 0.0;
  for (int j = 0; j < n; ++j) {
    w_drift += jet.w1(j) * u.d1(j);
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += ct.up2(i, j, i) + p(i, j) * jet.v1(i);
    v_drift += c * u.d1(j);
  }
  return {second - w_drift, second - v_drift};
}

double operator_L(const TripleJet& jet, const ContractedTensors& ct, const UJet& u) {
  const LForms f = operator_L_forms(jet, ct, u);
  if (std::abs(f.w_form - f.v_form) > 1e-6 * (1.0 + std::abs(f.w_form))) {
    std::ostringstream os;
    os << "operator_L: W-form " << f.w_form << " and V-form " << f.v_form
       << " disagree; the triple violates the transport equation";
    throw IdentityViolation(os.str());
  }
  return f.w_form;
}

double operator_L(const SmoothTriple& t, const TestFunction& u, const Vec& x) {
  const PointEval e = evaluate(t, u, x);
  return operator_L(e.jet, e.ct, e.u);
}

double gamma2_expanded(const TripleJet& jet, const ContractedTensors& ct, const UJet& u) {
  check_u(jet, u);
  const Mat& p = ct.inv;
  const Mat m = third_order_square(ct);
  const Mat pvp = p * jet.v2 * p;
  const double first = hessian_pairing(p, u.d2);
  const double second = cubic_pairing(ct, u);
  const double third = 0.5 * u.d1.dot((m + pvp) * u.d1);
  const double fourth = 0.5 * u.d1.dot(jet.w2 * u.d1);
  return first - second + third + fourth;
}

double gamma2_expanded(const SmoothTriple& t, const TestFunction& u, const Vec& x) {
  const PointEval e = evaluate(t, u, x);
  return gamma2_expanded(e.jet, e.ct, e.u);
}

double gamma2_direct(const SmoothTriple& t, const TestFunction& u, const Vec& x) {
  const int n = t.dim();
  require_same_dim("gamma2_direct: point", n, x.size());
  const double h = fd_step(x);

  // carre du champ q = Phi^{ij} u_i u_j and Lu at a point
  auto fields = [&](const Vec& y) {
    const PointEval e = evaluate(t, u, y);
    return std::pair<double, double>{e.u.d1.dot(e.ct.inv * e.u.d1), operator_L(e.jet, e.ct, e.u)};
  };

  const PointEval centre = evaluate(t, u, x);
  const double q0 = centre.u.d1.dot(centre.ct.inv * centre.u.d1);

  Vec grad_q(n), grad_lu(n);
  Mat hess_q(n, n);
  for (int i = 0; i < n; ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const auto [q_plus, l_plus] = fields(xp);
    const auto [q_minus, l_minus] = fields(xm);
    grad_q(i) = (q_plus - q_minus) / (2.0 * h);
    grad_lu(i) = (l_plus - l_minus) / (2.0 * h);
    hess_q(i, i) = (q_plus - 2.0 * q0 + q_minus) / (h * h);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double corner[4];
      int c = 0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          Vec y = x;
          y(i) += si * h;
          y(j) += sj * h;
          corner[c++] = fields(y).first;
        }
      hess_q(i, j) = hess_q(j, i) = (corner[0] - corner[1] - corner[2] + corner[3]) / (4.0 * h * h);
    }

  UJet qjet{q0, grad_q, hess_q};
  const double lq = operator_L_forms(centre.jet, centre.ct, qjet).w_form;
  return 0.5 * lq - grad_lu.dot(centre.ct.inv * centre.u.d1);
}

double gamma2_lower_bound(const TripleJet& jet, const ContractedTensors& ct, const UJet& u) {
  check_u(jet, u);
  return 0.25 * u.d1.dot(third_order_square(ct) * u.d1);
}

double gamma2_lower_bound(const SmoothTriple& t, const TestFunction& u, const Vec& x) {
  const PointEval e = evaluate(t, u, x);
  return gamma2_lower_bound(e.jet, e.ct, e.u);
}

double quadratic_form_expansion(const TripleJet& jet, const ContractedTensors& ct, const UJet& u) {
  check_u(jet, u);
  return hessian_pairing(ct.inv, u.d2) - cubic_pairing(ct, u) + 0.25 * u.d1.dot(third_order_square(ct) * u.d1);
}

BMatrixCertificate bmatrix_certificate(const TripleJet& jet, const ContractedTensors& ct, const UJet& u) {
  check_u(jet, u);
  const int n = jet.dim();
  BMatrixCertificate c;
  c.b = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += ct.inv(j, k) * u.d2(k, i) - 0.5 * ct.up2(j, k, i) * u.d1(k);
      c.b(j, i) = s;
    }
  c.a = jet.phi2 * c.b;
  c.trace_b2 = (c.b * c.b).trace();
  c.asymmetry = (c.a - c.a.transpose()).norm() / (1.0 + c.a.norm());

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (jet.phi2 + jet.phi2.transpose()));
  const Mat root_inv =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  const Mat s = root_inv * (0.5 * (c.a + c.a.transpose())) * root_inv;
  c.congruence_trace = (s * s).trace();
  return c;
}

PullbackMetric pullback_metric(const TripleJet& jet, const ContractedTensors& ct) {
  const int n = jet.dim();
  PullbackMetric g{Mat::Zero(n, n), Mat::Zero(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += ct.mixed(l, i, k) * ct.mixed(k, j, l);
      g.contracted(i, j) = s;
    }
  std::vector<Mat> slices(n, Mat(n, n));
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) slices[i](a, b) = jet.phi3(a, b, i);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g.trace_form(i, j) = (ct.inv * slices[i] * ct.inv * slices[j]).trace();
  return g;
}

Mat ricci_third_order_part(const TripleJet& jet, const ContractedTensors& ct) {
  const int n = jet.dim();
  Mat r(n, n);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < n; ++l) {
      double s = 0.0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) s += ct.mixed(k, i, j) * ct.mixed(j, l, k);
      r(i, l) = 0.25 * s;
    }
  return r;
}

Mat ricci_tensor(const TripleJet& jet, const ContractedTensors& ct) {
  const Mat r = ricci_third_order_part(jet, ct) + 0.5 * jet.v2 + 0.5 * jet.phi2 * jet.w2 * jet.phi2;
  return 0.5 * (r + r.transpose());
}

double riemannian_hessian_norm2(const TripleJet& jet, const ContractedTensors& ct, const UJet& u) {
  check_u(jet, u);
  const int n = jet.dim();
  Mat h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = u.d2(i, j);
      for (int k = 0; k < n; ++k) s -= 0.5 * ct.mixed(k, i, j) * u.d1(k);
      h(i, j) = s;
    }
  return (ct.inv * h * ct.inv * h).trace();
}

double bochner_residual(const TripleJet& jet, const ContractedTensors& ct, const UJet& u) {
  const Vec grad_m = ct.inv * u.d1;
  const double ric = grad_m.dot(ricci_tensor(jet, ct) * grad_m);
  return gamma2_expanded(jet, ct, u) - riemannian_hessian_norm2(jet, ct, u) - ric;
}

double bochner_residual(const SmoothTriple& t, const TestFunction& u, const Vec& x) {
  const PointEval e = evaluate(t, u, x);
  return bochner_residual(e.jet, e.ct, e.u);
}

Vec transport_identity_residual(const TripleJet& jet, const ContractedTensors& ct) {
  const int n = jet.dim();
  Vec r(n);
  for (int j = 0; j < n; ++j) {
    double s = jet.v1(j);
    for (int i = 0; i < n; ++i) s += ct.mixed(i, j, i) - jet.phi2(i, j) * jet.w1(i);
    r(j) = s;
  }
  return r;
}

namespace {

UJet partial_jet(const TripleJet& jet, int k) {
  const int n = jet.dim();
  UJet u{jet.t(k), jet.phi2.row(k).transpose(), Mat(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) u.d2(i, j) = jet.phi3(k, i, j);
  return u;
}

}  // namespace

Vec generator_on_gradient_residual(const TripleJet& jet, const ContractedTensors& ct) {
  const int n = jet.dim();
  Vec r(n);
  for (int k = 0; k < n; ++k) r(k) = operator_L_forms(jet, ct, partial_jet(jet, k)).w_form + jet.v1(k);
  return r;
}

double gamma2_of_partial_via_identity(const SmoothTriple& t, int k, const Vec& x) {
  const int n = t.dim();
  if (k < 0 || k >= n) throw DomainError("gamma2_of_partial_via_identity: index out of range");
  const TripleJet centre = t.jet(x);
  const ContractedTensors ct = contracted_tensors(centre);
  const double h = fd_step(x);

  // Hessian of Phi_kk: d_i d_j Phi_kk = d_i Phi_kkj, central differences
  // at steps h and h/2 combined by Richardson extrapolation.
  auto central = [&](double step) {
    Mat d(n, n);
    for (int i = 0; i < n; ++i) {
      Vec xp = x, xm = x;
      xp(i) += step;
      xm(i) -= step;
      const TripleJet jp = t.jet(xp), jm = t.jet(xm);
      for (int j = 0; j < n; ++j) d(i, j) = (jp.phi3(k, k, j) - jm.phi3(k, k, j)) / (2.0 * step);
    }
    return d;
  };
  Mat hess = (4.0 * central(0.5 * h) - central(h)) / 3.0;
  hess = 0.5 * (hess + hess.transpose());
  Vec grad(n);
  for (int j = 0; j < n; ++j) grad(j) = centre.phi3(k, k, j);
  const UJet phikk{centre.phi2(k, k), grad, hess};
  return 0.5 * operator_L_forms(centre, ct, phikk).w_form + centre.v2(k, k);
}

std::pair<double, double> integration_by_parts_defect(const SmoothTriple& t, const TestFunction& u,
                                                      int nodes_per_dim) {
  const int n = t.dim();
  const auto [centre, radius] = t.test_box();
  require_same_dim("integration_by_parts_defect: box centre", n, centre.size());
  const GaussRule rule = gauss_legendre(nodes_per_dim);
  const double v_ref = t.jet(centre).v;

  std::vector<int> idx(n, 0);
  double defect = 0.0, scale = 0.0;
  while (true) {
    Vec x(n), s(n);
    double weight = 1.0;
    for (int d = 0; d < n; ++d) {
      s(d) = rule.nodes[idx[d]];
      x(d) = centre(d) + radius * s(d);
      weight *= rule.weights[idx[d]] * radius;
    }
    // bump and its gradient
    double bump = 1.0;
    Vec dbump = Vec::Ones(n);
    for (int d = 0; d < n; ++d) {
      const double one_minus = 1.0 - s(d) * s(d);
      const double f = one_minus * one_minus * one_minus;
      const double df = -6.0 * s(d) * one_minus * one_minus / radius;
      for (int e = 0; e < n; ++e) dbump(e) *= (e == d) ? df : f;
      bump *= f;
    }
    const PointEval e = evaluate(t, u, x);
    const double dens = std::exp(-(e.jet.v - v_ref)) * weight;
    const double lu = operator_L(e.jet, e.ct, e.u);
    const double carre = e.u.d1.dot(e.ct.inv * dbump);
    defect += (lu * bump + carre) * dens;
    scale += std::abs(carre) * dens;

    int d = 0;
    while (d < n && ++idx[d] == nodes_per_dim) idx[d++] = 0;
    if (d == n) break;
  }
  return {defect, scale};
}

PhiPartial::PhiPartial(SmoothTriplePtr triple, int k) : triple_(std::move(triple)), k_(k) {
  if (!triple_ || k_ < 0 || k_ >= triple_->dim()) throw DomainError("PhiPartial: index out of range");
}

std::string PhiPartial::name() const { return "Phi_" + std::to_string(k_ + 1); }

UJet PhiPartial::jet(const Vec& x) const { return partial_jet(triple_->jet(x), k_); }

}  // namespace otspec
