#pragma once

// Pointwise calculus of the weighted manifold (R^n, D^2 Phi, e^{-V} dx)
// attached to a transport triple (Phi, V, W): the generator L, the iterated
// carre du champ Gamma_2, the Riemannian Hessian, the Bakry-Emery-Ricci
// tensor and the pullback of the SPD metric under x -> D^2 Phi(x).
//
// Index conventions: upper indices are raised with Phi^{ij} = (D^2 Phi)^{-1},
//   Phi^i_{jk}   = Phi^{il} Phi_{jkl}
//   Phi^{ij}_k   = Phi^{il} Phi^{jm} Phi_{kml}
//   Phi^{ijk}    = Phi^{ia} Phi^{jb} Phi^{kc} Phi_{abc}
// All contractions are explicit index loops.

#include "otspec/random.hpp"
#include "otspec/spd_geometry.hpp"

#include <memory>
#include <string>
#include <vector>

namespace otspec {

// Dense n x n x n array, entry (i, j, k) at (i * n + j) * n + k.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n, 0.0) {}

  [[nodiscard]] int dim() const { return n_; }
  double& operator()(int i, int j, int k) { return data_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k]; }
  double operator()(int i, int j, int k) const { return data_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k]; }
  // max over index triples of the deviation from full symmetry, relative to the largest entry.
  [[nodiscard]] double symmetry_defect() const;

 private:
  int n_ = 0;
  std::vector<double> data_;
};

// Everything a triple provides at one point. W and its derivatives are taken
// at the image point T(x) = grad Phi(x).
struct TripleJet {
  Vec x;
  Vec t;        // grad Phi(x)
  Mat phi2;     // Phi_ij
  Tensor3 phi3; // Phi_ijk
  double v = 0.0;
  Vec v1;
  Mat v2;
  double w = 0.0;
  Vec w1;
  Mat w2;

  [[nodiscard]] int dim() const { return static_cast<int>(x.size()); }
};

enum class Provenance { Analytic, FiniteDifference };

class SmoothTriple {
 public:
  virtual ~SmoothTriple() = default;

  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual Provenance provenance() const { return Provenance::Analytic; }
  [[nodiscard]] virtual TripleJet jet(const Vec& x) const = 0;
  // A random evaluation point in the triple's domain.
  [[nodiscard]] virtual Vec random_point(Rng& rng) const = 0;
  // D^2 V and D^2 W verified positive semi-definite on the evaluation domain.
  [[nodiscard]] virtual bool potentials_convex() const = 0;
  // Box inside the domain used for integration-by-parts checks: center and half-width.
  [[nodiscard]] virtual std::pair<Vec, double> test_box() const = 0;
};

using SmoothTriplePtr = std::shared_ptr<const SmoothTriple>;

struct UJet {
  double value = 0.0;
  Vec d1;
  Mat d2;
};

class TestFunction {
 public:
  virtual ~TestFunction() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual UJet jet(const Vec& x) const = 0;
};

using TestFunctionPtr = std::shared_ptr<const TestFunction>;

struct ContractedTensors {
  Mat inv;        // Phi^{ij}
  Tensor3 mixed;  // (i, j, k) -> Phi^i_{jk}
  Tensor3 up2;    // (i, j, k) -> Phi^{ij}_k
  Tensor3 up3;    // (i, j, k) -> Phi^{ijk}
  double condition = 1.0;
};

// Throws DomainError when the condition number of D^2 Phi exceeds 1e12.
ContractedTensors contracted_tensors(const TripleJet& jet);

struct LForms {
  double w_form;  // Phi^{ij} u_ij - W_j(grad Phi) u_j
  double v_form;  // Phi^{ij} u_ij - (Phi^{ij}_i + Phi^{ij} V_i) u_j
};

LForms operator_L_forms(const TripleJet& jet, const ContractedTensors& ct, const UJet& u);
// The W-form; throws IdentityViolation if the two forms differ by more than
// 1e-6 (1 + |Lu|).
double operator_L(const TripleJet& jet, const ContractedTensors& ct, const UJet& u);
double operator_L(const SmoothTriple& t, const TestFunction& u, const Vec& x);

double gamma2_expanded(const TripleJet& jet, const ContractedTensors& ct, const UJet& u);
double gamma2_expanded(const SmoothTriple& t, const TestFunction& u, const Vec& x);

// (1/2) L(Phi^{ij} u_i u_j) - Phi^{ij} (Lu)_i u_j with central differences
// (step 1e-4 (1 + |x|_inf)) for the derivatives of Phi^{ij} u_i u_j and Lu.
double gamma2_direct(const SmoothTriple& t, const TestFunction& u, const Vec& x);

// (1/4) Phi^{ik}_l Phi^{jl}_k u_i u_j.
double gamma2_lower_bound(const TripleJet& jet, const ContractedTensors& ct, const UJet& u);
double gamma2_lower_bound(const SmoothTriple& t, const TestFunction& u, const Vec& x);

// Phi^{kl} Phi^{ij} u_ik u_jl - Phi^{ijk} u_ij u_k + (1/4) Phi^{ik}_l Phi^{jl}_k u_i u_j, term by term.
double quadratic_form_expansion(const TripleJet& jet, const ContractedTensors& ct, const UJet& u);

struct BMatrixCertificate {
  Mat b;        // b(j, i) = b_i^j = Phi^{jk} u_ki - (1/2) Phi^{jk}_i u_k
  Mat a;        // (D^2 Phi) b, symmetric
  double trace_b2;          // Tr(B^2) computed from b directly
  double congruence_trace;  // Tr[((D^2 Phi)^{-1/2} A (D^2 Phi)^{-1/2})^2]
  double asymmetry;         // ||A - A^T||_F / (1 + ||A||_F)
};

BMatrixCertificate bmatrix_certificate(const TripleJet& jet, const ContractedTensors& ct, const UJet& u);

struct PullbackMetric {
  Mat contracted;  // g_ij = Phi^l_{ik} Phi^k_{jl}
  Mat trace_form;  // Tr[(D^2 Phi)^{-1} d_i(D^2 Phi) (D^2 Phi)^{-1} d_j(D^2 Phi)]
};

PullbackMetric pullback_metric(const TripleJet& jet, const ContractedTensors& ct);

// (Ric)_{il} = (1/4) Phi^k_{ij} Phi^j_{lk} + (1/2) V_il + (1/2) Phi_ji Phi_lk W_jk(grad Phi).
Mat ricci_tensor(const TripleJet& jet, const ContractedTensors& ct);
// The first summand alone.
Mat ricci_third_order_part(const TripleJet& jet, const ContractedTensors& ct);

// ||D^2_M u||^2_M with (D^2_M u)_ij = u_ij - (1/2) Phi^k_ij u_k.
double riemannian_hessian_norm2(const TripleJet& jet, const ContractedTensors& ct, const UJet& u);

// Gamma_2(u) - ||D^2_M u||^2_M - Ric(grad_M u, grad_M u).
double bochner_residual(const TripleJet& jet, const ContractedTensors& ct, const UJet& u);
double bochner_residual(const SmoothTriple& t, const TestFunction& u, const Vec& x);

// j-th entry: V_j + Phi^i_{ji} - sum_i Phi_ij W_i(grad Phi).
Vec transport_identity_residual(const TripleJet& jet, const ContractedTensors& ct);

// k-th entry: L(Phi_k) + V_k.
Vec generator_on_gradient_residual(const TripleJet& jet, const ContractedTensors& ct);

// Gamma_2(Phi_k) through the differentiated identity: (1/2) L(Phi_kk) + V_kk,
// with the Hessian of Phi_kk taken by Richardson-extrapolated central
// differences of Phi_kij.
double gamma2_of_partial_via_identity(const SmoothTriple& t, int k, const Vec& x);

// int (Lu) v dmu + int Phi^{ij} u_i v_j dmu for the bump
// v(x) = prod_k (1 - ((x_k - c_k) / r)^2)^3 on the triple's test box, by a
// tensor Gauss-Legendre rule; returns (defect, scale) where scale is
// int |Phi^{ij} u_i v_j| dmu.
std::pair<double, double> integration_by_parts_defect(const SmoothTriple& t, const TestFunction& u, int nodes_per_dim);

// Test function u = Phi_k = (grad Phi)_k built from the triple's jet.
class PhiPartial final : public TestFunction {
 public:
  PhiPartial(SmoothTriplePtr triple, int k);
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] UJet jet(const Vec& x) const override;

 private:
  SmoothTriplePtr triple_;
  int k_;
};

}  // namespace otspec
