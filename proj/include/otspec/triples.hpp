#pragma once

// Concrete smooth transport triples (Phi, V, W) and test functions.
//
// Synthetic triples: Phi(x) = |x|^2/2 + delta p(x) + sum_m kappa_m logcosh(w_m . x)
// with p a random symmetric cubic form, W(y) = y^T S y / 2 + sum_m eta_m logcosh(z_m . y),
// and V defined by the transport equation V = W(grad Phi) - log det D^2 Phi,
// differentiated exactly with hyper-dual numbers.

#include "otspec/brenier.hpp"
#include "otspec/gamma2.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace otspec {

struct SyntheticTripleParams {
  int dim = 2;
  std::uint64_t seed = 1;
  // Scales the cubic and logcosh parts of Phi; delta is chosen so that
  // D^2 Phi >= (1 - 0.9 strength) I on the box [-1, 1]^n.
  double strength = 0.5;
  // log-range of the eigenvalues of S (drawn on [1, e^range]).
  double w_log_range = 1.0;
  int logcosh_terms = 2;
};

class SyntheticTriple final : public SmoothTriple {
 public:
  explicit SyntheticTriple(const SyntheticTripleParams& params);

  [[nodiscard]] int dim() const override { return n_; }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] TripleJet jet(const Vec& x) const override;
  // Uniform on [-0.9, 0.9]^n.
  [[nodiscard]] Vec random_point(Rng& rng) const override;
  [[nodiscard]] bool potentials_convex() const override { return convex_; }
  [[nodiscard]] std::pair<Vec, double> test_box() const override { return {Vec::Zero(n_), 1.0}; }

  // Smallest eigenvalue of D^2 V found on the verification grid.
  [[nodiscard]] double min_v_curvature() const { return min_v_curvature_; }
  [[nodiscard]] double delta() const { return delta_; }

 private:
  template <class T>
  T v_of(const std::vector<T>& x) const;

  SyntheticTripleParams params_;
  int n_;
  double delta_;
  std::vector<double> cubic_;  // c_ijk, n^3, symmetric
  std::vector<Vec> w_dirs_;
  std::vector<double> kappa_;
  Mat s_;
  std::vector<Vec> z_dirs_;
  std::vector<double> eta_;
  bool convex_ = false;
  double min_v_curvature_ = 0.0;
};

// n = 1 triple from the monotone rearrangement between two smooth catalog
// measures; Phi''' from the closed form.
class OneDimTriple final : public SmoothTriple {
 public:
  explicit OneDimTriple(std::shared_ptr<const Brenier1D> map);

  [[nodiscard]] int dim() const override { return 1; }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] TripleJet jet(const Vec& x) const override;
  // Source quantile at a level uniform on [0.02, 0.98].
  [[nodiscard]] Vec random_point(Rng& rng) const override;
  [[nodiscard]] bool potentials_convex() const override { return true; }
  [[nodiscard]] std::pair<Vec, double> test_box() const override;

  [[nodiscard]] const Brenier1D& map() const { return *map_; }

 private:
  std::shared_ptr<const Brenier1D> map_;
};

// Phi quadratic: T(x) = m2 + A (x - m1) between two Gaussians.
class GaussianTriple final : public SmoothTriple {
 public:
  GaussianTriple(const GaussianMeasure& mu, const GaussianMeasure& nu);

  [[nodiscard]] int dim() const override { return map_->dim(); }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] TripleJet jet(const Vec& x) const override;
  [[nodiscard]] Vec random_point(Rng& rng) const override;
  [[nodiscard]] bool potentials_convex() const override { return true; }
  [[nodiscard]] std::pair<Vec, double> test_box() const override;

 private:
  std::shared_ptr<const GaussianLinearMap> map_;
  Mat prec_mu_, prec_nu_;
};

class ProductTriple final : public SmoothTriple {
 public:
  explicit ProductTriple(std::vector<std::shared_ptr<const OneDimTriple>> factors);

  [[nodiscard]] int dim() const override { return static_cast<int>(factors_.size()); }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] TripleJet jet(const Vec& x) const override;
  [[nodiscard]] Vec random_point(Rng& rng) const override;
  [[nodiscard]] bool potentials_convex() const override { return true; }
  [[nodiscard]] std::pair<Vec, double> test_box() const override;

 private:
  std::vector<std::shared_ptr<const OneDimTriple>> factors_;
};

std::shared_ptr<OneDimTriple> one_dim_triple(const std::string& source_spec, const std::string& target_spec);

// Triples across n = 1, 2, 3: analytic 1D, Gaussian and product triples plus
// synthetic ones of varying strength. At least 20 members.
std::vector<SmoothTriplePtr> standard_triple_suite(std::uint64_t seed);

// u = a . x + x^T B x / 2 + alpha sin(w . x + phase) + beta (z . x)^3 / 6.
class SmoothTestFunction final : public TestFunction {
 public:
  SmoothTestFunction(std::string name, Vec a, Mat b, double alpha, Vec w, double phase, double beta, Vec z);

  [[nodiscard]] std::string name() const override { return name_; }
  [[nodiscard]] UJet jet(const Vec& x) const override;

 private:
  std::string name_;
  Vec a_;
  Mat b_;
  double alpha_;
  Vec w_;
  double phase_;
  double beta_;
  Vec z_;
};

TestFunctionPtr linear_test_function(const Vec& a);
TestFunctionPtr quadratic_test_function(const Vec& a, const Mat& b);
// A linear, a quadratic and (count - 2) random smooth members.
std::vector<TestFunctionPtr> test_function_bank(int n, std::uint64_t seed, int count);

}  // namespace otspec
