#pragma once

// Entropic optimal transport between measures discretized on 2D grids, with
// the barycentric projection as a Brenier-map estimator.

#include "otspec/brenier.hpp"
#include "otspec/multivariate_measures.hpp"

#include <algorithm>
#include <memory>
#include <vector>

namespace otspec {

struct Box2D {
  double x_lo, x_hi, y_lo, y_hi;

  [[nodiscard]] double width() const { return x_hi - x_lo; }
  [[nodiscard]] double height() const { return y_hi - y_lo; }
  // Side length of the (square) box; for non-square boxes the longer side.
  [[nodiscard]] double diam() const { return std::max(width(), height()); }
  [[nodiscard]] bool contains(const Vec& p) const {
    return p(0) >= x_lo && p(0) <= x_hi && p(1) >= y_lo && p(1) <= y_hi;
  }
};

// Nodes at cell centers of an nx x ny partition of the box; weight index
// i * ny + j for node (xs[i], ys[j]).
class GridMeasure {
 public:
  GridMeasure(Box2D box, int nx, int ny, std::vector<double> weights);

  [[nodiscard]] const Box2D& box() const { return box_; }
  [[nodiscard]] int nx() const { return nx_; }
  [[nodiscard]] int ny() const { return ny_; }
  [[nodiscard]] int size() const { return nx_ * ny_; }
  [[nodiscard]] double hx() const { return box_.width() / nx_; }
  [[nodiscard]] double hy() const { return box_.height() / ny_; }
  [[nodiscard]] const std::vector<double>& xs() const { return xs_; }
  [[nodiscard]] const std::vector<double>& ys() const { return ys_; }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] double weight(int i, int j) const { return weights_[static_cast<std::size_t>(i) * ny_ + j]; }
  [[nodiscard]] Vec node(int k) const;

  // Highest-weight nodes whose weights add up to at least `fraction`.
  [[nodiscard]] std::vector<int> central_region(double fraction) const;

 private:
  Box2D box_;
  int nx_, ny_;
  std::vector<double> xs_, ys_;
  std::vector<double> weights_;
};

// Node weights proportional to the density, renormalized. Throws DomainError
// unless the box provably carries at least 1 - 1e-6 of the mass.
GridMeasure discretize(const Measure& m, const Box2D& box, int nx, int ny);

// Geometric schedule from `first` down to `last` with ratio `factor` < 1;
// always ends exactly at `last`.
std::vector<double> geometric_schedule(double first, double last, double factor = 0.5);

struct SinkhornIterate {
  double epsilon;
  int iteration;           // within the epsilon stage
  double dual_objective;   // <f, mu> + <g, nu> (the plan has unit mass after each update)
  double marginal_error;   // max_i |(pi 1)_i - mu_i|
};

struct SinkhornOptions {
  std::vector<double> schedule;
  int max_iter = 20000;     // per epsilon stage
  double tol = 1e-8;        // final-stage marginal error
  double stage_tol = 1e-5;  // intermediate stages
  bool record_log = true;
};

// Cost |x - y|^2 / 2; potentials f (source) and g (target) in log-domain form.
class EntropicPlan {
 public:
  EntropicPlan(GridMeasure mu, GridMeasure nu, std::vector<double> f, std::vector<double> g, double epsilon,
               bool converged, double marginal_error, int iterations, std::vector<SinkhornIterate> log);

  [[nodiscard]] const GridMeasure& source() const { return mu_; }
  [[nodiscard]] const GridMeasure& target() const { return nu_; }
  [[nodiscard]] const std::vector<double>& f() const { return f_; }
  [[nodiscard]] const std::vector<double>& g() const { return g_; }
  [[nodiscard]] double epsilon() const { return epsilon_; }
  [[nodiscard]] bool converged() const { return converged_; }
  [[nodiscard]] double marginal_error() const { return marginal_error_; }
  [[nodiscard]] int iterations() const { return iterations_; }
  [[nodiscard]] const std::vector<SinkhornIterate>& log() const { return log_; }

  // Row and column sums of the plan.
  [[nodiscard]] std::vector<double> source_marginal() const;
  [[nodiscard]] std::vector<double> target_marginal() const;

 private:
  GridMeasure mu_;
  GridMeasure nu_;
  std::vector<double> f_, g_;
  double epsilon_;
  bool converged_;
  double marginal_error_;
  int iterations_;
  std::vector<SinkhornIterate> log_;
};

// Alternating log-domain updates with epsilon scaling and warm starts. Does
// not throw on non-convergence; inspect converged() and marginal_error().
EntropicPlan sinkhorn_solve(const GridMeasure& mu, const GridMeasure& nu, const SinkhornOptions& opts);

// Barycentric projection: E[Y | X = x] under the plan's conditional.
Vec entropic_map(const EntropicPlan& plan, const Vec& x);

struct JacobianEstimate {
  Mat jacobian;
  Mat symmetrized;
  double symmetry_defect;  // ||J - J^T||_F / ||J||_F
  bool positive_definite;
};

JacobianEstimate jacobian_fd(const EntropicPlan& plan, const Vec& x, double h);

// Symmetrized central-difference Jacobian of the entropic map. Throws
// DomainError when x is closer than 2h to the box boundary or when the
// estimate is not positive-definite.
SpdMatrix hessian_fd(const EntropicPlan& plan, const Vec& x, double h);

// TransportMap view of a solved plan; always flagged approximate.
class EntropicTransportMap final : public TransportMap {
 public:
  EntropicTransportMap(std::shared_ptr<const EntropicPlan> plan, std::shared_ptr<const Measure> source,
                       std::shared_ptr<const Measure> target, double h);

  [[nodiscard]] int dim() const override { return 2; }
  [[nodiscard]] MapKind kind() const override { return MapKind::EntropicGrid; }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] bool approximate() const override { return true; }
  // Points at distance at least 2h inside the grid box.
  [[nodiscard]] bool in_source_support(const Vec& x) const override;
  [[nodiscard]] double source_potential(const Vec& x) const override { return source_->potential(x); }
  [[nodiscard]] double target_potential(const Vec& y) const override { return target_->potential(y); }
  [[nodiscard]] Vec map(const Vec& x) const override { return entropic_map(*plan_, x); }
  [[nodiscard]] SpdMatrix hessian(const Vec& x) const override { return hessian_fd(*plan_, x, h_); }
  [[nodiscard]] Vec sample_source(Rng& rng) const override { return source_->sample(rng); }

  [[nodiscard]] const EntropicPlan& plan() const { return *plan_; }
  [[nodiscard]] double step() const { return h_; }

 private:
  std::shared_ptr<const EntropicPlan> plan_;
  std::shared_ptr<const Measure> source_;
  std::shared_ptr<const Measure> target_;
  double h_;
};

}  // namespace otspec
