#include "otspec/entropic_2d.hpp"

#include "otspec/errors.hpp"
#include "otspec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace otspec {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const double* v, int n) {
  double m = kNegInf;
  for (int k = 0; k < n; ++k) m = std::max(m, v[k]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += std::exp(v[k] - m);
  return m + std::log(s);
}

// out_k = -eps log sum_l w_l exp((h_l - |d_k - s_l|^2 / 2) / eps) for the
// nodes d_k of `dst`, summing over the nodes s_l of `src`. The quadratic cost
// factorizes over the two axes, so the sum is taken one axis at a time.
std::vector<double> soft_c_transform(const GridMeasure& dst, const GridMeasure& src, const std::vector<double>& h,
                                     double eps) {
  const int sx = src.nx(), sy = src.ny(), dx = dst.nx(), dy = dst.ny();
  std::vector<double> hh(h.size());
  for (std::size_t l = 0; l < h.size(); ++l) {
    const double w = src.weights()[l];
    hh[l] = w > 0.0 ? h[l] / eps + std::log(w) : kNegInf;
  }
  std::vector<double> ky(static_cast<std::size_t>(sy) * dy);
  for (int b = 0; b < sy; ++b)
    for (int d = 0; d < dy; ++d) {
      const double t = src.ys()[b] - dst.ys()[d];
      ky[static_cast<std::size_t>(b) * dy + d] = t * t / (2.0 * eps);
    }
  std::vector<double> kx(static_cast<std::size_t>(sx) * dx);
  for (int a = 0; a < sx; ++a)
    for (int c = 0; c < dx; ++c) {
      const double t = src.xs()[a] - dst.xs()[c];
      kx[static_cast<std::size_t>(a) * dx + c] = t * t / (2.0 * eps);
    }
  // m[a][d] = LSE_b (hh[a][b] - ky[b][d])
  std::vector<double> m(static_cast<std::size_t>(sx) * dy);
  std::vector<double> buf(std::max(sx, sy));
  for (int a = 0; a < sx; ++a) {
    const double* row = hh.data() + static_cast<std::size_t>(a) * sy;
    for (int d = 0; d < dy; ++d) {
      for (int b = 0; b < sy; ++b) buf[b] = row[b] - ky[static_cast<std::size_t>(b) * dy + d];
      m[static_cast<std::size_t>(a) * dy + d] = log_sum_exp(buf.data(), sy);
    }
  }
  std::vector<double> out(static_cast<std::size_t>(dx) * dy);
  for (int c = 0; c < dx; ++c) {
    for (int d = 0; d < dy; ++d) {
      for (int a = 0; a < sx; ++a) buf[a] = m[static_cast<std::size_t>(a) * dy + d] - kx[static_cast<std::size_t>(a) * dx + c];
      out[static_cast<std::size_t>(c) * dy + d] = -eps * log_sum_exp(buf.data(), sx);
    }
  }
  return out;
}

double weighted_sum(const std::vector<double>& v, const std::vector<double>& w) {
  std::vector<double> terms(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) terms[i] = w[i] > 0.0 ? v[i] * w[i] : 0.0;
  return pairwise_sum(terms);
}

// max_i w_i |exp((f_i - f~_i) / eps) - 1|: deviation of the plan marginal from w.
double marginal_deviation(const std::vector<double>& f, const std::vector<double>& f_tilde,
                          const std::vector<double>& w, double eps) {
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (w[i] <= 0.0) continue;
    err = std::max(err, w[i] * std::abs(std::expm1((f[i] - f_tilde[i]) / eps)));
  }
  return err;
}

std::vector<double> marginal(const std::vector<double>& f, const std::vector<double>& f_tilde,
                             const std::vector<double>& w, double eps) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i)
    if (w[i] > 0.0) out[i] = w[i] * std::exp((f[i] - f_tilde[i]) / eps);
  return out;
}

}  // namespace

GridMeasure::GridMeasure(Box2D box, int nx, int ny, std::vector<double> weights)
    : box_(box), nx_(nx), ny_(ny), weights_(std::move(weights)) {
  if (nx < 1 || ny < 1) throw DomainError("GridMeasure: grid sizes must be positive");
  if (!(box.x_lo < box.x_hi && box.y_lo < box.y_hi)) throw DomainError("GridMeasure: empty box");
  if (weights_.size() != static_cast<std::size_t>(nx) * ny) {
    throw DimensionMismatch("GridMeasure weights", static_cast<long>(nx) * ny, static_cast<long>(weights_.size()));
  }
  for (double w : weights_)
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("GridMeasure: weights must be finite and nonnegative");
  const double total = pairwise_sum(weights_);
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "GridMeasure: weights sum to " << total << ", not 1";
    throw DomainError(os.str());
  }
  xs_.resize(nx);
  ys_.resize(ny);
  for (int i = 0; i < nx; ++i) xs_[i] = box.x_lo + (i + 0.5) * hx();
  for (int j = 0; j < ny; ++j) ys_[j] = box.y_lo + (j + 0.5) * hy();
}

Vec GridMeasure::node(int k) const {
  Vec p(2);
  p << xs_[k / ny_], ys_[k % ny_];
  return p;
}

std::vector<int> GridMeasure::central_region(double fraction) const {
  std::vector<int> order(weights_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return weights_[a] > weights_[b]; });
  std::vector<int> region;
  double mass = 0.0;
  for (int k : order) {
    if (mass >= fraction) break;
    region.push_back(k);
    mass += weights_[k];
  }
  return region;
}

GridMeasure discretize(const Measure& m, const Box2D& box, int nx, int ny) {
  require_same_dim("discretize", 2, m.dim());
  Vec lo(2), hi(2);
  lo << box.x_lo, box.y_lo;
  hi << box.x_hi, box.y_hi;
  const double covered = m.box_mass_lower_bound(lo, hi);
  if (!(covered >= 1.0 - 1e-6)) {
    std::ostringstream os;
    os << "discretize: box [" << box.x_lo << ", " << box.x_hi << "] x [" << box.y_lo << ", " << box.y_hi
       << "] provably covers only " << covered << " of the mass of " << m.name() << " (need 1 - 1e-6)";
    throw DomainError(os.str());
  }
  const double hx = box.width() / nx, hy = box.height() / ny;
  std::vector<double> w(static_cast<std::size_t>(nx) * ny);
  Vec p(2);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      p << box.x_lo + (i + 0.5) * hx, box.y_lo + (j + 0.5) * hy;
      w[static_cast<std::size_t>(i) * ny + j] = m.density(p);
    }
  const double total = pairwise_sum(w);
  if (!(total > 0.0)) throw DomainError("discretize: density vanishes on every node");
  for (double& v : w) v /= total;
  return GridMeasure(box, nx, ny, std::move(w));
}

std::vector<double> geometric_schedule(double first, double last, double factor) {
  if (!(last > 0.0) || !(first >= last)) throw DomainError("geometric_schedule: need first >= last > 0");
  if (!(factor > 0.0 && factor < 1.0)) throw DomainError("geometric_schedule: factor must lie in (0, 1)");
  std::vector<double> s;
  for (double e = first; e > last * (1.0 + 1e-12); e *= factor) s.push_back(e);
  s.push_back(last);
  return s;
}

EntropicPlan::EntropicPlan(GridMeasure mu, GridMeasure nu, std::vector<double> f, std::vector<double> g,
                           double epsilon, bool converged, double marginal_error, int iterations,
                           std::vector<SinkhornIterate> log)
    : mu_(std::move(mu)),
      nu_(std::move(nu)),
      f_(std::move(f)),
      g_(std::move(g)),
      epsilon_(epsilon),
      converged_(converged),
      marginal_error_(marginal_error),
      iterations_(iterations),
      log_(std::move(log)) {}

std::vector<double> EntropicPlan::source_marginal() const {
  return marginal(f_, soft_c_transform(mu_, nu_, g_, epsilon_), mu_.weights(), epsilon_);
}

std::vector<double> EntropicPlan::target_marginal() const {
  return marginal(g_, soft_c_transform(nu_, mu_, f_, epsilon_), nu_.weights(), epsilon_);
}

EntropicPlan sinkhorn_solve(const GridMeasure& mu, const GridMeasure& nu, const SinkhornOptions& opts) {
  if (opts.schedule.empty()) throw DomainError("sinkhorn_solve: empty epsilon schedule");
  for (std::size_t k = 0; k < opts.schedule.size(); ++k) {
    if (!(opts.schedule[k] > 0.0)) throw DomainError("sinkhorn_solve: epsilon values must be positive");
    if (k > 0 && opts.schedule[k] > opts.schedule[k - 1]) throw DomainError("sinkhorn_solve: schedule must be decreasing");
  }
  if (opts.max_iter < 1) throw DomainError("sinkhorn_solve: max_iter must be positive");

  std::vector<double> f(mu.size(), 0.0), g(nu.size(), 0.0);
  std::vector<SinkhornIterate> log;
  double err = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  bool converged = false;
  for (std::size_t stage = 0; stage < opts.schedule.size(); ++stage) {
    const double eps = opts.schedule[stage];
    const bool last = stage + 1 == opts.schedule.size();
    const double tol = last ? opts.tol : std::max(opts.tol, opts.stage_tol);
    converged = false;
    for (int it = 0; it <= opts.max_iter; ++it) {
      std::vector<double> f_tilde = soft_c_transform(mu, nu, g, eps);
      if (it > 0) {
        err = marginal_deviation(f, f_tilde, mu.weights(), eps);
        if (opts.record_log) {
          log.push_back({eps, it, weighted_sum(f, mu.weights()) + weighted_sum(g, nu.weights()), err});
        }
        if (err <= tol) {
          converged = true;
          break;
        }
        if (it == opts.max_iter) break;
      }
      f = std::move(f_tilde);
      g = soft_c_transform(nu, mu, f, eps);
      ++total_iterations;
    }
  }
  return EntropicPlan(mu, nu, std::move(f), std::move(g), opts.schedule.back(), converged, err, total_iterations,
                      std::move(log));
}

Vec entropic_map(const EntropicPlan& plan, const Vec& x) {
  require_same_dim("entropic_map", 2, x.size());
  if (!plan.source().box().contains(x)) {
    std::ostringstream os;
    os << "entropic_map: point (" << x(0) << ", " << x(1) << ") outside the source box";
    throw DomainError(os.str());
  }
  const GridMeasure& nu = plan.target();
  const double eps = plan.epsilon();
  const int n = nu.size();
  std::vector<double> logw(n);
  double m = kNegInf;
  for (int l = 0; l < n; ++l) {
    const double w = nu.weights()[l];
    if (w <= 0.0) {
      logw[l] = kNegInf;
      continue;
    }
    const double dx = x(0) - nu.xs()[l / nu.ny()];
    const double dy = x(1) - nu.ys()[l % nu.ny()];
    logw[l] = (plan.g()[l] - 0.5 * (dx * dx + dy * dy)) / eps + std::log(w);
    m = std::max(m, logw[l]);
  }
  double s = 0.0, sx = 0.0, sy = 0.0;
  for (int l = 0; l < n; ++l) {
    if (logw[l] == kNegInf) continue;
    const double w = std::exp(logw[l] - m);
    s += w;
    sx += w * nu.xs()[l / nu.ny()];
    sy += w * nu.ys()[l % nu.ny()];
  }
  Vec y(2);
  y << sx / s, sy / s;
  return y;
}

JacobianEstimate jacobian_fd(const EntropicPlan& plan, const Vec& x, double h) {
  require_same_dim("jacobian_fd", 2, x.size());
  if (!(h > 0.0)) throw DomainError("jacobian_fd: step must be positive");
  const Box2D& b = plan.source().box();
  if (x(0) - b.x_lo < 2.0 * h || b.x_hi - x(0) < 2.0 * h || x(1) - b.y_lo < 2.0 * h || b.y_hi - x(1) < 2.0 * h) {
    std::ostringstream os;
    os << "jacobian_fd: point (" << x(0) << ", " << x(1) << ") closer than 2h = " << 2.0 * h << " to the box boundary";
    throw DomainError(os.str());
  }
  JacobianEstimate est;
  est.jacobian.resize(2, 2);
  for (int j = 0; j < 2; ++j) {
    Vec e = Vec::Zero(2);
    e(j) = h;
    est.jacobian.col(j) = (entropic_map(plan, x + e) - entropic_map(plan, x - e)) / (2.0 * h);
  }
  est.symmetrized = 0.5 * (est.jacobian + est.jacobian.transpose());
  est.symmetry_defect = (est.jacobian - est.jacobian.transpose()).norm() / est.jacobian.norm();
  const Eigen::SelfAdjointEigenSolver<Mat> es(est.symmetrized, Eigen::EigenvaluesOnly);
  est.positive_definite = es.eigenvalues().minCoeff() > 0.0;
  return est;
}

SpdMatrix hessian_fd(const EntropicPlan& plan, const Vec& x, double h) {
  const JacobianEstimate est = jacobian_fd(plan, x, h);
  if (!est.positive_definite) {
    std::ostringstream os;
    os << "hessian_fd: symmetrized Jacobian at (" << x(0) << ", " << x(1) << ") is not positive-definite";
    throw DomainError(os.str());
  }
  return SpdMatrix(est.symmetrized);
}

EntropicTransportMap::EntropicTransportMap(std::shared_ptr<const EntropicPlan> plan,
                                           std::shared_ptr<const Measure> source,
                                           std::shared_ptr<const Measure> target, double h)
    : plan_(std::move(plan)), source_(std::move(source)), target_(std::move(target)), h_(h) {
  if (!plan_ || !source_ || !target_) throw DomainError("EntropicTransportMap: null component");
  require_same_dim("EntropicTransportMap source", 2, source_->dim());
  require_same_dim("EntropicTransportMap target", 2, target_->dim());
}

std::string EntropicTransportMap::name() const { return "entropic[" + source_->name() + " -> " + target_->name() + "]"; }

bool EntropicTransportMap::in_source_support(const Vec& x) const {
  const Box2D& b = plan_->source().box();
  return x.size() == 2 && x(0) - b.x_lo >= 2.0 * h_ && b.x_hi - x(0) >= 2.0 * h_ && x(1) - b.y_lo >= 2.0 * h_ &&
         b.y_hi - x(1) >= 2.0 * h_;
}

}  // namespace otspec
