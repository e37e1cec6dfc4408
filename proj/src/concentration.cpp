#include "otspec/concentration.hpp"

#include "otspec/errors.hpp"
#include "otspec/quadrature.hpp"
#include "otspec/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace otspec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Mean of values over the ranges.
double range_mean(std::span<const double> values, std::span<const IndexRange> ranges) {
  std::size_t count = 0;
  for (const auto& r : ranges) count += r.end - r.begin;
  return count == 0 ? 0.0 : sum_over(values, ranges) / static_cast<double>(count);
}

// Variance of values over the ranges; values are pre-centred on the full
// mean so that a constant sample gives exactly 0.
double range_variance(std::span<const double> centred, std::span<const double> squares,
                      std::span<const IndexRange> ranges) {
  const double m = range_mean(centred, ranges);
  return std::max(0.0, range_mean(squares, ranges) - m * m);
}

struct CentredSeries {
  std::vector<double> centred;
  std::vector<double> squares;
  double variance = 0.0;
};

CentredSeries centre(const std::vector<double>& values) {
  CentredSeries s;
  const double m = mean(values);
  s.centred.resize(values.size());
  s.squares.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.centred[i] = values[i] - m;
    s.squares[i] = s.centred[i] * s.centred[i];
  }
  s.variance = variance(values);
  return s;
}

RatioEstimate ratio_from_series(const std::vector<double>& values, const std::vector<double>& grad_sq) {
  RatioEstimate r;
  if (values.empty()) throw DomainError("Poincare ratio on an empty sample");
  const CentredSeries s = centre(values);
  r.numerator = s.variance;
  r.denominator = 4.0 * mean(grad_sq);
  if (r.numerator == 0.0) return r;  // constant f: ratio 0 by convention
  if (r.denominator == 0.0) {
    r.ratio = kInf;
    r.violation_candidate = true;
    return r;
  }
  r.ratio = r.numerator / r.denominator;
  const Estimate jk = jackknife(values.size(), kJackknifeBlocks, [&](std::span<const IndexRange> ranges) {
    const double den = 4.0 * range_mean(grad_sq, ranges);
    const double num = range_variance(s.centred, s.squares, ranges);
    return den > 0.0 ? num / den : 0.0;
  });
  r.standard_error = jk.standard_error;
  return r;
}

std::vector<double> spectrum_values(const SpectralSampleSet& set, const LipschitzFunction& f,
                                    std::vector<double>* grad_sq) {
  std::vector<double> out;
  out.reserve(set.size());
  if (grad_sq) grad_sq->reserve(set.size());
  for (const auto& s : set.samples) {
    out.push_back(f.value(s.spectrum.values()));
    if (grad_sq) grad_sq->push_back(f.grad_norm_sq(s.spectrum.values()));
  }
  return out;
}

}  // namespace

double VarianceReport::max_variance() const {
  return variance.empty() ? 0.0 : *std::max_element(variance.begin(), variance.end());
}

double VarianceReport::min_margin() const {
  return margin.empty() ? 4.0 : *std::min_element(margin.begin(), margin.end());
}

VarianceReport eigen_log_variance_quadrature_1d(const Brenier1D& map, int nodes, double clip) {
  const std::vector<QuantileNode> rule = graded_quantile_rule(nodes, clip);
  std::vector<double> y(rule.size()), w(rule.size()), wy(rule.size());
  for (std::size_t k = 0; k < rule.size(); ++k) {
    y[k] = map.at_level(rule[k].p, rule[k].q).log_phi2;
    if (!std::isfinite(y[k])) throw ConvergenceError("quadrature variance: non-finite log Phi'' at level " +
                                                     std::to_string(rule[k].p));
    w[k] = rule[k].weight;
    wy[k] = w[k] * y[k];
  }
  const double total = pairwise_sum(w);
  const double m = pairwise_sum(wy) / total;
  std::vector<double> wd(rule.size());
  double spread = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double d = y[k] - m;
    wd[k] = w[k] * d * d;
    spread = std::max(spread, std::abs(d));
  }
  VarianceReport r;
  r.variance = {pairwise_sum(wd) / total};
  r.standard_error = {0.0};
  r.samples = static_cast<long>(rule.size());
  r.margin = {4.0 - r.variance[0]};
  r.truncation_bound = 2.0 * clip * spread * spread;
  return r;
}

SpectralSampleSet collect_spectral_samples(const TransportMap& tm, long n_samples, std::uint64_t seed,
                                           std::vector<Vec> directions) {
  if (n_samples < 1) throw DomainError("collect_spectral_samples: need at least one sample");
  const int n = tm.dim();
  if (directions.empty()) {
    directions.push_back(Vec::Unit(n, 0));
    if (n > 1) directions.push_back(Vec::Ones(n) / std::sqrt(static_cast<double>(n)));
  }
  for (const auto& v : directions) require_same_dim("collect_spectral_samples: direction", n, v.size());

  SpectralSampleSet set;
  set.directions = directions;
  set.requested = n_samples;
  set.approximate = tm.approximate();
  set.seed = seed;
  set.samples.reserve(static_cast<std::size_t>(n_samples));
  const auto blocks = block_partition(static_cast<std::size_t>(n_samples), kJackknifeBlocks);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Rng rng = make_stream(seed, b);
    for (std::size_t i = blocks[b].begin; i < blocks[b].end; ++i) {
      try {
        MapSample ms = tm.sample_pair(rng);
        SpectralSample s;
        s.spectrum = log_eigen_map(ms.hessian);
        if (!s.spectrum.values().allFinite()) {
          ++set.flagged;
          continue;
        }
        s.x = std::move(ms.x);
        for (const auto& v : directions) s.quadform_logs.push_back(log_quadratic_form(ms.hessian, v));
        s.hessian = std::move(ms.hessian);
        set.samples.push_back(std::move(s));
      } catch (const DomainError&) {
        ++set.flagged;
      }
    }
  }
  return set;
}

VarianceReport eigen_log_variance_mc(const SpectralSampleSet& set) {
  if (set.size() < 1000) throw DomainError("eigen_log_variance_mc: at least 1000 samples required");
  const int n = set.dim();
  VarianceReport r;
  r.samples = static_cast<long>(set.size());
  r.flagged = set.flagged;
  r.approximate = set.approximate;
  std::vector<double> values(set.size());
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < set.size(); ++k) values[k] = set.samples[k].spectrum[i];
    const CentredSeries s = centre(values);
    const Estimate jk = jackknife(values.size(), kJackknifeBlocks, [&](std::span<const IndexRange> ranges) {
      return range_variance(s.centred, s.squares, ranges);
    });
    r.variance.push_back(s.variance);
    r.standard_error.push_back(jk.standard_error);
    r.margin.push_back(4.0 - s.variance);
  }
  return r;
}

VarianceReport eigen_log_variance_mc(const TransportMap& tm, long n_samples, std::uint64_t seed) {
  return eigen_log_variance_mc(collect_spectral_samples(tm, n_samples, seed));
}

std::vector<LipschitzFunction> lambda_function_bank(int n) {
  std::vector<LipschitzFunction> bank;
  for (int i = 0; i < n; ++i)
    bank.push_back({"coordinate_" + std::to_string(i + 1), [i](const Vec& x) { return x(i); },
                    [](const Vec&) { return 1.0; }, 1.0});
  const double dn = static_cast<double>(n);
  bank.push_back({"mean", [dn](const Vec& x) { return x.sum() / dn; }, [dn](const Vec&) { return 1.0 / dn; },
                  1.0 / std::sqrt(dn)});
  bank.push_back({"max", [](const Vec& x) { return x.maxCoeff(); }, [](const Vec&) { return 1.0; }, 1.0});
  bank.push_back({"log_sum_exp",
                  [](const Vec& x) {
                    const double m = x.maxCoeff();
                    return m + std::log((x.array() - m).exp().sum());
                  },
                  [](const Vec& x) {
                    const Eigen::ArrayXd e = (x.array() - x.maxCoeff()).exp();
                    const Eigen::ArrayXd p = e / e.sum();
                    return (p * p).sum();
                  },
                  1.0});
  Vec point(n);
  for (int i = 0; i < n; ++i) point(i) = (i % 2 == 0) ? 0.5 : -0.5;
  bank.push_back({"distance_to_point", [point](const Vec& x) { return (x - point).norm(); },
                  [](const Vec&) { return 1.0; }, 1.0});
  return bank;
}

LipschitzFunction constant_function(double c) {
  return {"constant", [c](const Vec&) { return c; }, [](const Vec&) { return 0.0; }, 0.0};
}

std::vector<ScalarLipschitzFunction> quadform_function_bank() {
  return {
      {"identity", [](double y) { return y; }, [](double) { return 1.0; }},
      {"clamp", [](double y) { return std::clamp(y, -1.0, 1.0); },
       [](double y) { return std::abs(y) < 1.0 ? 1.0 : 0.0; }},
      {"tanh", [](double y) { return std::tanh(y); },
       [](double y) {
         const double t = std::tanh(y);
         return (1.0 - t * t) * (1.0 - t * t);
       }},
  };
}

std::vector<SpdLipschitzFunction> theta_function_bank(int n) {
  const double dn = static_cast<double>(n);
  const Vec e1 = Vec::Unit(n, 0);
  const auto lam = lambda_function_bank(n);
  const LipschitzFunction fmax = lam[n + 1];
  const LipschitzFunction flse = lam[n + 2];
  return {
      {"log_quadratic_form_e1", [e1](const SpdMatrix& a) { return log_quadratic_form(a, e1); },
       [](const SpdMatrix&) { return 1.0; }},
      {"distance_to_identity", [n](const SpdMatrix& a) { return spd_distance(a, SpdMatrix::identity(n)); },
       [](const SpdMatrix&) { return 1.0; }},
      {"max_of_log_spectrum", [fmax](const SpdMatrix& a) { return fmax.value(log_eigen_map(a).values()); },
       [fmax](const SpdMatrix& a) { return fmax.grad_norm_sq(log_eigen_map(a).values()); }},
      {"log_sum_exp_of_log_spectrum", [flse](const SpdMatrix& a) { return flse.value(log_eigen_map(a).values()); },
       [flse](const SpdMatrix& a) { return flse.grad_norm_sq(log_eigen_map(a).values()); }},
      {"normalized_log_det", [dn](const SpdMatrix& a) { return a.log_det() / std::sqrt(dn); },
       [](const SpdMatrix&) { return 1.0; }},
  };
}

RatioEstimate poincare_ratio(const SpectralSampleSet& set, const LipschitzFunction& f) {
  std::vector<double> g;
  const std::vector<double> v = spectrum_values(set, f, &g);
  return ratio_from_series(v, g);
}

RatioEstimate quadform_poincare(const SpectralSampleSet& set, int direction, const ScalarLipschitzFunction& f) {
  if (direction < 0 || direction >= static_cast<int>(set.directions.size()))
    throw DomainError("quadform_poincare: direction index out of range");
  std::vector<double> v, g;
  v.reserve(set.size());
  g.reserve(set.size());
  for (const auto& s : set.samples) {
    const double y = s.quadform_logs[direction];
    v.push_back(f.value(y));
    g.push_back(f.derivative_sq(y));
  }
  return ratio_from_series(v, g);
}

RatioEstimate theta_poincare(const SpectralSampleSet& set, const SpdLipschitzFunction& f) {
  std::vector<double> v, g;
  v.reserve(set.size());
  g.reserve(set.size());
  for (const auto& s : set.samples) {
    v.push_back(f.value(s.hessian));
    g.push_back(f.upper_grad_sq(s.hessian));
  }
  return ratio_from_series(v, g);
}

Estimate exp_concentration(const SpectralSampleSet& set, const LipschitzFunction& f, double c) {
  if (!(c > 0.0)) throw DomainError("exp_concentration: c must be positive");
  const std::vector<double> v = spectrum_values(set, f, nullptr);
  if (v.empty()) throw DomainError("exp_concentration: empty sample");
  auto statistic = [&](std::span<const IndexRange> ranges) {
    const double a = range_mean(v, ranges);
    std::vector<double> e;
    for (const auto& r : ranges)
      for (std::size_t k = r.begin; k < r.end; ++k) e.push_back(std::exp(c * std::abs(v[k] - a)));
    return mean(e);
  };
  const IndexRange all{0, v.size()};
  Estimate out{statistic(std::span<const IndexRange>(&all, 1)), 0.0};
  if (!std::isfinite(out.value)) return {kInf, 0.0};
  out.standard_error = jackknife(v.size(), kJackknifeBlocks, statistic).standard_error;
  return out;
}

std::vector<double> default_c_grid() {
  std::vector<double> c;
  for (int k = 1; k <= 10; ++k) c.push_back(0.05 * k);
  return c;
}

std::vector<Estimate> exp_concentration_sweep(const SpectralSampleSet& set, const LipschitzFunction& f,
                                              const std::vector<double>& c_grid) {
  std::vector<Estimate> out;
  const std::vector<double> v = spectrum_values(set, f, nullptr);
  if (v.empty()) throw DomainError("exp_concentration_sweep: empty sample");
  const IndexRange all{0, v.size()};
  const double a = range_mean(v, std::span<const IndexRange>(&all, 1));
  std::vector<double> e(v.size());
  for (double c : c_grid) {
    if (!(c > 0.0)) throw DomainError("exp_concentration_sweep: c must be positive");
    for (std::size_t k = 0; k < v.size(); ++k) e[k] = std::exp(c * std::abs(v[k] - a));
    const double m = mean(e);
    out.push_back({std::isfinite(m) ? m : kInf, 0.0});
  }
  return out;
}

FloorCheck caffarelli_floor_check(const Brenier1D& regularized_map, int n, int levels) {
  if (n < 1) throw DomainError("caffarelli_floor_check: N must be positive");
  if (levels < 1) throw DomainError("caffarelli_floor_check: need at least one level");
  FloorCheck fc;
  fc.floor = 1.0 / (static_cast<double>(n) * n);
  fc.levels = levels;
  fc.min_phi2 = kInf;
  for (int k = 1; k <= levels; ++k) {
    const double p = static_cast<double>(k) / (levels + 1);
    const double q = static_cast<double>(levels + 1 - k) / (levels + 1);
    const double phi2 = std::exp(regularized_map.at_level(p, q).log_phi2);
    if (phi2 < fc.min_phi2) {
      fc.min_phi2 = phi2;
      fc.argmin_level = p;
    }
  }
  fc.margin = fc.min_phi2 - fc.floor;
  return fc;
}

FloorCheck caffarelli_floor_check(const LogConcaveMeasure1D& mu, const LogConcaveMeasure1D& nu, int n,
                                  int levels) {
  const Brenier1D map(regularize(mu, n), regularize(nu, n));
  return caffarelli_floor_check(map, n, levels);
}

}  // namespace otspec
