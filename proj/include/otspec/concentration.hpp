#pragma once

// Distribution of the log-spectrum Lambda(X) of D^2 Phi(X), X ~ mu, and the
// variance / Poincare / exponential-moment statistics built on it.

#include "otspec/brenier.hpp"
#include "otspec/stats.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace otspec {

struct SpectralSample {
  Vec x;
  SpdMatrix hessian = SpdMatrix::identity(1);
  LogSpectrum spectrum;
  std::vector<double> quadform_logs;  // log(D^2 Phi(x) v . v) per configured direction
  double weight = 1.0;
};

struct SpectralSampleSet {
  std::vector<SpectralSample> samples;
  std::vector<Vec> directions;
  long requested = 0;
  long flagged = 0;  // samples whose Hessian was unavailable or not SPD
  bool approximate = false;
  std::uint64_t seed = 0;

  [[nodiscard]] int dim() const { return samples.empty() ? 0 : samples.front().spectrum.dim(); }
  [[nodiscard]] std::size_t size() const { return samples.size(); }
};

struct VarianceReport {
  std::vector<double> variance;        // per index of Lambda
  std::vector<double> standard_error;  // zero for quadrature reports
  long samples = 0;
  long flagged = 0;
  std::vector<double> margin;          // 4 - variance
  double truncation_bound = 0.0;       // quadrature reports: clipped-tail budget
  bool approximate = false;

  [[nodiscard]] double max_variance() const;
  [[nodiscard]] double min_margin() const;
};

constexpr int kJackknifeBlocks = 50;

// Var[log Phi''(X)] for a 1D map by a graded Gauss-Legendre rule in the
// quantile variable on [clip, 1 - clip]. The clipped tails are accounted for
// by truncation_bound = 2 clip * (largest |log Phi'' - mean|)^2.
VarianceReport eigen_log_variance_quadrature_1d(const Brenier1D& map, int nodes = 2048, double clip = 1e-9);

// Draws n_samples pairs (X, D^2 Phi(X)) in kJackknifeBlocks blocks, block b
// from the stream (seed, b). Samples whose Hessian evaluation fails with a
// DomainError are counted in `flagged` and excluded.
SpectralSampleSet collect_spectral_samples(const TransportMap& tm, long n_samples, std::uint64_t seed,
                                           std::vector<Vec> directions = {});

// Per-index variance of Lambda with jackknife standard errors. Requires at
// least 1000 samples.
VarianceReport eigen_log_variance_mc(const SpectralSampleSet& set);
VarianceReport eigen_log_variance_mc(const TransportMap& tm, long n_samples, std::uint64_t seed);

// Lipschitz test function on R^n with an analytic bound for |grad f|^2.
struct LipschitzFunction {
  std::string name;
  std::function<double(const Vec&)> value;
  std::function<double(const Vec&)> grad_norm_sq;
  double lipschitz = 1.0;
};

// coordinates x_i, mean, max, log-sum-exp (temperature 1), distance to the
// fixed point (0.5, -0.5, 0.5, ...).
std::vector<LipschitzFunction> lambda_function_bank(int n);
LipschitzFunction constant_function(double c);

// Scalar Lipschitz function for the quadratic-form variable Y.
struct ScalarLipschitzFunction {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> derivative_sq;
};

// identity, clamp to [-1, 1], tanh.
std::vector<ScalarLipschitzFunction> quadform_function_bank();

// F on the SPD cone with an upper-gradient bound.
struct SpdLipschitzFunction {
  std::string name;
  std::function<double(const SpdMatrix&)> value;
  std::function<double(const SpdMatrix&)> upper_grad_sq;
};

// log_quadratic_form(., e_1), spd_distance(., Id), f o Lambda for the
// lambda bank members max and log-sum-exp, and log det / sqrt(n).
std::vector<SpdLipschitzFunction> theta_function_bank(int n);

struct RatioEstimate {
  double ratio = 0.0;
  double standard_error = 0.0;
  double numerator = 0.0;    // variance
  double denominator = 0.0;  // 4 E|grad|^2
  bool violation_candidate = false;  // zero denominator with nonzero numerator
};

// Var[f(Lambda(X))] / (4 E|grad f|^2(Lambda(X))), jackknife standard error.
RatioEstimate poincare_ratio(const SpectralSampleSet& set, const LipschitzFunction& f);
// Same with Y = log(D^2 Phi(X) v . v) for the configured direction index.
RatioEstimate quadform_poincare(const SpectralSampleSet& set, int direction, const ScalarLipschitzFunction& f);
// Var_theta[F] / (4 E_theta |grad F|^2) with theta the law of D^2 Phi(X).
RatioEstimate theta_poincare(const SpectralSampleSet& set, const SpdLipschitzFunction& f);

// E exp(c |f(Lambda(X)) - A|) with A the empirical mean; +inf on overflow.
Estimate exp_concentration(const SpectralSampleSet& set, const LipschitzFunction& f, double c);

std::vector<double> default_c_grid();  // 0.05, 0.10, ..., 0.50
// Point values only (standard_error = 0); the calibration curve is reported, not tested.
std::vector<Estimate> exp_concentration_sweep(const SpectralSampleSet& set, const LipschitzFunction& f,
                                              const std::vector<double>& c_grid);

struct FloorCheck {
  double min_phi2 = 0.0;
  double floor = 0.0;   // N^{-2}
  double margin = 0.0;  // min_phi2 - floor
  double argmin_level = 0.0;
  int levels = 0;
};

// min of Phi_N'' over the levels k / (levels + 1), k = 1..levels, for the
// map between regularize(mu, N) and regularize(nu, N).
FloorCheck caffarelli_floor_check(const LogConcaveMeasure1D& mu, const LogConcaveMeasure1D& nu, int n,
                                  int levels = 100);
// Same on an already regularized pair (reuse across grid refinements).
FloorCheck caffarelli_floor_check(const Brenier1D& regularized_map, int n, int levels);

}  // namespace otspec
