#include "otspec/experiment_runner.hpp"

#include "otspec/entropic_2d.hpp"
#include "otspec/errors.hpp"
#include "otspec/gamma2.hpp"
#include "otspec/random.hpp"
#include "otspec/triples.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace otspec {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) { return seed * 1000003ULL + 7919ULL * (index + 1); }

CheckRecord error_record(const std::string& name, const std::string& tag, const std::exception& e) {
  CheckRecord c = make_check(name, tag, std::numeric_limits<double>::quiet_NaN(), Relation::AtMost, 0.0, 0.0);
  c.pass = false;
  c.note = std::string("error: ") + e.what();
  return c;
}

CheckRecord with_note(CheckRecord c, std::string note) {
  c.note = std::move(note);
  return c;
}

CheckRecord non_gating(CheckRecord c) {
  c.gating = false;
  return c;
}

std::vector<LogConcaveMeasure1D> factors_of(const MeasureSpec& spec) {
  std::vector<LogConcaveMeasure1D> out;
  for (const auto& s : spec) out.push_back(parse_measure_spec(s.get<std::string>()));
  return out;
}

GaussianMeasure gaussian_of(const json& g) {
  const json& m = g.at("mean");
  const int n = static_cast<int>(m.size());
  Vec mean(n);
  Mat cov(n, n);
  for (int i = 0; i < n; ++i) {
    mean(i) = m[i].get<double>();
    for (int j = 0; j < n; ++j) cov(i, j) = g.at("cov")[i][j].get<double>();
  }
  return GaussianMeasure(mean, SpdMatrix(cov));
}

RadialMeasure radial_of(const json& r) {
  const std::string kind = r.at("kind").get<std::string>();
  const int n = r.at("dim").get<int>();
  const double p = r.at("param").get<double>();
  if (kind == "uniform_ball") return RadialMeasure::uniform_ball(n, p);
  if (kind == "gaussian") return RadialMeasure::gaussian(n, p);
  if (kind == "exponential") return RadialMeasure::exponential(n, p);
  throw DomainError("radial measure: unknown kind '" + kind + "'");
}

bool is_gaussian(const MeasureSpec& s) { return s.is_object() && s.contains("gaussian"); }
bool is_radial(const MeasureSpec& s) { return s.is_object() && s.contains("radial"); }

json gaussian_spec(const Vec& mean, const Mat& cov) {
  json m = json::array(), c = json::array();
  for (int i = 0; i < mean.size(); ++i) {
    m.push_back(mean(i));
    json row = json::array();
    for (int j = 0; j < mean.size(); ++j) row.push_back(cov(i, j));
    c.push_back(row);
  }
  return json{{"gaussian", {{"mean", m}, {"cov", c}}}};
}

json radial_spec(const std::string& kind, int n, double p) {
  return json{{"radial", {{"kind", kind}, {"dim", n}, {"param", p}}}};
}

std::vector<LipschitzFunction> selected_bank(int n, const std::vector<std::string>& names) {
  std::vector<LipschitzFunction> bank = lambda_function_bank(n);
  if (names.empty()) return bank;
  std::vector<LipschitzFunction> out;
  for (auto& f : bank) {
    const std::string family = f.name.rfind("coordinate_", 0) == 0 ? "coordinates" : f.name;
    if (std::find(names.begin(), names.end(), family) != names.end()) out.push_back(std::move(f));
  }
  return out;
}

std::vector<MeasurePair> experiment_pairs(const ExperimentConfig& cfg) {
  if (cfg.pair) return {*cfg.pair};
  return catalog_pairs();
}

// Samples for every experiment, built lazily one at a time.
template <class Body>
void for_each_sample_set(const ExperimentConfig& cfg, const SampleSink& sink, std::vector<CheckRecord>& out,
                         const std::string& tag, Body&& body) {
  const auto pairs = experiment_pairs(cfg);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    std::string name = "experiment_" + std::to_string(e);
    try {
      const MapExperiment ex = build_map_experiment(pairs[e]);
      name = ex.name;
      const SpectralSampleSet set = collect_spectral_samples(*ex.map, cfg.samples, sub_seed(cfg.seed, e));
      if (sink) sink(name, set);
      body(name, set);
    } catch (const std::exception& err) {
      out.push_back(error_record(name, tag, err));
    }
  }
}

double sup_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace

std::shared_ptr<const Measure> build_measure(const MeasureSpec& spec) {
  if (spec.is_string()) {
    return std::make_shared<ProductMeasure>(std::vector<LogConcaveMeasure1D>{parse_measure_spec(spec.get<std::string>())});
  }
  if (spec.is_array()) return std::make_shared<ProductMeasure>(factors_of(spec));
  if (is_gaussian(spec)) return std::make_shared<GaussianMeasure>(gaussian_of(spec.at("gaussian")));
  if (is_radial(spec)) return std::make_shared<RadialMeasure>(radial_of(spec.at("radial")));
  throw DomainError("build_measure: unsupported measure spec " + spec.dump());
}

MapExperiment build_map_experiment(const MeasurePair& pair) {
  const MeasureSpec& s = pair.source;
  const MeasureSpec& t = pair.target;
  MapExperiment ex;
  if (s.is_string() && t.is_string()) {
    auto m = brenier_1d(parse_measure_spec(s.get<std::string>()), parse_measure_spec(t.get<std::string>()));
    ex.one_dim = m;
    ex.map = m;
  } else if (s.is_array() && t.is_array()) {
    const auto fs = factors_of(s), ft = factors_of(t);
    require_same_dim("product pair", static_cast<long>(fs.size()), static_cast<long>(ft.size()));
    std::vector<Brenier1D> factors;
    for (std::size_t i = 0; i < fs.size(); ++i) factors.emplace_back(fs[i], ft[i]);
    ex.map = brenier_product(factors);
  } else if (is_gaussian(s) && is_gaussian(t)) {
    ex.map = brenier_gaussian(gaussian_of(s.at("gaussian")), gaussian_of(t.at("gaussian")));
  } else if (is_radial(s) && is_radial(t)) {
    ex.map = brenier_radial(radial_of(s.at("radial")), radial_of(t.at("radial")));
  } else {
    throw DomainError("no exact Brenier map for the pair " + s.dump() + " -> " + t.dump());
  }
  ex.name = ex.map->name();
  return ex;
}

std::vector<MeasurePair> catalog_pairs() {
  std::vector<MeasurePair> pairs = {
      {"gaussian(0, 1)", "logistic(0, 1)"}, {"uniform(0, 1)", "exponential(1)"}, {"gamma(2, 1)", "beta(2, 2)"},
      {"laplace(0, 1)", "gaussian(0, 2)"},  {"beta(2, 3)", "subbotin(4)"},      {"exponential(1)", "uniform(0, 1)"},
  };
  pairs.push_back({json::array({"gaussian(0, 1)", "uniform(0, 1)", "beta(2, 2)"}),
                   json::array({"logistic(0, 1)", "exponential(1)", "laplace(0, 1)"})});
  Mat c1(4, 4), c2(4, 4);
  c1 << 2.0, 0.5, 0.0, 0.1, 0.5, 1.0, 0.2, 0.0, 0.0, 0.2, 0.5, 0.1, 0.1, 0.0, 0.1, 1.5;
  c2 << 1.0, -0.3, 0.2, 0.0, -0.3, 2.5, 0.0, 0.4, 0.2, 0.0, 0.8, 0.0, 0.0, 0.4, 0.0, 0.3;
  pairs.push_back({gaussian_spec(Vec::Zero(4), c1), gaussian_spec(Vec::LinSpaced(4, -1.0, 1.0), c2)});
  for (int n : {2, 3, 5, 8}) pairs.push_back({radial_spec("uniform_ball", n, 1.0), radial_spec("gaussian", n, 1.0)});
  return pairs;
}

std::vector<std::string> variance_grid_measures() {
  return {"gaussian(0, 1)", "uniform(0, 1)", "exponential(1)", "gamma(2, 1)",
          "beta(2, 2)",     "logistic(0, 1)", "laplace(0, 1)",  "subbotin(4)"};
}

std::vector<MeasurePair> default_floor_pairs() {
  return {{"uniform(0, 1)", "exponential(1)"}, {"beta(2, 3)", "logistic(0, 1)"}, {"laplace(0, 1)", "uniform(-1, 1)"}};
}

// ---------------------------------------------------------------------------
// SPD geometry

std::vector<CheckRecord> metric_suite(const ExperimentConfig& cfg) {
  const auto& g = cfg.geometry;
  Rng rng = make_stream(cfg.seed, 101);
  double symmetry = 0.0, triangle = kInf, affine = 0.0, inversion = 0.0, majorization = kInf, weyl = kInf;
  double length = 0.0, congruence = 0.0;
  const auto h_square_plus = [](double t) { return t > 0.0 ? t * t : 0.0; };
  for (int p = 0; p < g.pairs; ++p) {
    const int n = g.min_dim + p % (g.max_dim - g.min_dim + 1);
    const SpdMatrix a = random_spd(n, rng), b = random_spd(n, rng), c = random_spd(n, rng);
    const Mat t = random_invertible(n, rng, 10.0);
    const double dab = spd_distance(a, b);
    symmetry = std::max(symmetry, std::abs(dab - spd_distance(b, a)));
    triangle = std::min(triangle, dab + spd_distance(b, c) - spd_distance(a, c));
    const SpdMatrix ta(t * a.matrix() * t.transpose()), tb(t * b.matrix() * t.transpose());
    affine = std::max(affine, std::abs(spd_distance(ta, tb) - dab));
    inversion = std::max(inversion, std::abs(spd_distance(a.inverse(), b.inverse()) - dab));
    const MajorizationReport mr = majorization_check(a, b);
    majorization = std::min(majorization, mr.min_margin());
    weyl = std::min(weyl, weyl_polya_margin(mr, h_square_plus));
    const SymMatrix tangent(b.matrix() - a.matrix());
    congruence = std::max(congruence, std::abs(local_norm(a, tangent) - local_norm_trace_form(a, tangent)));
    std::vector<SpdMatrix> curve;
    curve.reserve(g.curve_samples);
    for (int k = 0; k < g.curve_samples; ++k) curve.push_back(geodesic_point(a, b, static_cast<double>(k) / (g.curve_samples - 1)));
    length = std::max(length, std::abs(curve_length(curve) - dab));
  }
  const std::string tag = "spd metric";
  return {
      make_check("metric.symmetry", tag, symmetry, Relation::AtMost, 0.0, 1e-9),
      make_check("metric.triangle_margin", "spd triangle inequality", triangle, Relation::AtLeast, 0.0, 1e-9),
      make_check("metric.affine_invariance", "congruence invariance", affine, Relation::AtMost, 0.0, 1e-9),
      make_check("metric.inversion_invariance", "inversion invariance", inversion, Relation::AtMost, 0.0, 1e-9),
      make_check("metric.majorization_margin", "log-majorization D_k", majorization, Relation::AtLeast, 0.0, 1e-9),
      make_check("metric.weyl_polya_margin", "Weyl-Polya convex order", weyl, Relation::AtLeast, 0.0, 1e-9),
      make_check("metric.local_norm_forms", "local norm trace form", congruence, Relation::AtMost, 0.0, 1e-9),
      make_check("metric.geodesic_length", "geodesic length equals distance", length, Relation::AtMost, 0.0, 1e-4),
  };
}

std::vector<CheckRecord> lipschitz_suite(const ExperimentConfig& cfg) {
  const auto& g = cfg.geometry;
  Rng rng = make_stream(cfg.seed, 202);
  double quadform = kInf, lambda = kInf, sorted = kInf, differential = kInf;
  for (int p = 0; p < g.pairs; ++p) {
    const int n = g.min_dim + p % (g.max_dim - g.min_dim + 1);
    const SpdMatrix a = random_spd(n, rng), b = random_spd(n, rng);
    const double d = spd_distance(a, b);
    const Vec v = random_unit_vector(n, rng);
    quadform = std::min(quadform, d - std::abs(log_quadratic_form(a, v) - log_quadratic_form(b, v)));
    const Vec la = log_eigen_map(a).values(), lb = log_eigen_map(b).values();
    lambda = std::min(lambda, d - (la - lb).norm());
    sorted = std::min(sorted, d * d - (la - lb).squaredNorm());
    const Mat m = Mat::NullaryExpr(n, n, [&](Eigen::Index, Eigen::Index) { return std::normal_distribution<double>()(rng); });
    const SymMatrix tangent(0.5 * (m + m.transpose()));
    differential = std::min(differential, local_norm(a, tangent) - log_spectrum_differential(a, tangent).norm());
  }
  return {
      make_check("lipschitz.log_quadratic_form", "log quadratic form is 1-Lipschitz", quadform, Relation::AtLeast, 0.0,
                 1e-9),
      make_check("lipschitz.log_spectrum", "log-spectrum map is 1-Lipschitz", lambda, Relation::AtLeast, 0.0, 1e-9),
      make_check("lipschitz.sorted_spectra", "sorted-spectra squared bound", sorted, Relation::AtLeast, 0.0, 1e-9),
      make_check("lipschitz.differential", "log-spectrum differential bound", differential, Relation::AtLeast, 0.0,
                 1e-9),
  };
}

// ---------------------------------------------------------------------------
// Gamma_2 calculus

std::vector<CheckRecord> gamma2_suite(const ExperimentConfig& cfg) {
  std::vector<CheckRecord> out;
  const auto suite = standard_triple_suite(cfg.seed);
  int convex = 0;
  for (const auto& t : suite) convex += t->potentials_convex() ? 1 : 0;
  out.push_back(make_check("gamma2.triples", "suite size", static_cast<double>(suite.size()), Relation::AtLeast, 20.0, 0.0));
  out.push_back(
      non_gating(make_check("gamma2.convex_triples", "suite with convex V, W", convex, Relation::AtLeast, 0.0, 0.0)));
  for (std::size_t ti = 0; ti < suite.size(); ++ti) {
    const auto& t = suite[ti];
    const std::string prefix = "gamma2[" + t->name() + "].";
    try {
      Rng rng = make_stream(cfg.seed, 300 + ti);
      const auto bank = test_function_bank(t->dim(), sub_seed(cfg.seed, ti), cfg.gamma2.test_functions);
      double transport = 0.0, generator = 0.0, certificate = 0.0, bochner = 0.0, lower_margin = kInf, ricci = kInf;
      double pullback = 0.0, direct = 0.0, partial = 0.0;
      for (int p = 0; p < cfg.gamma2.points; ++p) {
        const Vec x = t->random_point(rng);
        const TripleJet jet = t->jet(x);
        const ContractedTensors ct = contracted_tensors(jet);
        transport = std::max(transport, sup_norm(transport_identity_residual(jet, ct)));
        generator = std::max(generator, sup_norm(generator_on_gradient_residual(jet, ct)));
        const PullbackMetric pm = pullback_metric(jet, ct);
        pullback = std::max(pullback, (pm.contracted - pm.trace_form).cwiseAbs().maxCoeff());
        if (t->potentials_convex()) {
          const Mat ric = ricci_tensor(jet, ct);
          ricci = std::min(ricci, Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (ric + ric.transpose())).eigenvalues().minCoeff());
        }
        for (const auto& u : bank) {
          const UJet uj = u->jet(x);
          const BMatrixCertificate cert = bmatrix_certificate(jet, ct, uj);
          certificate = std::max(certificate, std::abs(cert.congruence_trace - quadratic_form_expansion(jet, ct, uj)));
          bochner = std::max(bochner, std::abs(bochner_residual(jet, ct, uj)));
          if (t->potentials_convex()) {
            lower_margin = std::min(lower_margin, gamma2_expanded(jet, ct, uj) - gamma2_lower_bound(jet, ct, uj));
          }
          if (p < 5) direct = std::max(direct, std::abs(gamma2_direct(*t, *u, x) - gamma2_expanded(jet, ct, uj)));
        }
        if (p < 5) {
          const PhiPartial phi1(t, 0);
          partial = std::max(partial, std::abs(gamma2_of_partial_via_identity(*t, 0, x) - gamma2_expanded(jet, ct, phi1.jet(x))));
        }
      }
      out.push_back(make_check(prefix + "transport_identity", "differentiated transport equation", transport,
                               Relation::AtMost, 0.0, 1e-8));
      out.push_back(make_check(prefix + "generator_on_gradient", "L Phi_k = -V_k", generator, Relation::AtMost, 0.0, 1e-8));
      out.push_back(make_check(prefix + "bmatrix_certificate", "B-matrix certificate", certificate, Relation::AtMost, 0.0,
                               1e-9));
      out.push_back(make_check(prefix + "bochner", "Bochner formula", bochner, Relation::AtMost, 0.0, 1e-6));
      out.push_back(make_check(prefix + "pullback_forms", "pullback metric two forms", pullback, Relation::AtMost, 0.0,
                               1e-9));
      out.push_back(make_check(prefix + "direct_definition", "Gamma_2 definition by differences", direct, Relation::AtMost,
                               0.0, 1e-4));
      out.push_back(make_check(prefix + "partial_identity", "Gamma_2 of Phi_1 via L(Phi_11)", partial, Relation::AtMost,
                               0.0, 1e-6));
      if (t->potentials_convex()) {
        out.push_back(make_check(prefix + "lower_bound_margin", "Gamma_2 lower bound", lower_margin, Relation::AtLeast, 0.0, 1e-9));
        out.push_back(make_check(prefix + "ricci_min_eigenvalue", "Ricci tensor PSD", ricci, Relation::AtLeast, 0.0, 1e-9));
      }
    } catch (const std::exception& e) {
      out.push_back(error_record(prefix + "evaluation", "Gamma_2 suite", e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Variance of the log-spectrum

std::vector<CheckRecord> variance_suite(const ExperimentConfig& cfg, json* extras, const SampleSink& sink) {
  std::vector<CheckRecord> out;
  const std::string tag = "variance of log-eigenvalues at most 4";
  double max_variance = 0.0;
  json table = json::array();

  auto quadrature_record = [&](const std::string& source, const std::string& target) {
    const std::string name = "variance.quadrature[" + source + " -> " + target + "]";
    try {
      const Brenier1D map(parse_measure_spec(source), parse_measure_spec(target));
      const VarianceReport r = eigen_log_variance_quadrature_1d(map, cfg.quadrature_nodes);
      max_variance = std::max(max_variance, r.variance[0]);
      table.push_back({{"source", source}, {"target", target}, {"variance", r.variance[0]},
                       {"truncation_bound", r.truncation_bound}});
      out.push_back(with_note(make_check(name, tag, r.variance[0], Relation::AtMost, 4.0, r.truncation_bound),
                              "margin " + format_double(4.0 - r.variance[0])));
      return r;
    } catch (const std::exception& e) {
      out.push_back(error_record(name, tag, e));
      return VarianceReport{};
    }
  };

  auto mc_records = [&](const std::string& name, const SpectralSampleSet& set, bool approximate) {
    const VarianceReport r = eigen_log_variance_mc(set);
    for (std::size_t i = 0; i < r.variance.size(); ++i) {
      CheckRecord c = make_check("variance.mc[" + name + "].lambda_" + std::to_string(i + 1), tag, r.variance[i],
                                 Relation::AtMost, 4.0, 3.0 * r.standard_error[i]);
      c.approximate = approximate;
      c.gating = !approximate;
      c.note = "samples " + std::to_string(r.samples) + ", flagged " + std::to_string(r.flagged);
      if (!approximate) max_variance = std::max(max_variance, r.variance[i]);
      out.push_back(std::move(c));
    }
    table.push_back({{"experiment", name}, {"variance", r.variance}, {"standard_error", r.standard_error},
                     {"flagged", r.flagged}, {"approximate", approximate}});
  };

  if (cfg.catalog()) {
    const auto grid = variance_grid_measures();
    for (const auto& a : grid)
      for (const auto& b : grid) quadrature_record(a, b);
    const VarianceReport ue = quadrature_record("uniform(0, 1)", "exponential(1)");
    if (!ue.variance.empty()) {
      out.push_back(make_check("variance.oracle.uniform_to_exponential", "Var of a standard exponential", ue.variance[0],
                               Relation::Within, 1.0, 1e-6));
    }
    const VarianceReport gg = quadrature_record("gaussian(0, 1)", "gaussian(1, 3)");
    if (!gg.variance.empty()) {
      out.push_back(make_check("variance.oracle.gaussian_pair", "constant Hessian", gg.variance[0], Relation::Within, 0.0,
                               1e-12));
    }
    const auto pairs = catalog_pairs();
    for (std::size_t e = 0; e < pairs.size(); ++e) {
      if (pairs[e].source.is_string()) continue;  // 1D pairs are covered by the quadrature grid
      std::string name = "experiment_" + std::to_string(e);
      try {
        const MapExperiment ex = build_map_experiment(pairs[e]);
        name = ex.name;
        const SpectralSampleSet set = collect_spectral_samples(*ex.map, cfg.samples, sub_seed(cfg.seed, e));
        if (sink) sink(name, set);
        mc_records(name, set, false);
        if (ex.map->kind() == MapKind::GaussianLinear) {
          const VarianceReport r = eigen_log_variance_mc(set);
          out.push_back(make_check("variance.oracle[" + name + "]", "constant Hessian", r.max_variance(),
                                   Relation::Within, 0.0, 1e-12));
        }
      } catch (const std::exception& err) {
        out.push_back(error_record("variance.mc[" + name + "]", tag, err));
      }
    }
  } else {
    const MeasurePair& pair = *cfg.pair;
    if (cfg.map_kind == "entropic-grid") {
      try {
        ExperimentConfig sub = cfg;
        json local;
        auto records = sinkhorn_suite(sub, &local);
        for (auto& r : records) out.push_back(std::move(r));
        if (extras) (*extras)["sinkhorn"] = local;
      } catch (const std::exception& e) {
        out.push_back(error_record("variance.entropic", tag, e));
      }
    } else if (pair.source.is_string() && pair.target.is_string()) {
      quadrature_record(pair.source.get<std::string>(), pair.target.get<std::string>());
    } else {
      std::string name = "experiment";
      try {
        const MapExperiment ex = build_map_experiment(pair);
        name = ex.name;
        const SpectralSampleSet set = collect_spectral_samples(*ex.map, cfg.samples, sub_seed(cfg.seed, 0));
        if (sink) sink(name, set);
        mc_records(name, set, false);
      } catch (const std::exception& err) {
        out.push_back(error_record("variance.mc[" + name + "]", tag, err));
      }
    }
  }
  if (extras) {
    (*extras)["variance_table"] = table;
    (*extras)["max_observed_variance"] = max_variance;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Poincare and exponential concentration

std::vector<CheckRecord> poincare_suite(const ExperimentConfig& cfg, const SampleSink& sink) {
  std::vector<CheckRecord> out;
  for_each_sample_set(cfg, sink, out, "Poincare inequality", [&](const std::string& name, const SpectralSampleSet& set) {
    const int n = set.dim();
    auto ratio_record = [&](const std::string& check, const std::string& tag, const RatioEstimate& r) {
      CheckRecord c = make_check(check, tag, r.ratio, Relation::AtMost, 1.0, 3.0 * r.standard_error);
      if (r.violation_candidate) {
        c.pass = false;
        c.note = "zero gradient with nonzero variance";
      }
      out.push_back(std::move(c));
    };
    for (const auto& f : selected_bank(n, cfg.test_functions)) {
      ratio_record("poincare[" + name + "]." + f.name, "Poincare for f(Lambda)", poincare_ratio(set, f));
    }
    for (std::size_t d = 0; d < set.directions.size(); ++d) {
      for (const auto& f : quadform_function_bank()) {
        ratio_record("poincare_quadform[" + name + "].v" + std::to_string(d + 1) + "." + f.name,
                     "Poincare for log quadratic form", quadform_poincare(set, static_cast<int>(d), f));
      }
    }
    for (const auto& f : theta_function_bank(n)) {
      ratio_record("poincare_theta[" + name + "]." + f.name, "Poincare on the Hessian law", theta_poincare(set, f));
    }
  });
  return out;
}

std::vector<CheckRecord> concentration_suite(const ExperimentConfig& cfg, json* extras, const SampleSink& sink) {
  std::vector<CheckRecord> out;
  const std::vector<double> grid = cfg.c_grid.empty() ? default_c_grid() : cfg.c_grid;
  json sweeps = json::array();
  for_each_sample_set(cfg, sink, out, "exponential concentration", [&](const std::string& name, const SpectralSampleSet& set) {
    for (const auto& f : selected_bank(set.dim(), cfg.test_functions)) {
      const Estimate e = exp_concentration(set, f, cfg.c);
      out.push_back(make_check("exp_concentration[" + name + "]." + f.name, "exponential moment at most 2", e.value,
                               Relation::AtMost, 2.0, 3.0 * e.standard_error));
      json curve = json::array();
      for (const Estimate& s : exp_concentration_sweep(set, f, grid)) {
        curve.push_back(std::isfinite(s.value) ? json(s.value) : json("inf"));
      }
      sweeps.push_back({{"experiment", name}, {"function", f.name}, {"values", curve}});
    }
  });
  if (extras) {
    (*extras)["c"] = cfg.c;
    (*extras)["c_grid"] = grid;
    (*extras)["sweeps"] = sweeps;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regularization

std::vector<CheckRecord> regularization_suite(const ExperimentConfig& cfg, json* extras) {
  std::vector<CheckRecord> out;
  const auto& opt = cfg.regularization;
  const std::vector<std::string> bases = {"uniform(0, 1)", "exponential(1)", "beta(2, 3)", "laplace(0, 1)",
                                          "logistic(0, 1)"};
  json convergence = json::array();
  for (const auto& spec : bases) {
    const std::string prefix = "regularize[" + spec + "]";
    try {
      const LogConcaveMeasure1D base = parse_measure_spec(spec);
      // Points of a compact set inside the support, for the local-uniform distance.
      std::vector<double> compact;
      const double lo = base.quantile(0.05), hi = base.quantile(0.95);
      for (int k = 0; k <= 40; ++k) compact.push_back(lo + (hi - lo) * k / 40.0);
      std::vector<double> errors;
      for (int n : opt.n_values) {
        const LogConcaveMeasure1D reg = regularize(base, n);
        out.push_back(make_check(prefix + ".N" + std::to_string(n) + ".normalization", "regularized measure is normalized",
                                 reg.total_mass_by_quadrature(), Relation::Within, 1.0, 1e-8));
        double min_curv = kInf;
        const double a = base.quantile(1e-3) - 4.0 / n, b = base.quantile(1.0 - 1e-3) + 4.0 / n;
        for (int k = 0; k <= 200; ++k) {
          const double x = a + (b - a) * k / 200.0;
          min_curv = std::min(min_curv, *reg.potential_d2(x));
        }
        out.push_back(make_check(prefix + ".N" + std::to_string(n) + ".curvature", "V_N'' at least 1/N", min_curv,
                                 Relation::AtLeast, 1.0 / n, 1e-6));
        double err = 0.0;
        for (double x : compact) err = std::max(err, std::abs(reg.potential(x) - base.potential(x)));
        errors.push_back(err);
      }
      double worst_ratio = 0.0;
      for (std::size_t i = 1; i < errors.size(); ++i) worst_ratio = std::max(worst_ratio, errors[i] / errors[i - 1]);
      out.push_back(with_note(make_check(prefix + ".convergence_trend", "local-uniform convergence", worst_ratio,
                                         Relation::AtMost, 1.0, 0.0),
                              "largest ratio of successive sup errors on the central 90% interval"));
      convergence.push_back({{"measure", spec}, {"n_values", opt.n_values}, {"sup_error", errors}});
    } catch (const std::exception& e) {
      out.push_back(error_record(prefix, "regularization", e));
    }
  }

  const auto pairs = opt.pairs.empty() ? default_floor_pairs() : opt.pairs;
  json floors = json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string a = pairs[i].source.get<std::string>(), b = pairs[i].target.get<std::string>();
    const std::string name = "caffarelli_floor[" + a + " -> " + b + "].N" + std::to_string(opt.floor_n);
    try {
      const Brenier1D map(regularize(parse_measure_spec(a), opt.floor_n), regularize(parse_measure_spec(b), opt.floor_n));
      const FloorCheck fc = caffarelli_floor_check(map, opt.floor_n, opt.floor_levels);
      CheckRecord c = make_check(name, "Hessian floor N^-2", fc.margin, Relation::AtLeast, 0.0, 0.0);
      c.pass = fc.margin > 0.0;
      c.note = "min Phi_N'' " + format_double(fc.min_phi2) + " at level " + format_double(fc.argmin_level);
      out.push_back(std::move(c));
      json entry = {{"source", a}, {"target", b}, {"min_phi2", fc.min_phi2}, {"floor", fc.floor},
                    {"levels", fc.levels}};
      if (i == 0) {
        // Grid study: a twice finer level grid must not expose a lower minimum by more than 5%.
        const FloorCheck fine = caffarelli_floor_check(map, opt.floor_n, 2 * opt.floor_levels);
        const double change = (fc.min_phi2 - fine.min_phi2) / fc.min_phi2;
        out.push_back(non_gating(make_check(name + ".grid_stability", "floor grid study", change, Relation::AtMost, 0.05, 0.0)));
        entry["fine_min_phi2"] = fine.min_phi2;
      }
      floors.push_back(entry);
    } catch (const std::exception& e) {
      out.push_back(error_record(name, "Hessian floor N^-2", e));
    }
  }
  if (extras) {
    (*extras)["convergence"] = convergence;
    (*extras)["floor"] = floors;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entropic cross-validation

namespace {

struct EntropicCase {
  std::string name;
  MeasurePair pair;
};

// Smallest centered square box [-L, L]^2 (L on a 0.5 grid) that provably
// carries 1 - 1e-6 of both measures.
Box2D covering_box(const Measure& mu, const Measure& nu) {
  for (double l = 2.0; l <= 40.0; l += 0.5) {
    Vec lo = Vec::Constant(2, -l), hi = Vec::Constant(2, l);
    if (mu.box_mass_lower_bound(lo, hi) >= 1.0 - 1e-6 && nu.box_mass_lower_bound(lo, hi) >= 1.0 - 1e-6) {
      return Box2D{-l, l, -l, l};
    }
  }
  throw DomainError("sinkhorn2d: no centered box up to [-40, 40]^2 carries the mass of both measures");
}

std::vector<EntropicCase> entropic_cases(const ExperimentConfig& cfg) {
  if (cfg.pair) return {{"custom", *cfg.pair}};
  Mat c1(2, 2), c2(2, 2);
  c1 << 1.0, 0.3, 0.3, 0.8;
  c2 << 1.0, -0.3, -0.3, 0.6;
  Vec m2(2);
  m2 << 0.3, -0.2;
  return {
      {"gaussian", {gaussian_spec(Vec::Zero(2), c1), gaussian_spec(m2, c2)}},
      {"product", {json::array({"gaussian(0, 1)", "subbotin(4)"}), json::array({"subbotin(4)", "gaussian(0.2, 0.8)"})}},
  };
}

}  // namespace

std::vector<CheckRecord> sinkhorn_suite(const ExperimentConfig& cfg, json* extras) {
  std::vector<CheckRecord> out;
  const auto& s = cfg.sinkhorn;
  json runs = json::array();
  const auto cases = entropic_cases(cfg);
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const auto& cs = cases[ci];
    const std::string prefix = "sinkhorn2d[" + cs.name + "]";
    try {
      const auto mu = build_measure(cs.pair.source);
      const auto nu = build_measure(cs.pair.target);
      require_same_dim("sinkhorn2d source", 2, mu->dim());
      require_same_dim("sinkhorn2d target", 2, nu->dim());
      std::shared_ptr<const TransportMap> oracle;
      try {
        oracle = build_map_experiment(cs.pair).map;
      } catch (const DomainError&) {
        oracle = nullptr;
      }
      const Box2D box = covering_box(*mu, *nu);
      const GridMeasure gm = discretize(*mu, box, s.grid, s.grid);
      const GridMeasure gn = discretize(*nu, box, s.grid, s.grid);
      const double h = box.diam() / s.grid;

      auto solve = [&](double eps) {
        SinkhornOptions opts;
        opts.schedule = geometric_schedule(std::max(eps, 0.1 * box.diam() * box.diam()), eps);
        opts.tol = s.tol;
        opts.max_iter = s.max_iter;
        opts.record_log = false;
        return std::make_shared<const EntropicPlan>(sinkhorn_solve(gm, gn, opts));
      };

      // Map and Hessian errors on the central mass region of the source grid.
      struct Errors {
        double map = 0.0, hessian = 0.0, symmetry = 0.0;
        int points = 0, flagged = 0;
      };
      auto compare = [&](const EntropicPlan& plan) {
        Errors e;
        const double step = s.hessian_step * h;
        for (int k : gm.central_region(s.central_mass)) {
          const Vec x = gm.node(k);
          const Vec te = entropic_map(plan, x);
          const Vec tt = oracle->map(x);
          e.map = std::max(e.map, (te - tt).norm() / std::max(tt.norm(), 1.0));
          const JacobianEstimate j = jacobian_fd(plan, x, step);
          e.symmetry = std::max(e.symmetry, j.symmetry_defect);
          if (!j.positive_definite) {
            ++e.flagged;
            continue;
          }
          const Mat a = oracle->hessian(x).matrix();
          e.hessian = std::max(e.hessian, (j.symmetrized - a).norm() / a.norm());
          ++e.points;
        }
        return e;
      };

      const double eps = s.epsilon_factor * h * h;
      const auto plan = solve(eps);
      CheckRecord conv = make_check(prefix + ".marginal_error", "Sinkhorn marginal conservation", plan->marginal_error(),
                                    Relation::AtMost, s.tol, 0.0);
      conv.pass = plan->converged() && plan->marginal_error() <= s.tol;
      out.push_back(conv);
      json run = {{"case", cs.name}, {"box", {box.x_lo, box.x_hi, box.y_lo, box.y_hi}}, {"grid", s.grid},
                  {"epsilon", eps}, {"iterations", plan->iterations()}, {"marginal_error", plan->marginal_error()}};
      if (oracle) {
        const Errors e = compare(*plan);
        out.push_back(make_check(prefix + ".map_error", "entropic map against the exact map", e.map, Relation::AtMost, 0.0,
                                 s.oracle_tolerance));
        CheckRecord hess = make_check(prefix + ".hessian_error", "entropic Hessian against the exact Hessian", e.hessian,
                                      Relation::AtMost, 0.0, s.oracle_tolerance);
        if (e.flagged > 0) {
          hess.pass = false;
          hess.note = std::to_string(e.flagged) + " central nodes with a non-SPD Jacobian";
        }
        out.push_back(hess);
        out.push_back(non_gating(make_check(prefix + ".symmetry_defect", "Jacobian symmetry defect", e.symmetry,
                                            Relation::AtMost, 0.0, 0.05)));
        run["map_error"] = e.map;
        run["hessian_error"] = e.hessian;
        run["central_points"] = e.points;

        // The schedule's nominal end point 1e-3 diam^2, for comparison only.
        const double literal = 1e-3 * box.diam() * box.diam();
        if (std::abs(literal - eps) > 1e-12 * literal) {
          const Errors el = compare(*solve(literal));
          CheckRecord lm = non_gating(make_check(prefix + ".map_error_nominal_epsilon", "entropic bias at 1e-3 diam^2",
                                                 el.map, Relation::AtMost, 0.0, s.oracle_tolerance));
          CheckRecord lh = non_gating(make_check(prefix + ".hessian_error_nominal_epsilon",
                                                 "entropic bias at 1e-3 diam^2", el.hessian, Relation::AtMost, 0.0,
                                                 s.oracle_tolerance));
          out.push_back(lm);
          out.push_back(lh);
          run["nominal_epsilon"] = literal;
          run["nominal_map_error"] = el.map;
          run["nominal_hessian_error"] = el.hessian;
        }
      }

      // Variance of the log-spectrum of the entropic Hessian field: reported, never gating.
      const EntropicTransportMap tm(plan, mu, nu, s.hessian_step * h);
      const long n_samples = std::min<long>(cfg.samples, 4000);
      const SpectralSampleSet set = collect_spectral_samples(tm, n_samples, sub_seed(cfg.seed, 900 + ci));
      if (set.size() >= 1000) {
        const VarianceReport r = eigen_log_variance_mc(set);
        for (std::size_t i = 0; i < r.variance.size(); ++i) {
          CheckRecord c = non_gating(make_check(prefix + ".variance.lambda_" + std::to_string(i + 1),
                                                "variance of log-eigenvalues at most 4", r.variance[i], Relation::AtMost,
                                                4.0, 3.0 * r.standard_error[i]));
          c.approximate = true;
          c.note = "samples " + std::to_string(r.samples) + ", flagged " + std::to_string(r.flagged);
          out.push_back(std::move(c));
        }
        run["variance"] = r.variance;
        run["flagged"] = r.flagged;
      }
      runs.push_back(run);
    } catch (const std::exception& e) {
      out.push_back(error_record(prefix, "entropic cross-validation", e));
    }
  }
  if (extras) (*extras)["runs"] = runs;
  return out;
}

// ---------------------------------------------------------------------------

ExperimentReport run_experiment(const ExperimentConfig& cfg, const SampleSink& sink) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport r;
  r.kind = kind_name(cfg.kind);
  r.version = library_version();
  r.seed = cfg.seed;
  r.config = to_json(cfg);
  r.config_hash = config_hash(cfg);
  auto append = [&](std::vector<CheckRecord> records) {
    for (auto& c : records) r.checks.push_back(std::move(c));
  };
  auto guarded = [&](const char* suite, auto&& fn) {
    try {
      append(fn());
    } catch (const std::exception& e) {
      r.checks.push_back(error_record(suite, suite, e));
    }
  };
  switch (cfg.kind) {
    case ExperimentKind::GeometrySelftest:
      guarded("metric", [&] { return metric_suite(cfg); });
      guarded("lipschitz", [&] { return lipschitz_suite(cfg); });
      break;
    case ExperimentKind::Variance:
      guarded("variance", [&] { return variance_suite(cfg, &r.extras, sink); });
      break;
    case ExperimentKind::Poincare:
      guarded("poincare", [&] { return poincare_suite(cfg, sink); });
      break;
    case ExperimentKind::Concentration:
      guarded("concentration", [&] { return concentration_suite(cfg, &r.extras, sink); });
      break;
    case ExperimentKind::Gamma2Check:
      guarded("gamma2", [&] { return gamma2_suite(cfg); });
      break;
    case ExperimentKind::Sinkhorn2D:
      guarded("sinkhorn2d", [&] { return sinkhorn_suite(cfg, &r.extras); });
      break;
    case ExperimentKind::Regularization:
      guarded("regularization", [&] { return regularization_suite(cfg, &r.extras); });
      break;
  }
  if (cfg.output.timing) {
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return r;
}

std::string samples_csv(const SpectralSampleSet& set) {
  std::ostringstream os;
  const int n = set.dim();
  for (int i = 0; i < n; ++i) os << (i ? "," : "") << "x_" << i + 1;
  for (int i = 0; i < n; ++i) os << ",lambda_" << i + 1;
  os << "\n";
  for (const auto& s : set.samples) {
    for (int i = 0; i < n; ++i) os << (i ? "," : "") << format_double(s.x(i));
    for (int i = 0; i < n; ++i) os << "," << format_double(s.spectrum[i]);
    os << "\n";
  }
  return os.str();
}

}  // namespace otspec
