#pragma once

// Dispatch from a validated configuration to the module suites.

#include "otspec/brenier.hpp"
#include "otspec/concentration.hpp"
#include "otspec/experiment_config.hpp"
#include "otspec/experiment_report.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace otspec {

// A transport map under test, with the measures it was built from.
struct MapExperiment {
  std::string name;
  TransportMapPtr map;
  std::shared_ptr<const Brenier1D> one_dim;  // set for 1D maps
};

std::shared_ptr<const Measure> build_measure(const MeasureSpec& spec);
MapExperiment build_map_experiment(const MeasurePair& pair);

// Six 1D pairs, a 3D product, a 4D Gaussian pair and uniform-ball to Gaussian
// radial pairs in dimensions 2, 3, 5, 8.
std::vector<MeasurePair> catalog_pairs();
// The eight 1D measures of the variance grid.
std::vector<std::string> variance_grid_measures();
// Three pairs for the regularization floor check.
std::vector<MeasurePair> default_floor_pairs();

// Receives the spectral samples of each experiment (for --dump-samples).
using SampleSink = std::function<void(const std::string& experiment, const SpectralSampleSet& set)>;

// Individual suites; each returns its records in a fixed order.
std::vector<CheckRecord> metric_suite(const ExperimentConfig& cfg);
std::vector<CheckRecord> lipschitz_suite(const ExperimentConfig& cfg);
std::vector<CheckRecord> gamma2_suite(const ExperimentConfig& cfg);
std::vector<CheckRecord> variance_suite(const ExperimentConfig& cfg, nlohmann::json* extras = nullptr,
                                        const SampleSink& sink = {});
std::vector<CheckRecord> poincare_suite(const ExperimentConfig& cfg, const SampleSink& sink = {});
std::vector<CheckRecord> concentration_suite(const ExperimentConfig& cfg, nlohmann::json* extras = nullptr,
                                             const SampleSink& sink = {});
std::vector<CheckRecord> regularization_suite(const ExperimentConfig& cfg, nlohmann::json* extras = nullptr);
std::vector<CheckRecord> sinkhorn_suite(const ExperimentConfig& cfg, nlohmann::json* extras = nullptr);

// Runs every suite for cfg.kind. Module errors become failing records and the
// run continues.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const SampleSink& sink = {});

// Plot-ready CSV of Lambda(X) samples: x_1..x_n, lambda_1..lambda_n.
std::string samples_csv(const SpectralSampleSet& set);

}  // namespace otspec
