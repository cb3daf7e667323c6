#pragma once

// End-to-end experiment driver: split, fit, calibrate, predict, evaluate,
// over seeded repetitions, for CTI and the baseline methods.

#include "cti/common.hpp"
#include "cti/evaluation.hpp"
#include "cti/interval_engine.hpp"
#include "cti/quantile_models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cti {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"cti-forest", "cti-pinball", "cti-harmonic",
                                          "split", "cqr"};
  return m;
}

struct ExperimentConfig {
  std::string dataset_path;  // exactly one of dataset_path / scenario
  std::string scenario;
  Index n_samples = 5000;    // rows generated per repetition for scenarios
  std::string response = "y";

  double alpha = 0.1;
  int K = 40;
  double tau_min = 0.001;
  double tau_max = 0.999;
  std::vector<std::string> methods{"cti-forest", "split", "cqr"};
  std::string baseline_model = "forest";  // model behind split and cqr
  PinballConfig pinball;
  ForestConfig forest;
  BoundaryPolicy boundary = BoundaryPolicy::Clamp;
  bool fallback_shortest = false;
  int histogram_bins = 50;

  int repetitions = 10;
  std::uint64_t seed = 0;
  std::string out_dir = "results";
  int threads = 0;  // 0 = hardware concurrency
};

struct ConfigProblem {
  std::string field;
  std::string message;
};

/// Empty iff run() would start.
std::vector<ConfigProblem> validate(const ExperimentConfig& cfg);

/// Applies one "key = value" setting; throws InvalidArgument on an unknown
/// key or unparsable value.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Flat key-value file: "key = value" per line, '#' starts a comment.
ExperimentConfig load_config(const std::string& path);

/// Canonical "key = value" dump; also the head of the run manifest.
std::string describe(const ExperimentConfig& cfg);

/// Stem of the dataset path, or the scenario name.
std::string dataset_name(const ExperimentConfig& cfg);

/// Seeds consumed by repetition r.
struct RepetitionSeeds {
  std::uint64_t split = 0;
  std::uint64_t data = 0;
  std::uint64_t forest = 0;
  std::uint64_t pinball = 0;
};
RepetitionSeeds repetition_seeds(std::uint64_t root, int r);

/// Per-method result of one repetition, in standardized response units.
struct MethodOutcome {
  std::string method;
  bool partition_based = false;
  double coverage = 0.0;
  double size = 0.0;
  double n_components = 0.0;
  double clamp_rate = 0.0;
  double threshold = 0.0;

  Eigen::VectorXd y;          // test responses
  Eigen::VectorXi covered;    // 0/1 per test row
  Eigen::VectorXd set_size;   // per test row
  Eigen::VectorXi components; // per test row
  Eigen::VectorXd lo, hi;     // hull of each set
  std::vector<Index> rows;    // test row ids in the source data

  std::optional<LengthHistogram> histogram;
  Eigen::MatrixXd test_grids;  // partition-based methods with one model
};

/// Runs every configured method on one split of data.
std::vector<MethodOutcome> run_repetition(const ExperimentConfig& cfg, const Dataset& data,
                                          const RepetitionSeeds& seeds);

struct RunResult {
  std::vector<std::string> files;
  std::vector<AggregatedReport> reports;
  int failed_repetitions = 0;
};

/// Runs all repetitions and writes per-repetition CSVs, histograms, grids,
/// "{dataset}_summary.csv" and "{dataset}_manifest.txt" under out_dir.
/// Throws std::runtime_error if every repetition fails.
RunResult run(const ExperimentConfig& cfg);

}  // namespace cti
