#pragma once

#include <filesystem>
#include <optional>

#include "cvqkd/dataset.hpp"
#include "cvqkd/solver.hpp"
#include "cvqkd/surrogate.hpp"
#include "cvqkd/tpe.hpp"

namespace cvqkd {

struct NoiseInterval {
  double lo = 0;
  double hi = 0;
  int samples = 0;
};

struct DatasetSpec {
  std::string name;
  std::string protocol = "qpsk-heterodyne";
  std::vector<NoiseInterval> noise_intervals;
  std::vector<double> distance_grid_km;
  std::vector<double> amplitude_grid;
  double attenuation_db_per_km = 0.2;
  double reconciliation_eff = 0.95;
  SolverConfig solver;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 → hardware concurrency

  void validate() const;
  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& doc);
  static DatasetSpec load(const std::filesystem::path& path);
};

/// Solve the grid (parallel over points, output order fixed by grid index),
/// keep rows with positive certified key rate, record exclusions in the
/// metadata block. Deterministic for a fixed spec.
Dataset generate_dataset(const DatasetSpec& spec);

struct SplitResult {
  Dataset train;
  Dataset test;
  Preprocessor preproc;  // fit on the training split only
};

SplitResult split_and_standardize(const Dataset& data, double test_fraction, std::uint64_t seed);

struct AutoMLResult {
  TrainedModel model;  // best trial's configuration, retrained
  std::vector<tpe::Trial> history;
  tpe::Trial best;
  int best_index = -1;
};

/// TPE search over network/loss hyperparameters with the training evaluator;
/// batch size, gamma and epsilon come from each trial's config, everything
/// else from `base` (epochs, learning rate, validation fraction).
AutoMLResult run_auto_ml(const Dataset& train, const tpe::SearchSpace& space,
                         const tpe::TPEConfig& tpe_config, const TrainConfig& base);

/// Map a search-space config onto concrete training inputs.
struct TrialSetup {
  MLPArchitecture arch;
  LossHyper hyper;
  int batch_size = 64;
};
TrialSetup interpret_config(const tpe::Config& config);

struct BenchmarkPoint {
  double excess_noise = 0;
  double distance_km = 0;
  double amplitude = 0;
  double solver_seconds = 0;
  double predict_seconds = 0;  // per sample
  double ratio = 0;
  double solver_rate = 0;
  double predicted_rate = 0;
};

std::vector<BenchmarkPoint> benchmark_speedup(const TrainedModel& model,
                                              const std::vector<ProtocolParams>& points,
                                              const SolverConfig& solver_config);

struct EvaluationReport {
  EvaluationSummary summary;
  std::vector<BenchmarkPoint> bench;
  // per-row table backing the rate-vs-distance curves
  struct RatePoint {
    double excess_noise, distance_km, amplitude, true_rate, predicted_rate;
  };
  std::vector<RatePoint> rate_table;
};

/// Evaluate on the test set and write report.json plus plot-ready TSV tables
/// (and a manifest) into `outdir`.
EvaluationReport emit_report(const TrainedModel& model, const Dataset& test,
                             const std::vector<BenchmarkPoint>& bench,
                             const std::filesystem::path& outdir);

}  // namespace cvqkd
