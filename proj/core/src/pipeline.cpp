#include "cvqkd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <thread>
#include <tuple>

#include "cvqkd/errors.hpp"

namespace cvqkd {
namespace {

using nlohmann::json;

json solver_to_json(const SolverConfig& c) {
  return json{{"cutoff", c.cutoff},
              {"max_fw_iterations", c.max_fw_iterations},
              {"fw_gap_tol", c.fw_gap_tol},
              {"log_floor", c.log_floor},
              {"sdp_feas_tol", c.sdp_feas_tol},
              {"sdp_gap_tol", c.sdp_gap_tol},
              {"line_search_tol", c.line_search_tol}};
}

SolverConfig solver_from_json(const json& doc) {
  SolverConfig c;
  c.cutoff = doc.value("cutoff", c.cutoff);
  c.max_fw_iterations = doc.value("max_fw_iterations", c.max_fw_iterations);
  c.fw_gap_tol = doc.value("fw_gap_tol", c.fw_gap_tol);
  c.log_floor = doc.value("log_floor", c.log_floor);
  c.sdp_feas_tol = doc.value("sdp_feas_tol", c.sdp_feas_tol);
  c.sdp_gap_tol = doc.value("sdp_gap_tol", c.sdp_gap_tol);
  c.line_search_tol = doc.value("line_search_tol", c.line_search_tol);
  return c;
}

struct GridPoint {
  double xi, distance_km, amplitude;
};

void parallel_for(size_t count, int workers, const std::function<void(size_t)>& body) {
  if (workers <= 0) workers = int(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, int(count)));
  if (workers == 1) {
    for (size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

void DatasetSpec::validate() const {
  if (noise_intervals.empty() || distance_grid_km.empty() || amplitude_grid.empty())
    throw Error("DatasetSpec: empty grid");
  for (const NoiseInterval& iv : noise_intervals) {
    if (!(iv.lo <= iv.hi) || iv.lo < 0) throw Error("DatasetSpec: bad noise interval");
    if (iv.samples < 1) throw Error("DatasetSpec: interval needs at least one sample");
  }
  for (size_t i = 1; i < noise_intervals.size(); ++i)
    if (noise_intervals[i].lo < noise_intervals[i - 1].hi)
      throw Error("DatasetSpec: noise intervals must be non-overlapping and sorted");
  for (double a : amplitude_grid)
    if (!(a > 0)) throw Error("DatasetSpec: amplitudes must be positive");
  for (double l : distance_grid_km)
    if (l < 0) throw Error("DatasetSpec: distances must be non-negative");
  solver.validate();
}

json DatasetSpec::to_json() const {
  json intervals = json::array();
  for (const NoiseInterval& iv : noise_intervals)
    intervals.push_back(json{{"lo", iv.lo}, {"hi", iv.hi}, {"samples", iv.samples}});
  return json{{"name", name},
              {"protocol", protocol},
              {"noise_intervals", intervals},
              {"distance_grid_km", distance_grid_km},
              {"amplitude_grid", amplitude_grid},
              {"attenuation_db_per_km", attenuation_db_per_km},
              {"reconciliation_efficiency", reconciliation_eff},
              {"solver", solver_to_json(solver)},
              {"seed", seed},
              {"workers", workers}};
}

DatasetSpec DatasetSpec::from_json(const json& doc) {
  DatasetSpec spec;
  spec.name = doc.value("name", "");
  spec.protocol = doc.value("protocol", spec.protocol);
  for (const json& iv : doc.at("noise_intervals"))
    spec.noise_intervals.push_back(
        {iv.at("lo").get<double>(), iv.at("hi").get<double>(), iv.at("samples").get<int>()});
  spec.distance_grid_km = doc.at("distance_grid_km").get<std::vector<double>>();
  spec.amplitude_grid = doc.at("amplitude_grid").get<std::vector<double>>();
  spec.attenuation_db_per_km = doc.value("attenuation_db_per_km", spec.attenuation_db_per_km);
  spec.reconciliation_eff = doc.value("reconciliation_efficiency", spec.reconciliation_eff);
  if (doc.contains("solver")) spec.solver = solver_from_json(doc["solver"]);
  spec.seed = doc.value("seed", spec.seed);
  spec.workers = doc.value("workers", spec.workers);
  spec.validate();
  return spec;
}

DatasetSpec DatasetSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset spec: " + path.string());
  return from_json(json::parse(in));
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();

  // Noise samples are drawn up front, sequentially, so the grid is fixed
  // before any parallel work starts.
  std::mt19937_64 rng(spec.seed);
  std::vector<GridPoint> grid;
  for (const NoiseInterval& iv : spec.noise_intervals) {
    std::uniform_real_distribution<double> draw(iv.lo, iv.hi);
    for (int s = 0; s < iv.samples; ++s) {
      const double xi = draw(rng);
      for (double l : spec.distance_grid_km)
        for (double a : spec.amplitude_grid) grid.push_back({xi, l, a});
    }
  }

  struct PointResult {
    std::optional<DatasetRow> row;
    bool failed = false;
    bool nonpositive = false;
    bool infeasible = false;
  };
  std::vector<PointResult> results(grid.size());

  parallel_for(grid.size(), spec.workers, [&](size_t i) {
    const GridPoint& point = grid[i];
    ProtocolParams params;
    params.amplitude = point.amplitude;
    params.distance_km = point.distance_km;
    params.excess_noise = point.xi;
    params.attenuation_db_per_km = spec.attenuation_db_per_km;
    params.reconciliation_eff = spec.reconciliation_eff;
    try {
      const KeyRateResult result = compute_key_rate(params, spec.solver);
      if (result.status == SolveStatus::Infeasible) {
        results[i].infeasible = true;
        return;
      }
      if (!(result.key_rate > 0)) {
        results[i].nonpositive = true;
        return;
      }
      DatasetRow row;
      const FeatureVector features = assemble_features(
          simulate_moments(params), gram_matrix(params), point.xi, params.probs);
      row.features = features.values;
      row.key_rate = result.key_rate;
      row.distance_km = point.distance_km;
      row.amplitude = point.amplitude;
      row.excess_noise = point.xi;
      row.protocol = spec.protocol;
      row.digest = result.digest();
      results[i].row = std::move(row);
    } catch (const std::exception&) {
      results[i].failed = true;
    }
  });

  Dataset data;
  int excluded = 0, failed = 0, infeasible = 0;
  for (PointResult& r : results) {
    if (r.row)
      data.rows.push_back(std::move(*r.row));
    else if (r.nonpositive)
      ++excluded;
    else if (r.infeasible)
      ++infeasible;
    else
      ++failed;
  }
  data.metadata.push_back("cvqkd-dataset v1");
  data.metadata.push_back("spec " + spec.to_json().dump());
  data.metadata.push_back("grid_points " + std::to_string(grid.size()));
  data.metadata.push_back("excluded_nonpositive " + std::to_string(excluded));
  data.metadata.push_back("infeasible_points " + std::to_string(infeasible));
  data.metadata.push_back("failed_points " + std::to_string(failed));
  return data;
}

SplitResult split_and_standardize(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (data.rows.size() < 2) throw Error("split_and_standardize: need at least two rows");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error("split_and_standardize: test fraction must be in (0,1)");
  std::vector<size_t> order(data.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const size_t n_test = std::clamp<size_t>(
      size_t(std::llround(double(order.size()) * test_fraction)), 1, order.size() - 1);
  SplitResult split;
  for (size_t i = 0; i < order.size(); ++i)
    (i < n_test ? split.test : split.train).rows.push_back(data.rows[order[i]]);

  const std::string origin =
      "split test " + std::to_string(n_test) + "/" + std::to_string(order.size()) + " seed " +
      std::to_string(seed);
  split.train.metadata = data.metadata;
  split.train.metadata.push_back(origin + " part train");
  split.test.metadata = data.metadata;
  split.test.metadata.push_back(origin + " part test");

  split.preproc = Preprocessor::fit(split.train.feature_matrix());
  return split;
}

TrialSetup interpret_config(const tpe::Config& config) {
  TrialSetup setup;
  setup.arch.layer_sizes.push_back(FeatureVector::kSize);
  for (int layer = 1; layer <= 4; ++layer) {
    const std::string prefix = "hidden" + std::to_string(layer) + "_";
    auto units = config.find(prefix + "units");
    if (units == config.end()) break;
    setup.arch.layer_sizes.push_back(units->second.get<int>());
    setup.arch.activations.push_back(
        activation_from_string(config.at(prefix + "activation").get<std::string>()));
    setup.arch.dropout_rates.push_back(config.at(prefix + "dropout").get<double>());
  }
  setup.arch.layer_sizes.push_back(1);
  setup.arch.validate();
  setup.hyper.gamma = config.at("gamma").get<double>();
  setup.hyper.epsilon = config.at("epsilon").get<double>();
  setup.batch_size = config.at("batch_size").get<int>();
  return setup;
}

AutoMLResult run_auto_ml(const Dataset& train_data, const tpe::SearchSpace& space,
                         const tpe::TPEConfig& tpe_config, const TrainConfig& base) {
  if (train_data.rows.empty()) throw Error("run_auto_ml: empty training set");
  const Eigen::MatrixXd features = train_data.feature_matrix();
  const Eigen::VectorXd labels = train_data.labels();
  const Preprocessor preproc = Preprocessor::fit(features);

  auto trial_seed = [&](int index) {
    return base.seed + 1000003ULL * std::uint64_t(index + 1);
  };

  int trial_index = 0;
  auto evaluator = [&](const tpe::Config& config) {
    const TrialSetup setup = interpret_config(config);
    TrainConfig cfg = base;
    cfg.batch_size = setup.batch_size;
    cfg.seed = trial_seed(trial_index);
    ++trial_index;
    const Network net = init_network(setup.arch, cfg.seed);
    return train(net, features, labels, preproc, setup.hyper, cfg).best_validation_loss;
  };

  tpe::SmboResult smbo = tpe::smbo_run(space, evaluator, tpe_config);

  // Retrain the winning configuration with its original seed; training is
  // deterministic, so this reproduces the best trial's parameters.
  const TrialSetup setup = interpret_config(smbo.best.config);
  TrainConfig cfg = base;
  cfg.batch_size = setup.batch_size;
  cfg.seed = trial_seed(smbo.best_index);
  const Network net = init_network(setup.arch, cfg.seed);
  TrainResult final = train(net, features, labels, preproc, setup.hyper, cfg);

  AutoMLResult result;
  result.model = std::move(final.model);
  result.history = std::move(smbo.history);
  result.best = std::move(smbo.best);
  result.best_index = smbo.best_index;
  return result;
}

std::vector<BenchmarkPoint> benchmark_speedup(const TrainedModel& model,
                                              const std::vector<ProtocolParams>& points,
                                              const SolverConfig& solver_config) {
  using Clock = std::chrono::steady_clock;
  std::vector<BenchmarkPoint> table;
  for (const ProtocolParams& params : points) {
    BenchmarkPoint bp;
    bp.excess_noise = params.excess_noise;
    bp.distance_km = params.distance_km;
    bp.amplitude = params.amplitude;

    const auto t0 = Clock::now();
    const KeyRateResult result = compute_key_rate(params, solver_config);
    const auto t1 = Clock::now();
    bp.solver_seconds = std::chrono::duration<double>(t1 - t0).count();
    bp.solver_rate = result.key_rate;

    const FeatureVector features = assemble_features(
        simulate_moments(params), gram_matrix(params), params.excess_noise, params.probs);
    // Warm up once, then time a batch of single-sample predictions.
    bp.predicted_rate = predict_key_rate(model, features);
    const int reps = 200;
    const auto t2 = Clock::now();
    double sink = 0;
    for (int r = 0; r < reps; ++r) sink += predict_key_rate(model, features);
    const auto t3 = Clock::now();
    (void)sink;
    bp.predict_seconds = std::chrono::duration<double>(t3 - t2).count() / reps;
    bp.ratio = bp.solver_seconds / bp.predict_seconds;
    table.push_back(bp);
  }
  return table;
}

EvaluationReport emit_report(const TrainedModel& model, const Dataset& test,
                             const std::vector<BenchmarkPoint>& bench,
                             const std::filesystem::path& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);

  EvaluationReport report;
  const Eigen::MatrixXd features = test.feature_matrix();
  const Eigen::VectorXd labels = test.labels();
  report.summary = evaluate_model(model, features, labels);
  report.bench = bench;

  const Eigen::VectorXd predicted = predict_key_rate_batch(model, features);
  for (int i = 0; i < test.size(); ++i) {
    const DatasetRow& row = test.rows[size_t(i)];
    report.rate_table.push_back(
        {row.excess_noise, row.distance_km, row.amplitude, row.key_rate, predicted(i)});
  }
  std::sort(report.rate_table.begin(), report.rate_table.end(), [](const auto& a, const auto& b) {
    return std::tie(a.excess_noise, a.distance_km, a.amplitude) <
           std::tie(b.excess_noise, b.distance_km, b.amplitude);
  });

  std::vector<std::string> outputs;
  {
    std::ofstream out(outdir / "rate_vs_distance.tsv");
    out << "xi\tL_km\talpha\tkey_rate\tpredicted\trel_deviation\n";
    for (const auto& p : report.rate_table)
      out << format_double(p.excess_noise) << '\t' << format_double(p.distance_km) << '\t'
          << format_double(p.amplitude) << '\t' << format_double(p.true_rate) << '\t'
          << format_double(p.predicted_rate) << '\t'
          << format_double((p.predicted_rate - p.true_rate) / p.true_rate) << '\n';
    outputs.push_back("rate_vs_distance.tsv");
  }
  {
    std::ofstream out(outdir / "deviation_histogram.tsv");
    out << "bin_lo\tbin_hi\tfraction\n";
    for (size_t b = 0; b < report.summary.histogram.size(); ++b)
      out << format_double(report.summary.bin_edges[b]) << '\t'
          << format_double(report.summary.bin_edges[b + 1]) << '\t'
          << format_double(report.summary.histogram[b]) << '\n';
    outputs.push_back("deviation_histogram.tsv");
  }
  if (!bench.empty()) {
    std::ofstream out(outdir / "bench_ratios.tsv");
    out << "xi\tL_km\talpha\tsolver_seconds\tpredict_seconds\tratio\n";
    for (const BenchmarkPoint& bp : bench)
      out << format_double(bp.excess_noise) << '\t' << format_double(bp.distance_km) << '\t'
          << format_double(bp.amplitude) << '\t' << format_double(bp.solver_seconds) << '\t'
          << format_double(bp.predict_seconds) << '\t' << format_double(bp.ratio) << '\n';
    outputs.push_back("bench_ratios.tsv");
  }
  {
    json doc;
    doc["test_rows"] = report.summary.count;
    doc["secure_fraction"] = report.summary.secure_fraction;
    doc["secure_count"] = report.summary.secure_count;
    doc["secure_within_20"] = report.summary.secure_within_20;
    doc["secure_within_40"] = report.summary.secure_within_40;
    doc["excess_noise_referencing"] = "channel-input";
    doc["preprocessing"] = "z-score on train split; labels y* = -log10(y)";
    if (!bench.empty()) {
      double min_ratio = bench.front().ratio, max_ratio = bench.front().ratio;
      for (const BenchmarkPoint& bp : bench) {
        min_ratio = std::min(min_ratio, bp.ratio);
        max_ratio = std::max(max_ratio, bp.ratio);
      }
      doc["speedup_min"] = min_ratio;
      doc["speedup_max"] = max_ratio;
    }
    std::ofstream out(outdir / "report.json");
    out << doc.dump(1) << '\n';
    outputs.push_back("report.json");
  }
  {
    json manifest;
    manifest["kind"] = "cvqkd-report";
    manifest["outputs"] = outputs;
    std::ofstream out(outdir / "manifest.json");
    out << manifest.dump(1) << '\n';
  }
  return report;
}

}  // namespace cvqkd
