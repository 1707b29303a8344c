// Command-line front end: dataset generation, single solves, hyperparameter
// search, training, prediction, evaluation and benchmarking for the
// quaternary-modulation CV-QKD key-rate toolkit.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cvqkd/dataset.hpp"
#include "cvqkd/errors.hpp"
#include "cvqkd/pipeline.hpp"
#include "cvqkd/solver.hpp"
#include "cvqkd/surrogate.hpp"
#include "cvqkd/tpe.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInfeasible = 2;
constexpr int kExitNumerical = 3;

void write_manifest(const fs::path& outdir, const std::string& kind,
                    const std::vector<std::string>& outputs) {
  json manifest;
  manifest["kind"] = kind;
  manifest["outputs"] = outputs;
  std::ofstream out(outdir / "manifest.json");
  out << manifest.dump(1) << '\n';
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw cvqkd::Error("cannot read " + path.string());
  return json::parse(in);
}

struct ArchFile {
  cvqkd::MLPArchitecture arch;
  cvqkd::LossHyper hyper;
  cvqkd::TrainConfig train;
};

ArchFile load_arch(const fs::path& path) {
  const json doc = load_json(path);
  ArchFile file;
  file.arch.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
  for (const auto& name : doc.at("activations"))
    file.arch.activations.push_back(cvqkd::activation_from_string(name.get<std::string>()));
  file.arch.dropout_rates = doc.at("dropout_rates").get<std::vector<double>>();
  file.hyper.gamma = doc.at("gamma").get<double>();
  file.hyper.epsilon = doc.at("epsilon").get<double>();
  file.train.batch_size = doc.value("batch_size", file.train.batch_size);
  file.train.epochs = doc.value("epochs", file.train.epochs);
  file.train.learning_rate = doc.value("learning_rate", file.train.learning_rate);
  file.train.validation_fraction = doc.value("validation_fraction", file.train.validation_fraction);
  file.train.seed = doc.value("seed", file.train.seed);
  file.arch.validate();
  file.hyper.validate();
  return file;
}

void save_trials(const std::vector<cvqkd::tpe::Trial>& history, const fs::path& path) {
  std::ofstream out(path);
  for (const cvqkd::tpe::Trial& trial : history) out << trial.to_json().dump() << '\n';
}

int run(CLI::App& app, int argc, char** argv) {
  fs::path outdir = "run";
  app.add_option("--out", outdir, "Run directory for outputs")->capture_default_str();

  // --- gen-data ---
  auto* gen = app.add_subcommand("gen-data", "Generate a labeled dataset over a parameter grid");
  fs::path gen_spec;
  gen->add_option("spec", gen_spec, "Dataset spec (JSON)")->required()->check(CLI::ExistingFile);
  gen->callback([&] {
    const cvqkd::DatasetSpec spec = cvqkd::DatasetSpec::load(gen_spec);
    const cvqkd::Dataset data = cvqkd::generate_dataset(spec);
    fs::create_directories(outdir);
    data.write(outdir / "dataset.tsv");
    write_manifest(outdir, "gen-data", {"dataset.tsv"});
    std::cout << "rows " << data.rows.size() << " -> " << (outdir / "dataset.tsv").string()
              << '\n';
  });

  // --- solve ---
  auto* solve = app.add_subcommand("solve", "Compute one certified key rate");
  double xi = 0.01, distance = 10.0, amplitude = 0.66, attenuation = 0.2, beta = 0.95;
  cvqkd::SolverConfig solver_config;
  solve->add_option("--xi", xi, "Excess noise (shot-noise units)")->capture_default_str();
  solve->add_option("--L", distance, "Distance in km")->capture_default_str();
  solve->add_option("--alpha", amplitude, "Coherent amplitude |α|")->capture_default_str();
  solve->add_option("--attenuation", attenuation, "dB/km")->capture_default_str();
  solve->add_option("--beta", beta, "Reconciliation efficiency")->capture_default_str();
  solve->add_option("--cutoff", solver_config.cutoff, "Photon-number cutoff")
      ->capture_default_str();
  solve->add_option("--max-iter", solver_config.max_fw_iterations, "Max first-step iterations")
      ->capture_default_str();
  bool solve_json = false;
  solve->add_flag("--json", solve_json, "Also write solve.json into the run directory");
  solve->callback([&] {
    cvqkd::ProtocolParams params;
    params.excess_noise = xi;
    params.distance_km = distance;
    params.amplitude = amplitude;
    params.attenuation_db_per_km = attenuation;
    params.reconciliation_eff = beta;
    const cvqkd::KeyRateResult result = cvqkd::compute_key_rate(params, solver_config);
    std::cout << result.report();
    if (solve_json) {
      fs::create_directories(outdir);
      json doc;
      doc["status"] = cvqkd::to_string(result.status);
      doc["upper_bound"] = result.upper_bound_objective;
      doc["lower_bound"] = result.lower_bound_objective;
      doc["delta_EC"] = result.delta_EC;
      doc["key_rate"] = result.key_rate;
      doc["fw_iterations"] = result.fw_iterations;
      doc["fw_gap"] = result.fw_gap;
      std::ofstream out(outdir / "solve.json");
      out << doc.dump(1) << '\n';
      write_manifest(outdir, "solve", {"solve.json"});
    }
    if (result.status == cvqkd::SolveStatus::Infeasible) std::exit(kExitInfeasible);
  });

  // --- search ---
  auto* search = app.add_subcommand("search", "TPE hyperparameter search + final training");
  fs::path search_space, search_data;
  cvqkd::tpe::TPEConfig tpe_config;
  cvqkd::TrainConfig search_train;
  double search_test_fraction = 0.05;
  search->add_option("space", search_space, "Search space (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  search->add_option("dataset", search_data, "Dataset file")->required()->check(CLI::ExistingFile);
  search->add_option("--trials", tpe_config.max_trials, "SMBO budget")->capture_default_str();
  search->add_option("--startup", tpe_config.n_startup_random, "Random startup trials")
      ->capture_default_str();
  search->add_option("--quantile", tpe_config.quantile, "Good/bad split quantile")
      ->capture_default_str();
  search->add_option("--candidates", tpe_config.n_ei_candidates, "EI candidates per proposal")
      ->capture_default_str();
  search->add_option("--seed", tpe_config.seed, "Search seed")->capture_default_str();
  search->add_option("--epochs", search_train.epochs, "Training epochs per trial")
      ->capture_default_str();
  search->add_option("--test-fraction", search_test_fraction, "Held-out fraction")
      ->capture_default_str();
  search->callback([&] {
    const auto space = cvqkd::tpe::SearchSpace::load(search_space);
    const cvqkd::Dataset data = cvqkd::Dataset::read(search_data);
    search_train.seed = tpe_config.seed;
    const cvqkd::SplitResult split =
        cvqkd::split_and_standardize(data, search_test_fraction, tpe_config.seed);
    const cvqkd::AutoMLResult automl =
        cvqkd::run_auto_ml(split.train, space, tpe_config, search_train);
    fs::create_directories(outdir);
    automl.model.save(outdir / "model.json");
    save_trials(automl.history, outdir / "trials.jsonl");
    const cvqkd::EvaluationReport report =
        cvqkd::emit_report(automl.model, split.test, {}, outdir);
    write_manifest(outdir, "search",
                   {"model.json", "trials.jsonl", "report.json", "rate_vs_distance.tsv",
                    "deviation_histogram.tsv"});
    std::cout << "best trial " << automl.best_index << " objective " << automl.best.objective
              << "\nheld-out secure fraction " << report.summary.secure_fraction << '\n';
  });

  // --- train ---
  auto* train_cmd = app.add_subcommand("train", "Train one architecture on a dataset");
  fs::path train_arch, train_data;
  double train_test_fraction = 0.05;
  train_cmd->add_option("arch", train_arch, "Architecture + loss + training config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("dataset", train_data, "Dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--test-fraction", train_test_fraction, "Held-out fraction")
      ->capture_default_str();
  train_cmd->callback([&] {
    const ArchFile file = load_arch(train_arch);
    const cvqkd::Dataset data = cvqkd::Dataset::read(train_data);
    const cvqkd::SplitResult split =
        cvqkd::split_and_standardize(data, train_test_fraction, file.train.seed);
    const cvqkd::Network net = cvqkd::init_network(file.arch, file.train.seed);
    const cvqkd::TrainResult result =
        cvqkd::train(net, split.train.feature_matrix(), split.train.labels(), split.preproc,
                     file.hyper, file.train);
    fs::create_directories(outdir);
    result.model.save(outdir / "model.json");
    json summary;
    summary["best_validation_loss"] = result.best_validation_loss;
    summary["epochs"] = file.train.epochs;
    summary["train_rows"] = split.train.rows.size();
    summary["test_rows"] = split.test.rows.size();
    std::ofstream out(outdir / "training_summary.json");
    out << summary.dump(1) << '\n';
    write_manifest(outdir, "train", {"model.json", "training_summary.json"});
    std::cout << "best validation loss " << result.best_validation_loss << '\n';
  });

  // --- predict ---
  auto* predict = app.add_subcommand("predict", "Predict key rates for feature rows");
  fs::path predict_model, predict_features;
  predict->add_option("model", predict_model, "Trained model (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("features", predict_features,
                      "Text file, one sample of 29 whitespace-separated values per line")
      ->required()
      ->check(CLI::ExistingFile);
  predict->callback([&] {
    const cvqkd::TrainedModel model = cvqkd::TrainedModel::load(predict_model);
    std::ifstream in(predict_features);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      cvqkd::FeatureVector features;
      for (int i = 0; i < cvqkd::FeatureVector::kSize; ++i)
        if (!(row >> features[i]))
          throw cvqkd::Error("predict: expected 29 values per line");
      std::cout << cvqkd::format_double(cvqkd::predict_key_rate(model, features)) << '\n';
    }
  });

  // --- evaluate ---
  auto* evaluate = app.add_subcommand("evaluate", "Secure-fraction / tightness evaluation");
  fs::path eval_model, eval_data;
  evaluate->add_option("model", eval_model, "Trained model (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("dataset", eval_data, "Dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->callback([&] {
    const cvqkd::TrainedModel model = cvqkd::TrainedModel::load(eval_model);
    const cvqkd::Dataset data = cvqkd::Dataset::read(eval_data);
    const cvqkd::EvaluationSummary summary =
        cvqkd::evaluate_model(model, data.feature_matrix(), data.labels());
    std::cout << "rows            " << summary.count << '\n'
              << "secure fraction " << summary.secure_fraction << '\n'
              << "secure in [-20%,0] " << summary.secure_within_20 << '\n'
              << "secure in [-40%,0] " << summary.secure_within_40 << '\n';
  });

  // --- bench ---
  auto* bench = app.add_subcommand("bench", "Wall-clock solver vs predictor comparison");
  fs::path bench_model, bench_points;
  cvqkd::SolverConfig bench_solver;
  bench_solver.cutoff = 6;
  bench->add_option("model", bench_model, "Trained model (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  bench->add_option("points", bench_points, "JSON array of {xi, L, alpha}")
      ->required()
      ->check(CLI::ExistingFile);
  bench->add_option("--cutoff", bench_solver.cutoff, "Solver cutoff")->capture_default_str();
  bench->callback([&] {
    const cvqkd::TrainedModel model = cvqkd::TrainedModel::load(bench_model);
    std::vector<cvqkd::ProtocolParams> points;
    for (const json& p : load_json(bench_points)) {
      cvqkd::ProtocolParams params;
      params.excess_noise = p.at("xi").get<double>();
      params.distance_km = p.at("L").get<double>();
      params.amplitude = p.at("alpha").get<double>();
      points.push_back(params);
    }
    const auto table = cvqkd::benchmark_speedup(model, points, bench_solver);
    fs::create_directories(outdir);
    std::ofstream out(outdir / "bench_ratios.tsv");
    out << "xi\tL_km\talpha\tsolver_seconds\tpredict_seconds\tratio\n";
    for (const auto& bp : table) {
      out << cvqkd::format_double(bp.excess_noise) << '\t' << cvqkd::format_double(bp.distance_km)
          << '\t' << cvqkd::format_double(bp.amplitude) << '\t'
          << cvqkd::format_double(bp.solver_seconds) << '\t'
          << cvqkd::format_double(bp.predict_seconds) << '\t' << cvqkd::format_double(bp.ratio)
          << '\n';
      std::cout << "xi=" << bp.excess_noise << " L=" << bp.distance_km
                << " ratio=" << bp.ratio << '\n';
    }
    write_manifest(outdir, "bench", {"bench_ratios.tsv"});
  });

  // --- report ---
  auto* report = app.add_subcommand("report", "Full evaluation report with plot-ready tables");
  fs::path report_model, report_data, report_bench;
  report->add_option("--model", report_model, "Trained model (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--dataset", report_data, "Test dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--bench-points", report_bench, "Optional JSON array of {xi, L, alpha}")
      ->check(CLI::ExistingFile);
  cvqkd::SolverConfig report_solver;
  report_solver.cutoff = 6;
  report->add_option("--cutoff", report_solver.cutoff, "Solver cutoff for benchmark points")
      ->capture_default_str();
  report->callback([&] {
    const cvqkd::TrainedModel model = cvqkd::TrainedModel::load(report_model);
    const cvqkd::Dataset data = cvqkd::Dataset::read(report_data);
    std::vector<cvqkd::BenchmarkPoint> bench_table;
    if (!report_bench.empty()) {
      std::vector<cvqkd::ProtocolParams> points;
      for (const json& p : load_json(report_bench)) {
        cvqkd::ProtocolParams params;
        params.excess_noise = p.at("xi").get<double>();
        params.distance_km = p.at("L").get<double>();
        params.amplitude = p.at("alpha").get<double>();
        points.push_back(params);
      }
      bench_table = cvqkd::benchmark_speedup(model, points, report_solver);
    }
    const cvqkd::EvaluationReport result =
        cvqkd::emit_report(model, data, bench_table, outdir);
    std::cout << "secure fraction " << result.summary.secure_fraction << " over "
              << result.summary.count << " rows -> " << outdir.string() << '\n';
  });

  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Key-rate toolkit for quaternary-modulation CV-QKD: certified numerical "
               "solves plus an AutoML surrogate for near-real-time prediction"};
  try {
    return run(app, argc, argv);
  } catch (const cvqkd::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const cvqkd::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const cvqkd::tpe::AllTrialsFailedError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
