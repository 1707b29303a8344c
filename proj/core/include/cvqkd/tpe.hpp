#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvqkd/errors.hpp"

namespace cvqkd::tpe {

using json = nlohmann::json;

/// A config maps active parameter names to values; keys of conditional
/// parameters are present only when their parent condition holds.
using Config = std::map<std::string, json>;

struct Parameter {
  enum class Kind { Categorical, Uniform };

  std::string name;
  Kind kind = Kind::Categorical;
  std::vector<json> choices;  // Categorical
  double lo = 0, hi = 0;      // Uniform
  // Conditional parameters carry the parent name and the activating value.
  std::string parent;
  json active_value;

  bool conditional() const { return !parent.empty(); }
};

struct SearchSpace {
  std::string name;
  std::vector<Parameter> parameters;

  void validate() const;
  json to_json() const;
  static SearchSpace from_json(const json& doc);
  static SearchSpace load(const std::filesystem::path& path);
};

bool is_active(const Parameter& parameter, const Config& config);

struct Trial {
  Config config;
  double objective = 0;
  enum class Status { Ok, Failed };
  Status status = Status::Ok;

  json to_json() const;
  static Trial from_json(const json& doc);
};

struct TPEConfig {
  int max_trials = 10;
  int n_startup_random = 3;
  double quantile = 0.25;
  int n_ei_candidates = 24;
  std::uint64_t seed = 0;

  void validate() const;
};

Config sample_prior(const SearchSpace& space, std::mt19937_64& rng);
Config sample_prior(const SearchSpace& space, std::uint64_t seed);

/// good = the ⌈quantile·n⌉ lowest-objective Ok trials, ties by trial order.
std::pair<std::vector<Trial>, std::vector<Trial>> split_observations(
    const std::vector<Trial>& history, double quantile);

/// Per-parameter Parzen mixture: +1-smoothed categorical counts, and for
/// continuous ranges an equal-weight blend of the prior uniform with one
/// truncated Gaussian per observation (width = max distance to adjacent
/// centers or range edges, clipped to [(hi−lo)/min(100, n+1), hi−lo]).
/// Conditional children are fit only on trials where they were active.
class ParzenDensity {
 public:
  ParzenDensity(const SearchSpace& space, const std::vector<Trial>& trials);

  double log_density(const Config& config) const;
  Config sample(std::mt19937_64& rng) const;

 private:
  struct Component {
    Parameter parameter;
    std::vector<double> cat_probs;          // Categorical
    std::vector<double> centers, widths;    // Uniform observations
  };
  std::vector<Component> components_;
};

Config propose_next(const std::vector<Trial>& history, const SearchSpace& space,
                    const TPEConfig& config, std::mt19937_64& rng);
Config propose_next(const std::vector<Trial>& history, const SearchSpace& space,
                    const TPEConfig& config);

class AllTrialsFailedError : public Error {
 public:
  AllTrialsFailedError(std::string what, std::vector<Trial> history)
      : Error(std::move(what)), history_(std::move(history)) {}
  const std::vector<Trial>& history() const { return history_; }

 private:
  std::vector<Trial> history_;
};

struct SmboResult {
  std::vector<Trial> history;
  Trial best;
  int best_index = -1;
};

/// Sequential model-based optimization: propose → evaluate → refit, for
/// exactly max_trials evaluations. Evaluator exceptions mark the trial
/// Failed; failed trials never enter the density fits.
SmboResult smbo_run(const SearchSpace& space, const std::function<double(const Config&)>& objective,
                    const TPEConfig& config);

}  // namespace cvqkd::tpe
