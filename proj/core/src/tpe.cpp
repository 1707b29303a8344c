#include "cvqkd/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

namespace cvqkd::tpe {
namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_normal_pdf(double x, double mu, double sigma) {
  const double d = (x - mu) / sigma;
  return -0.5 * d * d - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

double truncated_normal_pdf(double x, double mu, double sigma, double lo, double hi) {
  const double mass = normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma);
  if (mass <= 0) return 0.0;
  return std::exp(log_normal_pdf(x, mu, sigma)) / mass;
}

json sample_domain(const Parameter& p, std::mt19937_64& rng) {
  if (p.kind == Parameter::Kind::Categorical) {
    std::uniform_int_distribution<size_t> pick(0, p.choices.size() - 1);
    return p.choices[pick(rng)];
  }
  std::uniform_real_distribution<double> pick(p.lo, p.hi);
  return json(pick(rng));
}

std::vector<Trial> ok_trials(const std::vector<Trial>& history) {
  std::vector<Trial> ok;
  for (const Trial& t : history)
    if (t.status == Trial::Status::Ok) ok.push_back(t);
  return ok;
}

}  // namespace

bool is_active(const Parameter& parameter, const Config& config) {
  if (!parameter.conditional()) return true;
  auto it = config.find(parameter.parent);
  return it != config.end() && it->second == parameter.active_value;
}

void SearchSpace::validate() const {
  std::set<std::string> seen;
  for (const Parameter& p : parameters) {
    if (!seen.insert(p.name).second) throw Error("SearchSpace: duplicate parameter " + p.name);
    if (p.kind == Parameter::Kind::Categorical && p.choices.empty())
      throw Error("SearchSpace: categorical parameter " + p.name + " has no choices");
    if (p.kind == Parameter::Kind::Uniform && !(p.lo < p.hi))
      throw Error("SearchSpace: uniform parameter " + p.name + " needs lo < hi");
    if (p.conditional() && !seen.contains(p.parent))
      throw Error("SearchSpace: parent of " + p.name + " must be declared before it");
  }
}

json SearchSpace::to_json() const {
  json params = json::array();
  for (const Parameter& p : parameters) {
    json inner;
    inner["name"] = p.name;
    if (p.kind == Parameter::Kind::Categorical) {
      inner["kind"] = "categorical";
      inner["choices"] = p.choices;
    } else {
      inner["kind"] = "uniform";
      inner["lo"] = p.lo;
      inner["hi"] = p.hi;
    }
    if (p.conditional()) {
      json wrapper;
      wrapper["kind"] = "conditional";
      wrapper["parent"] = p.parent;
      wrapper["active_value"] = p.active_value;
      wrapper["child"] = std::move(inner);
      params.push_back(std::move(wrapper));
    } else {
      params.push_back(std::move(inner));
    }
  }
  return json{{"name", name}, {"parameters", std::move(params)}};
}

SearchSpace SearchSpace::from_json(const json& doc) {
  SearchSpace space;
  space.name = doc.value("name", "");
  for (const json& entry : doc.at("parameters")) {
    Parameter p;
    const json* body = &entry;
    if (entry.at("kind") == "conditional") {
      p.parent = entry.at("parent").get<std::string>();
      p.active_value = entry.at("active_value");
      body = &entry.at("child");
    }
    p.name = body->at("name").get<std::string>();
    const std::string kind = body->at("kind").get<std::string>();
    if (kind == "categorical") {
      p.kind = Parameter::Kind::Categorical;
      for (const json& c : body->at("choices")) p.choices.push_back(c);
    } else if (kind == "uniform") {
      p.kind = Parameter::Kind::Uniform;
      p.lo = body->at("lo").get<double>();
      p.hi = body->at("hi").get<double>();
    } else {
      throw Error("SearchSpace: unknown parameter kind " + kind);
    }
    space.parameters.push_back(std::move(p));
  }
  space.validate();
  return space;
}

SearchSpace SearchSpace::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read search space: " + path.string());
  return from_json(json::parse(in));
}

json Trial::to_json() const {
  json cfg = json::object();
  for (const auto& [key, value] : config) cfg[key] = value;
  return json{{"config", std::move(cfg)},
              {"objective", objective},
              {"status", status == Status::Ok ? "ok" : "failed"}};
}

Trial Trial::from_json(const json& doc) {
  Trial t;
  for (const auto& [key, value] : doc.at("config").items()) t.config[key] = value;
  t.objective = doc.at("objective").get<double>();
  t.status = doc.at("status") == "ok" ? Status::Ok : Status::Failed;
  return t;
}

void TPEConfig::validate() const {
  if (max_trials < 1) throw Error("TPEConfig: max_trials must be >= 1");
  if (n_startup_random < 0 || n_startup_random >= max_trials)
    throw Error("TPEConfig: need n_startup_random < max_trials");
  if (!(quantile > 0.0 && quantile < 1.0)) throw Error("TPEConfig: quantile must be in (0,1)");
  if (n_ei_candidates < 1) throw Error("TPEConfig: need at least one EI candidate");
}

Config sample_prior(const SearchSpace& space, std::mt19937_64& rng) {
  Config config;
  for (const Parameter& p : space.parameters)
    if (is_active(p, config)) config[p.name] = sample_domain(p, rng);
  return config;
}

Config sample_prior(const SearchSpace& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_prior(space, rng);
}

std::pair<std::vector<Trial>, std::vector<Trial>> split_observations(
    const std::vector<Trial>& history, double quantile) {
  std::vector<Trial> ok = ok_trials(history);
  if (ok.empty()) throw Error("split_observations: no successful trials");
  std::vector<size_t> order(ok.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return ok[a].objective < ok[b].objective; });
  const size_t n_good = size_t(std::ceil(quantile * double(ok.size())));
  std::pair<std::vector<Trial>, std::vector<Trial>> split;
  for (size_t i = 0; i < order.size(); ++i)
    (i < n_good ? split.first : split.second).push_back(ok[order[i]]);
  return split;
}

ParzenDensity::ParzenDensity(const SearchSpace& space, const std::vector<Trial>& trials) {
  for (const Parameter& p : space.parameters) {
    Component comp;
    comp.parameter = p;
    // Only trials where the parameter was active contribute observations.
    std::vector<json> observed;
    for (const Trial& t : trials) {
      auto it = t.config.find(p.name);
      if (it != t.config.end()) observed.push_back(it->second);
    }
    if (p.kind == Parameter::Kind::Categorical) {
      comp.cat_probs.assign(p.choices.size(), 0.0);
      for (const json& v : observed) {
        auto it = std::find(p.choices.begin(), p.choices.end(), v);
        if (it != p.choices.end()) comp.cat_probs[size_t(it - p.choices.begin())] += 1.0;
      }
      const double denom = double(observed.size()) + double(p.choices.size());
      for (double& prob : comp.cat_probs) prob = (1.0 + prob) / denom;
    } else {
      for (const json& v : observed) comp.centers.push_back(v.get<double>());
      std::sort(comp.centers.begin(), comp.centers.end());
      const size_t n = comp.centers.size();
      const double range = p.hi - p.lo;
      const double min_width = range / std::min<double>(100.0, double(n) + 1.0);
      comp.widths.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const double left = i > 0 ? comp.centers[i] - comp.centers[i - 1] : comp.centers[i] - p.lo;
        const double right =
            i + 1 < n ? comp.centers[i + 1] - comp.centers[i] : p.hi - comp.centers[i];
        comp.widths[i] = std::clamp(std::max(left, right), min_width, range);
      }
    }
    components_.push_back(std::move(comp));
  }
}

double ParzenDensity::log_density(const Config& config) const {
  double total = 0;
  for (const Component& comp : components_) {
    const Parameter& p = comp.parameter;
    const bool active = is_active(p, config);
    auto it = config.find(p.name);
    if (!active) {
      if (it != config.end())
        throw Error("ParzenDensity: config has inactive key " + p.name);
      continue;
    }
    if (it == config.end()) throw Error("ParzenDensity: config missing active key " + p.name);
    if (p.kind == Parameter::Kind::Categorical) {
      auto choice = std::find(p.choices.begin(), p.choices.end(), it->second);
      if (choice == p.choices.end())
        throw Error("ParzenDensity: value outside domain of " + p.name);
      total += std::log(comp.cat_probs[size_t(choice - p.choices.begin())]);
    } else {
      const double x = it->second.get<double>();
      const size_t n = comp.centers.size();
      double density = 1.0 / (p.hi - p.lo);  // prior component
      for (size_t i = 0; i < n; ++i)
        density += truncated_normal_pdf(x, comp.centers[i], comp.widths[i], p.lo, p.hi);
      density /= double(n + 1);
      total += std::log(std::max(density, 1e-300));
    }
  }
  return total;
}

Config ParzenDensity::sample(std::mt19937_64& rng) const {
  Config config;
  for (const Component& comp : components_) {
    const Parameter& p = comp.parameter;
    if (!is_active(p, config)) continue;
    if (p.kind == Parameter::Kind::Categorical) {
      std::discrete_distribution<size_t> pick(comp.cat_probs.begin(), comp.cat_probs.end());
      config[p.name] = p.choices[pick(rng)];
    } else {
      const size_t n = comp.centers.size();
      std::uniform_int_distribution<size_t> pick_component(0, n);  // n = prior
      const size_t j = pick_component(rng);
      if (j == n) {
        std::uniform_real_distribution<double> uniform(p.lo, p.hi);
        config[p.name] = uniform(rng);
      } else {
        std::normal_distribution<double> gauss(comp.centers[j], comp.widths[j]);
        double x = gauss(rng);
        for (int attempt = 0; attempt < 100 && (x < p.lo || x > p.hi); ++attempt) x = gauss(rng);
        config[p.name] = std::clamp(x, p.lo, p.hi);
      }
    }
  }
  return config;
}

Config propose_next(const std::vector<Trial>& history, const SearchSpace& space,
                    const TPEConfig& config, std::mt19937_64& rng) {
  config.validate();
  space.validate();
  if (int(history.size()) < config.n_startup_random || ok_trials(history).empty())
    return sample_prior(space, rng);

  auto [good, bad] = split_observations(history, config.quantile);
  const ParzenDensity density_l(space, good);
  const ParzenDensity density_g(space, bad);

  Config best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < config.n_ei_candidates; ++i) {
    Config candidate = density_l.sample(rng);
    const double score = density_l.log_density(candidate) - density_g.log_density(candidate);
    if (score > best_score) {
      best_score = score;
      best = std::move(candidate);
    }
  }
  return best;
}

Config propose_next(const std::vector<Trial>& history, const SearchSpace& space,
                    const TPEConfig& config) {
  std::mt19937_64 rng(config.seed + 0x9e3779b97f4a7c15ULL * (history.size() + 1));
  return propose_next(history, space, config, rng);
}

SmboResult smbo_run(const SearchSpace& space, const std::function<double(const Config&)>& objective,
                    const TPEConfig& config) {
  config.validate();
  space.validate();
  std::mt19937_64 rng(config.seed);
  SmboResult result;
  for (int i = 0; i < config.max_trials; ++i) {
    Trial trial;
    trial.config = propose_next(result.history, space, config, rng);
    try {
      trial.objective = objective(trial.config);
      trial.status = Trial::Status::Ok;
    } catch (const std::exception&) {
      trial.objective = std::numeric_limits<double>::quiet_NaN();
      trial.status = Trial::Status::Failed;
    }
    result.history.push_back(std::move(trial));
  }
  for (size_t i = 0; i < result.history.size(); ++i) {
    const Trial& t = result.history[i];
    if (t.status != Trial::Status::Ok) continue;
    if (result.best_index < 0 || t.objective < result.best.objective) {
      result.best = t;
      result.best_index = int(i);
    }
  }
  if (result.best_index < 0)
    throw AllTrialsFailedError("smbo_run: all " + std::to_string(config.max_trials) +
                                   " trials failed",
                               result.history);
  return result;
}

}  // namespace cvqkd::tpe
