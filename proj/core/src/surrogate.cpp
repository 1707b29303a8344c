#include "cvqkd/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cvqkd/errors.hpp"

namespace cvqkd {
namespace {

using nlohmann::json;

Eigen::ArrayXXd activate(const Eigen::ArrayXXd& z, Activation act) {
  switch (act) {
    case Activation::Tanh: return z.tanh();
    case Activation::Relu: return z.max(0.0);
    case Activation::Sigmoid: return 1.0 / (1.0 + (-z).exp());
  }
  return z;
}

Eigen::ArrayXXd activate_grad(const Eigen::ArrayXXd& z, const Eigen::ArrayXXd& h, Activation act) {
  switch (act) {
    case Activation::Tanh: return 1.0 - h.square();
    case Activation::Relu: return (z > 0.0).cast<double>();
    case Activation::Sigmoid: return h * (1.0 - h);
  }
  return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
}

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;

  explicit AdamState(const Network& net) {
    for (const auto& w : net.weights) {
      mw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
      vw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    for (const auto& b : net.biases) {
      mb.push_back(Eigen::VectorXd::Zero(b.size()));
      vb.push_back(Eigen::VectorXd::Zero(b.size()));
    }
  }
};

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

template <typename T>
void adam_update(T& w, T& m, T& v, const T& g, double lr, double bc1, double bc2) {
  m.array() = kBeta1 * m.array() + (1 - kBeta1) * g.array();
  v.array() = kBeta2 * v.array() + (1 - kBeta2) * g.array().square();
  w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
}

// Forward over a batch laid out one sample per column; in training mode the
// inverted-dropout mask/keep factors are drawn from rng and recorded.
struct ForwardPass {
  std::vector<Eigen::ArrayXXd> pre;         // z per hidden layer
  std::vector<Eigen::ArrayXXd> activated;   // act(z) before dropout
  std::vector<Eigen::ArrayXXd> mask_scale;  // 0 or 1/keep per unit
  std::vector<Eigen::MatrixXd> post;        // act(z) ∘ mask_scale
  Eigen::RowVectorXd output;
};

ForwardPass forward_train(const Network& net, const Eigen::MatrixXd& x_cols, bool training,
                          std::mt19937_64* rng) {
  const int hidden = net.arch.hidden_layers();
  ForwardPass pass;
  Eigen::MatrixXd a = x_cols;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int l = 0; l < hidden; ++l) {
    Eigen::ArrayXXd z =
        ((net.weights[size_t(l)] * a).colwise() + net.biases[size_t(l)]).array();
    Eigen::ArrayXXd h = activate(z, net.arch.activations[size_t(l)]);
    Eigen::ArrayXXd scale = Eigen::ArrayXXd::Ones(h.rows(), h.cols());
    const double rate = net.arch.dropout_rates[size_t(l)];
    if (training && rate > 0.0) {
      const double keep = 1.0 - rate;
      for (Eigen::Index j = 0; j < scale.cols(); ++j)
        for (Eigen::Index i = 0; i < scale.rows(); ++i)
          scale(i, j) = unit(*rng) < keep ? 1.0 / keep : 0.0;
    }
    pass.pre.push_back(std::move(z));
    pass.activated.push_back(h);
    pass.mask_scale.push_back(scale);
    pass.post.push_back((h * scale).matrix());
    a = pass.post.back();
  }
  pass.output =
      ((net.weights.back() * a).colwise() + net.biases.back()).row(0);
  return pass;
}

double validation_loss(const Network& net, const Eigen::MatrixXd& x_cols,
                       const Eigen::VectorXd& labels, const LossHyper& hyper) {
  ForwardPass pass = forward_train(net, x_cols, false, nullptr);
  return secure_loss(pass.output.transpose(), labels, hyper).value;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const Eigen::Index r = Eigen::Index(rows.size());
  const Eigen::Index c = r > 0 ? Eigen::Index(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[size_t(i)][size_t(j)].get<double>();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(Eigen::Index(arr.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = arr[size_t(i)].get<double>();
  return v;
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw Error("unknown activation: " + name);
}

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

void MLPArchitecture::validate() const {
  if (layer_sizes.size() < 3) throw Error("MLPArchitecture: need at least one hidden layer");
  if (layer_sizes.front() != FeatureVector::kSize)
    throw Error("MLPArchitecture: input layer must have 29 units");
  if (layer_sizes.back() != 1) throw Error("MLPArchitecture: output layer must have 1 unit");
  const size_t hidden = layer_sizes.size() - 2;
  if (activations.size() != hidden || dropout_rates.size() != hidden)
    throw Error("MLPArchitecture: per-hidden-layer lists do not match layer_sizes");
  for (int s : layer_sizes)
    if (s < 1) throw Error("MLPArchitecture: layer sizes must be positive");
  for (double r : dropout_rates)
    if (r < 0.0 || r > 0.3) throw Error("MLPArchitecture: dropout rates must be in [0, 0.3]");
}

void LossHyper::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error("LossHyper: gamma must be in (0,1)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error("LossHyper: epsilon must be in (0,1)");
}

Preprocessor Preprocessor::fit(const Eigen::MatrixXd& features) {
  Preprocessor pre;
  pre.means = features.colwise().mean();
  Eigen::ArrayXd var =
      (features.rowwise() - pre.means.transpose()).array().square().colwise().mean();
  pre.stds = var.sqrt().matrix();
  for (Eigen::Index i = 0; i < pre.stds.size(); ++i)
    if (pre.stds(i) <= 0.0) {
      pre.stds(i) = 1.0;
      pre.had_constant_feature = true;
    }
  return pre;
}

Eigen::MatrixXd Preprocessor::transform(const Eigen::MatrixXd& features) const {
  return (features.rowwise() - means.transpose()).array().rowwise() /
         stds.transpose().array();
}

Eigen::VectorXd Preprocessor::transform_one(const Eigen::VectorXd& features) const {
  return (features - means).cwiseQuotient(stds);
}

Eigen::MatrixXd Preprocessor::inverse(const Eigen::MatrixXd& standardized) const {
  return (standardized.array().rowwise() * stds.transpose().array()).rowwise() +
         means.transpose().array();
}

Network init_network(const MLPArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  Network net;
  net.arch = arch;
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const int fan_in = arch.layer_sizes[l];
    const int fan_out = arch.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

double forward(const Network& net, const Eigen::VectorXd& x) {
  Eigen::VectorXd a = x;
  for (int l = 0; l < net.arch.hidden_layers(); ++l) {
    Eigen::ArrayXd z = (net.weights[size_t(l)] * a + net.biases[size_t(l)]).array();
    a = activate(z, net.arch.activations[size_t(l)]).matrix();
  }
  return (net.weights.back() * a + net.biases.back())(0);
}

Eigen::VectorXd forward_batch(const Network& net, const Eigen::MatrixXd& x_rows) {
  ForwardPass pass = forward_train(net, x_rows.transpose(), false, nullptr);
  return pass.output.transpose();
}

SecureLoss secure_loss(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels,
                       const LossHyper& hyper) {
  hyper.validate();
  if (predictions.size() != labels.size()) throw Error("secure_loss: size mismatch");
  const double n = double(predictions.size());
  const double kink = -std::log10(hyper.epsilon);  // > 0
  SecureLoss out;
  out.grad = Eigen::VectorXd(predictions.size());
  double total = 0;
  for (Eigen::Index i = 0; i < predictions.size(); ++i) {
    const double e = predictions(i) - labels(i);
    total += hyper.gamma * (e * e + std::max(e, kink)) -
             (1.0 - hyper.gamma) * std::min(e, 0.0);
    out.grad(i) = (hyper.gamma * (2.0 * e + (e > kink ? 1.0 : 0.0)) -
                   (1.0 - hyper.gamma) * (e <= 0.0 ? 1.0 : 0.0)) /
                  n;
  }
  out.value = total / n;
  return out;
}

TrainResult train(const Network& net, const Eigen::MatrixXd& features,
                  const Eigen::VectorXd& labels, const Preprocessor& preproc,
                  const LossHyper& hyper, const TrainConfig& config) {
  hyper.validate();
  if (features.rows() != labels.size()) throw Error("train: feature/label count mismatch");
  if (features.rows() < 2) throw Error("train: need at least two samples");
  {
    std::vector<Eigen::Index> bad;
    for (Eigen::Index i = 0; i < labels.size(); ++i)
      if (!(labels(i) > 0.0)) bad.push_back(i);
    if (!bad.empty()) {
      std::ostringstream os;
      os << "train: labels must be positive; offending rows:";
      for (size_t i = 0; i < bad.size() && i < 16; ++i) os << ' ' << bad[i];
      if (bad.size() > 16) os << " ... (" << bad.size() << " total)";
      throw Error(os.str());
    }
  }

  const Eigen::MatrixXd x_all = preproc.transform(features).transpose();  // column per sample
  Eigen::VectorXd ystar(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) ystar(i) = to_log_label(labels(i));

  std::mt19937_64 rng(config.seed);
  std::vector<Eigen::Index> order(static_cast<size_t>(features.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const Eigen::Index n_val =
      std::clamp<Eigen::Index>(Eigen::Index(std::llround(double(order.size()) *
                                                         config.validation_fraction)),
                               1, Eigen::Index(order.size()) - 1);
  const Eigen::Index n_train = Eigen::Index(order.size()) - n_val;

  Eigen::MatrixXd x_train(x_all.rows(), n_train), x_val(x_all.rows(), n_val);
  Eigen::VectorXd y_train(n_train), y_val(n_val);
  for (Eigen::Index i = 0; i < n_train; ++i) {
    x_train.col(i) = x_all.col(order[size_t(i)]);
    y_train(i) = ystar(order[size_t(i)]);
  }
  for (Eigen::Index i = 0; i < n_val; ++i) {
    x_val.col(i) = x_all.col(order[size_t(n_train + i)]);
    y_val(i) = ystar(order[size_t(n_train + i)]);
  }

  Network current = net;
  AdamState adam(current);
  TrainResult result;
  result.best_validation_loss = std::numeric_limits<double>::infinity();

  std::vector<Eigen::Index> batch_order(static_cast<size_t>(n_train));
  std::iota(batch_order.begin(), batch_order.end(), 0);
  const int hidden = current.arch.hidden_layers();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(batch_order.begin(), batch_order.end(), rng);
    double epoch_loss = 0;
    Eigen::Index done = 0;
    while (done < n_train) {
      const Eigen::Index bsize = std::min<Eigen::Index>(config.batch_size, n_train - done);
      Eigen::MatrixXd xb(x_train.rows(), bsize);
      Eigen::VectorXd yb(bsize);
      for (Eigen::Index i = 0; i < bsize; ++i) {
        xb.col(i) = x_train.col(batch_order[size_t(done + i)]);
        yb(i) = y_train(batch_order[size_t(done + i)]);
      }
      done += bsize;

      ForwardPass pass = forward_train(current, xb, true, &rng);
      SecureLoss loss = secure_loss(pass.output.transpose(), yb, hyper);
      epoch_loss += loss.value * double(bsize);

      adam.step += 1;
      const double bc1 = 1.0 - std::pow(kBeta1, double(adam.step));
      const double bc2 = 1.0 - std::pow(kBeta2, double(adam.step));
      Eigen::MatrixXd delta = loss.grad.transpose();  // 1 × B, d loss / d output
      for (int l = hidden; l >= 0; --l) {
        const Eigen::MatrixXd& input = (l == 0) ? xb : pass.post[size_t(l - 1)];
        Eigen::MatrixXd grad_w = delta * input.transpose();
        Eigen::VectorXd grad_b = delta.rowwise().sum();
        Eigen::MatrixXd delta_prev;
        if (l > 0) {
          delta_prev = current.weights[size_t(l)].transpose() * delta;
          delta_prev.array() *= pass.mask_scale[size_t(l - 1)] *
                                activate_grad(pass.pre[size_t(l - 1)],
                                              pass.activated[size_t(l - 1)],
                                              current.arch.activations[size_t(l - 1)]);
        }
        adam_update(current.weights[size_t(l)], adam.mw[size_t(l)], adam.vw[size_t(l)], grad_w,
                    config.learning_rate, bc1, bc2);
        adam_update(current.biases[size_t(l)], adam.mb[size_t(l)], adam.vb[size_t(l)], grad_b,
                    config.learning_rate, bc1, bc2);
        if (l > 0) delta = std::move(delta_prev);
      }
    }
    epoch_loss /= double(n_train);
    if (epoch == 0) result.first_epoch_training_loss = epoch_loss;
    result.final_training_loss = epoch_loss;

    const double val = validation_loss(current, x_val, y_val, hyper);
    result.validation_history.push_back(val);
    if (val < result.best_validation_loss) {
      result.best_validation_loss = val;
      result.model.net = current;
    }
  }

  result.model.preproc = preproc;
  result.model.hyper = hyper;
  result.model.seed = config.seed;
  return result;
}

double predict_key_rate(const TrainedModel& model, const FeatureVector& features) {
  Eigen::VectorXd x(FeatureVector::kSize);
  for (int i = 0; i < FeatureVector::kSize; ++i) x(i) = features[i];
  return from_log_label(forward(model.net, model.preproc.transform_one(x)));
}

Eigen::VectorXd predict_key_rate_batch(const TrainedModel& model,
                                       const Eigen::MatrixXd& features) {
  if (features.cols() != FeatureVector::kSize)
    throw Error("predict_key_rate_batch: expected 29 feature columns");
  Eigen::VectorXd ystar = forward_batch(model.net, model.preproc.transform(features));
  for (Eigen::Index i = 0; i < ystar.size(); ++i) ystar(i) = from_log_label(ystar(i));
  return ystar;
}

EvaluationSummary evaluate_model(const TrainedModel& model, const Eigen::MatrixXd& features,
                                 const Eigen::VectorXd& labels) {
  EvaluationSummary summary;
  const Eigen::VectorXd pred = predict_key_rate_batch(model, features);
  summary.count = int(labels.size());
  const int bins = 40;  // 5% bins over [−1, 1)
  summary.histogram.assign(bins, 0.0);
  summary.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) summary.bin_edges[size_t(b)] = -1.0 + 0.05 * b;

  int within20 = 0, within40 = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double dev = (pred(i) - labels(i)) / labels(i);
    const bool secure = pred(i) <= labels(i);
    if (secure) {
      ++summary.secure_count;
      if (dev >= -0.2) ++within20;
      if (dev >= -0.4) ++within40;
    }
    int bin = int(std::floor((dev + 1.0) / 0.05));
    bin = std::clamp(bin, 0, bins - 1);
    summary.histogram[size_t(bin)] += 1.0;
  }
  for (double& h : summary.histogram) h /= double(summary.count);
  summary.secure_fraction = double(summary.secure_count) / double(summary.count);
  summary.secure_within_20 =
      summary.secure_count > 0 ? double(within20) / double(summary.secure_count) : 0.0;
  summary.secure_within_40 =
      summary.secure_count > 0 ? double(within40) / double(summary.secure_count) : 0.0;
  return summary;
}

void TrainedModel::save(const std::filesystem::path& path) const {
  json doc;
  doc["format"] = "cvqkd-mlp-v1";
  json arch;
  arch["layer_sizes"] = net.arch.layer_sizes;
  json acts = json::array();
  for (Activation a : net.arch.activations) acts.push_back(to_string(a));
  arch["activations"] = acts;
  arch["dropout_rates"] = net.arch.dropout_rates;
  doc["architecture"] = arch;
  doc["loss"] = {{"gamma", hyper.gamma}, {"epsilon", hyper.epsilon}};
  doc["preprocessor"] = {{"means", vector_to_json(preproc.means)},
                         {"stds", vector_to_json(preproc.stds)}};
  doc["seed"] = seed;
  json weights = json::array(), biases = json::array();
  for (const auto& w : net.weights) weights.push_back(matrix_to_json(w));
  for (const auto& b : net.biases) biases.push_back(vector_to_json(b));
  doc["weights"] = std::move(weights);
  doc["biases"] = std::move(biases);

  std::ofstream out(path);
  if (!out) throw Error("cannot write model file: " + path.string());
  out << doc.dump(1) << '\n';
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read model file: " + path.string());
  json doc = json::parse(in);
  if (doc.value("format", "") != "cvqkd-mlp-v1")
    throw Error("unrecognized model format in " + path.string());

  TrainedModel model;
  model.net.arch.layer_sizes = doc["architecture"]["layer_sizes"].get<std::vector<int>>();
  for (const auto& name : doc["architecture"]["activations"])
    model.net.arch.activations.push_back(activation_from_string(name.get<std::string>()));
  model.net.arch.dropout_rates =
      doc["architecture"]["dropout_rates"].get<std::vector<double>>();
  model.hyper.gamma = doc["loss"]["gamma"].get<double>();
  model.hyper.epsilon = doc["loss"]["epsilon"].get<double>();
  model.preproc.means = vector_from_json(doc["preprocessor"]["means"]);
  model.preproc.stds = vector_from_json(doc["preprocessor"]["stds"]);
  model.seed = doc["seed"].get<std::uint64_t>();
  for (const auto& w : doc["weights"]) model.net.weights.push_back(matrix_from_json(w));
  for (const auto& b : doc["biases"]) model.net.biases.push_back(vector_from_json(b));
  model.net.arch.validate();
  return model;
}

}  // namespace cvqkd
