#pragma once

// Single-hidden-layer perceptron with logistic units, trained online by
// back-propagation of squared error with a momentum term.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "plane.hpp"
#include "rng.hpp"

namespace mammo::nn {

struct MlpConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_size = 10;
  std::size_t output_dim = 2;
  double learning_rate = 0.1;
  double momentum = 0.0;
  std::size_t max_epochs = 10000;
  double target_train_accuracy = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(input_dim > 0, "MlpConfig: input_dim must be positive");
    detail::require(hidden_size > 0, "MlpConfig: hidden size must be positive");
    detail::require(output_dim > 0, "MlpConfig: output_dim must be positive");
    detail::require(learning_rate > 0.0 && std::isfinite(learning_rate), "MlpConfig: learning rate must be positive");
    detail::require(momentum >= 0.0 && momentum < 1.0, "MlpConfig: momentum must lie in [0, 1)");
    detail::require(max_epochs > 0, "MlpConfig: max_epochs must be positive");
    detail::require(target_train_accuracy > 0.0 && target_train_accuracy <= 1.0,
                    "MlpConfig: target accuracy must lie in (0, 1]");
  }

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

// Parameter set (or gradient / update of one), shaped by a config.
struct Parameters {
  RealPlane w1;               // hidden x input
  std::vector<double> b1;     // hidden
  RealPlane w2;               // output x hidden
  std::vector<double> b2;     // output

  static Parameters zeros(const MlpConfig& c) {
    return {RealPlane(c.hidden_size, c.input_dim), std::vector<double>(c.hidden_size, 0.0),
            RealPlane(c.output_dim, c.hidden_size), std::vector<double>(c.output_dim, 0.0)};
  }

  // Visits every scalar: w1, b1, w2, b2 in order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    for (double& x : w1) fn(x);
    for (double& x : b1) fn(x);
    for (double& x : w2) fn(x);
    for (double& x : b2) fn(x);
  }

  std::size_t count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

struct MlpModel {
  MlpConfig config;
  Parameters params;
  Parameters previous_update;  // momentum accumulators

  std::size_t input_dim() const noexcept { return config.input_dim; }
  std::size_t output_dim() const noexcept { return config.output_dim; }
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases and
// accumulators zero.
inline MlpModel init_model(const MlpConfig& config) {
  config.validate();
  MlpModel m{config, Parameters::zeros(config), Parameters::zeros(config)};
  Rng rng(derive_seed(config.seed, 0));
  const double r1 = 1.0 / std::sqrt(static_cast<double>(config.input_dim));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
  for (double& w : m.params.w1) w = rng.uniform(-r1, r1);
  for (double& w : m.params.w2) w = rng.uniform(-r2, r2);
  return m;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Activations {
  std::vector<double> hidden;
  std::vector<double> output;
};

inline Activations forward_pass(const MlpModel& m, std::span<const double> x) {
  if (x.size() != m.config.input_dim)
    throw ValidationError("forward: input has " + std::to_string(x.size()) + " values, model expects " +
                          std::to_string(m.config.input_dim));
  const auto& p = m.params;
  Activations a{std::vector<double>(m.config.hidden_size), std::vector<double>(m.config.output_dim)};
  for (std::size_t j = 0; j < a.hidden.size(); ++j) {
    const auto w = p.w1.row(j);
    a.hidden[j] = sigmoid(std::inner_product(w.begin(), w.end(), x.begin(), p.b1[j]));
  }
  for (std::size_t o = 0; o < a.output.size(); ++o) {
    const auto w = p.w2.row(o);
    a.output[o] = sigmoid(std::inner_product(w.begin(), w.end(), a.hidden.begin(), p.b2[o]));
  }
  return a;
}

inline std::vector<double> forward(const MlpModel& m, std::span<const double> x) { return forward_pass(m, x).output; }

// E = 1/2 sum (y - t)^2
inline double loss(const MlpModel& m, std::span<const double> x, std::span<const double> target) {
  const auto y = forward(m, x);
  detail::require(target.size() == y.size(), "loss: target length does not match output_dim");
  double e = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) e += 0.5 * (y[i] - target[i]) * (y[i] - target[i]);
  return e;
}

// dE/dparams for one pattern; also returns the pattern loss.
inline Parameters backprop(const MlpModel& m, std::span<const double> x, std::span<const double> target,
                           double* loss_out = nullptr) {
  const auto a = forward_pass(m, x);
  detail::require(target.size() == a.output.size(), "backprop: target length does not match output_dim");
  const auto& c = m.config;
  Parameters g = Parameters::zeros(c);

  std::vector<double> delta_out(c.output_dim);
  double e = 0.0;
  for (std::size_t o = 0; o < c.output_dim; ++o) {
    const double y = a.output[o];
    e += 0.5 * (y - target[o]) * (y - target[o]);
    delta_out[o] = (y - target[o]) * y * (1.0 - y);
    g.b2[o] = delta_out[o];
    for (std::size_t j = 0; j < c.hidden_size; ++j) g.w2(o, j) = delta_out[o] * a.hidden[j];
  }
  for (std::size_t j = 0; j < c.hidden_size; ++j) {
    double back = 0.0;
    for (std::size_t o = 0; o < c.output_dim; ++o) back += m.params.w2(o, j) * delta_out[o];
    const double h = a.hidden[j];
    const double delta = back * h * (1.0 - h);
    g.b1[j] = delta;
    auto row = g.w1.row(j);
    for (std::size_t i = 0; i < c.input_dim; ++i) row[i] = delta * x[i];
  }
  if (loss_out) *loss_out = e;
  return g;
}

// delta_t = -eta * grad + MC * delta_{t-1};  w += delta_t
inline void apply_gradient(MlpModel& m, const Parameters& grad) {
  const double eta = m.config.learning_rate, mc = m.config.momentum;
  auto step = [eta, mc](std::span<double> w, std::span<double> prev, std::span<const double> g) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      prev[i] = -eta * g[i] + mc * prev[i];
      w[i] += prev[i];
    }
  };
  step(m.params.w1.values(), m.previous_update.w1.values(), grad.w1.values());
  step(m.params.b1, m.previous_update.b1, grad.b1);
  step(m.params.w2.values(), m.previous_update.w2.values(), grad.w2.values());
  step(m.params.b2, m.previous_update.b2, grad.b2);
}

// Output binarization: a single 1 at the maximum, lowest index on ties.
inline std::size_t argmax(std::span<const double> y) {
  if (y.empty()) throw ValidationError("binarize: empty output vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] > y[best]) best = i;
  return best;
}

inline std::vector<int> binarize(std::span<const double> y) {
  const std::size_t hot = argmax(y);
  std::vector<int> out(y.size(), 0);
  out[hot] = 1;
  return out;
}

inline std::size_t predict(const MlpModel& m, std::span<const double> x) { return argmax(forward(m, x)); }

struct Pattern {
  std::vector<double> input;
  std::vector<double> target;  // one-hot
};

inline std::vector<double> one_hot(std::size_t cls, std::size_t classes) {
  detail::require(cls < classes, "one_hot: class index out of range");
  std::vector<double> t(classes, 0.0);
  t[cls] = 1.0;
  return t;
}

enum class StopReason { accuracy_reached, max_epochs };

inline std::string_view to_string(StopReason r) {
  return r == StopReason::accuracy_reached ? "accuracy_reached" : "max_epochs";
}

struct TrainingReport {
  std::size_t epochs_run = 0;
  double final_train_accuracy = 0.0;
  std::vector<double> epoch_losses;  // mean pattern loss seen during each epoch
  StopReason stopped_by = StopReason::max_epochs;

  friend bool operator==(const TrainingReport&, const TrainingReport&) = default;
};

namespace internal {

inline std::size_t hot_index(std::span<const double> target) {
  std::size_t ones = 0, hot = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0) {
      ++ones;
      hot = i;
    } else if (target[i] != 0.0) {
      ones = 2;
      break;
    }
  }
  if (ones != 1) throw ValidationError("train: target is not one-hot");
  return hot;
}

} // namespace internal

inline double accuracy(const MlpModel& m, std::span<const Pattern> patterns) {
  if (patterns.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : patterns) hits += predict(m, p.input) == internal::hot_index(p.target);
  return static_cast<double>(hits) / static_cast<double>(patterns.size());
}

// Online training. Pattern order is reshuffled every epoch from a generator
// seeded by config.seed; training stops once the binarized training accuracy
// reaches the target or after max_epochs.
inline TrainingReport train(MlpModel& m, std::span<const Pattern> patterns) {
  const auto& c = m.config;
  c.validate();
  if (patterns.empty()) throw ValidationError("train: no training patterns");
  std::vector<std::size_t> labels;
  labels.reserve(patterns.size());
  for (const auto& p : patterns) {
    if (p.input.size() != c.input_dim) throw ValidationError("train: pattern input length does not match input_dim");
    if (p.target.size() != c.output_dim) throw ValidationError("train: target length does not match output_dim");
    labels.push_back(internal::hot_index(p.target));
  }

  Rng rng(derive_seed(c.seed, 0x5eed));
  std::vector<std::size_t> order(patterns.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainingReport report;
  for (std::size_t epoch = 0; epoch < c.max_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t idx : order) {
      double e = 0.0;
      const auto g = backprop(m, patterns[idx].input, patterns[idx].target, &e);
      apply_gradient(m, g);
      total += e;
    }
    report.epoch_losses.push_back(total / static_cast<double>(patterns.size()));
    report.epochs_run = epoch + 1;

    std::size_t hits = 0;
    for (std::size_t i = 0; i < patterns.size(); ++i) hits += predict(m, patterns[i].input) == labels[i];
    report.final_train_accuracy = static_cast<double>(hits) / static_cast<double>(patterns.size());
    if (report.final_train_accuracy >= c.target_train_accuracy) {
      report.stopped_by = StopReason::accuracy_reached;
      break;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Text serialization
//
//   mammo-mlp 1
//   input_dim=300
//   ... remaining config fields, then feature_scale ...
//   w1 <rows> <cols>
//   <row-major values, one matrix row per line, %.17g>
//   b1 <n>
//   ...

inline constexpr const char* kModelMagic = "mammo-mlp";
inline constexpr int kModelVersion = 1;

namespace internal {

inline void write_real(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

inline void write_matrix(std::ostream& os, const char* name, const RealPlane& p) {
  os << name << ' ' << p.rows() << ' ' << p.cols() << '\n';
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      if (c) os << ' ';
      write_real(os, p(r, c));
    }
    os << '\n';
  }
}

inline void write_vector(std::ostream& os, const char* name, std::span<const double> v) {
  os << name << ' ' << v.size() << '\n';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ' ';
    write_real(os, v[i]);
  }
  os << '\n';
}

inline void read_block(std::istream& is, const std::string& name, std::size_t rows, std::size_t cols,
                       std::span<double> out) {
  std::string tag;
  std::size_t r = 0, c = 0;
  if (!(is >> tag) || tag != name) throw IoError("model file: expected block '" + name + "'");
  if (!(is >> r)) throw IoError("model file: bad dimensions for " + name);
  if (cols != 0 && !(is >> c)) throw IoError("model file: bad dimensions for " + name);
  if (r != rows || (cols != 0 && c != cols)) throw IoError("model file: block " + name + " has wrong shape");
  for (double& x : out) {
    std::string tok;
    if (!(is >> tok)) throw IoError("model file: truncated block " + name);
    char* end = nullptr;
    x = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw IoError("model file: bad number '" + tok + "' in " + name);
  }
}

} // namespace internal

inline void save_model(std::ostream& os, const MlpModel& m, double feature_scale = 1.0) {
  const auto& c = m.config;
  os << kModelMagic << ' ' << kModelVersion << '\n';
  os << "input_dim=" << c.input_dim << '\n';
  os << "hidden_size=" << c.hidden_size << '\n';
  os << "output_dim=" << c.output_dim << '\n';
  os << "learning_rate=";
  internal::write_real(os, c.learning_rate);
  os << "\nmomentum=";
  internal::write_real(os, c.momentum);
  os << "\nmax_epochs=" << c.max_epochs << '\n';
  os << "target_train_accuracy=";
  internal::write_real(os, c.target_train_accuracy);
  os << "\nseed=" << c.seed << '\n';
  os << "feature_scale=";
  internal::write_real(os, feature_scale);
  os << '\n';
  internal::write_matrix(os, "w1", m.params.w1);
  internal::write_vector(os, "b1", m.params.b1);
  internal::write_matrix(os, "w2", m.params.w2);
  internal::write_vector(os, "b2", m.params.b2);
}

struct LoadedModel {
  MlpModel model;
  double feature_scale = 1.0;
};

// Malformed input raises IoError.
inline LoadedModel load_model(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kModelMagic) throw IoError("model file: bad magic line");
  if (version != kModelVersion) throw IoError("model file: unsupported version " + std::to_string(version));

  std::map<std::string, std::string> fields;
  static const char* const keys[] = {"input_dim", "hidden_size",           "output_dim", "learning_rate", "momentum",
                                     "max_epochs", "target_train_accuracy", "seed",       "feature_scale"};
  for (const char* key : keys) {
    std::string line;
    if (!(is >> line)) throw IoError("model file: truncated header");
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.substr(0, eq) != key) throw IoError(std::string("model file: expected ") + key);
    fields[key] = line.substr(eq + 1);
  }

  LoadedModel out;
  auto& c = out.model.config;
  try {
    std::size_t pos = 0;
    auto as_size = [&pos](const std::string& s) {
      const auto v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return static_cast<std::size_t>(v);
    };
    auto as_real = [&pos](const std::string& s) {
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    };
    c.input_dim = as_size(fields["input_dim"]);
    c.hidden_size = as_size(fields["hidden_size"]);
    c.output_dim = as_size(fields["output_dim"]);
    c.learning_rate = as_real(fields["learning_rate"]);
    c.momentum = as_real(fields["momentum"]);
    c.max_epochs = as_size(fields["max_epochs"]);
    c.target_train_accuracy = as_real(fields["target_train_accuracy"]);
    c.seed = as_size(fields["seed"]);
    out.feature_scale = as_real(fields["feature_scale"]);
    c.validate();
  } catch (const std::exception& e) {
    throw IoError(std::string("model file: bad header value (") + e.what() + ")");
  }

  out.model.params = Parameters::zeros(c);
  out.model.previous_update = Parameters::zeros(c);
  internal::read_block(is, "w1", c.hidden_size, c.input_dim, out.model.params.w1.values());
  internal::read_block(is, "b1", c.hidden_size, 0, out.model.params.b1);
  internal::read_block(is, "w2", c.output_dim, c.hidden_size, out.model.params.w2.values());
  internal::read_block(is, "b2", c.output_dim, 0, out.model.params.b2);
  std::string trailing;
  if (is >> trailing) throw IoError("model file: unexpected trailing content");
  return out;
}

} // namespace mammo::nn
