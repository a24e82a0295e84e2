#pragma once

// Confusion counting, sensitivity/specificity, per-level evaluation of a
// cascade and the experiment grid runner.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cascade.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "features.hpp"
#include "mlp.hpp"
#include "wavelet.hpp"

namespace mammo::eval {

struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Positive = the target class (cancerous at level 1, malignant at level 3).
inline ConfusionCounts confusion(const std::vector<bool>& predictions, const std::vector<bool>& truths) {
  if (predictions.size() != truths.size()) throw ValidationError("confusion: prediction and truth lengths differ");
  if (predictions.empty()) throw ValidationError("confusion: no cases");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (truths[i]) {
      ++(predictions[i] ? c.tp : c.fn);
    } else {
      ++(predictions[i] ? c.fp : c.tn);
    }
  }
  return c;
}

struct Metrics {
  double sensitivity = 0.0;
  double specificity = 0.0;
};

// Sensitivity = TP/(TP+FN), specificity = TN/(TN+FP).
inline Metrics metrics(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) throw UndefinedRateError("sensitivity undefined: no positive cases (TP+FN = 0)");
  if (c.tn + c.fp == 0) throw UndefinedRateError("specificity undefined: no negative cases (TN+FP = 0)");
  return {static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn),
          static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp)};
}

// Rates that may be undefined; absent rather than 0 or 1.
struct Rates {
  std::optional<double> sensitivity;
  std::optional<double> specificity;

  friend bool operator==(const Rates&, const Rates&) = default;
};

inline Rates rates(const ConfusionCounts& c) {
  Rates r;
  if (c.tp + c.fn) r.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp) r.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return r;
}

struct Level2Result {
  Rates macro;  // mean over the classes where each rate is defined
  std::map<Lesion, ConfusionCounts> per_class_counts;
  std::map<Lesion, Rates> per_class;
  std::vector<std::string> warnings;

  friend bool operator==(const Level2Result&, const Level2Result&) = default;
};

// One-vs-rest over the six lesion classes.
inline Level2Result level2_metrics(const std::vector<Lesion>& predicted, const std::vector<Lesion>& truth) {
  if (predicted.size() != truth.size()) throw ValidationError("level2_metrics: prediction and truth lengths differ");
  if (predicted.empty()) throw ValidationError("level2_metrics: no cases");
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == Lesion::NORM || truth[i] == Lesion::NORM)
      throw ValidationError("level2_metrics: NORM is not a lesion class (case " + std::to_string(i) + ")");

  Level2Result out;
  double sens_sum = 0.0, spec_sum = 0.0;
  std::size_t sens_n = 0, spec_n = 0;
  for (Lesion cls : kLesionClasses) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const bool p = predicted[i] == cls, t = truth[i] == cls;
      if (t) {
        ++(p ? c.tp : c.fn);
      } else {
        ++(p ? c.fp : c.tn);
      }
    }
    const Rates r = rates(c);
    if (r.sensitivity) {
      sens_sum += *r.sensitivity;
      ++sens_n;
    } else {
      out.warnings.push_back(std::string(to_string(cls)) + ": sensitivity undefined (no cases), excluded from macro");
    }
    if (r.specificity) {
      spec_sum += *r.specificity;
      ++spec_n;
    } else {
      out.warnings.push_back(std::string(to_string(cls)) +
                             ": specificity undefined (no other classes), excluded from macro");
    }
    out.per_class_counts[cls] = c;
    out.per_class[cls] = r;
  }
  if (sens_n) out.macro.sensitivity = sens_sum / static_cast<double>(sens_n);
  if (spec_n) out.macro.specificity = spec_sum / static_cast<double>(spec_n);
  return out;
}

// ---------------------------------------------------------------------------
// Cascade evaluation

struct EvalCase {
  const features::FeatureVector* features;
  CaseLabel truth;
};

struct LevelEvaluation {
  std::size_t cases = 0;
  ConfusionCounts level1;  // full cascade verdict, positive = cancerous
  Rates level1_rates;
  std::optional<Level2Result> level2;  // net 2 on ground-truth abnormal cases
  ConfusionCounts level3;              // net 3 on ground-truth abnormal cases, positive = malignant
  Rates level3_rates;

  friend bool operator==(const LevelEvaluation&, const LevelEvaluation&) = default;
};

// Level 1 is scored from the cascade's verdict; levels 2 and 3 are scored on
// every ground-truth abnormal case so that a level-1 miss does not hide the
// lesion and risk classifiers' behaviour.
inline LevelEvaluation evaluate_cascade(const cascade::CascadeModel& model, std::span<const EvalCase> cases) {
  LevelEvaluation ev;
  ev.cases = cases.size();
  if (cases.empty()) return ev;
  std::vector<bool> l1_pred, l1_truth, l3_pred, l3_truth;
  std::vector<Lesion> l2_pred, l2_truth;
  for (const auto& c : cases) {
    const auto x = features::normalize(*c.features, model.feature_scale).values;
    const Diagnosis d = cascade::diagnose_normalized(model, x);
    l1_pred.push_back(d.is_cancer);
    l1_truth.push_back(c.truth.is_cancer());
    if (c.truth.is_cancer()) {
      l2_pred.push_back(kLesionClasses.at(nn::predict(model.level2, x)));
      l2_truth.push_back(c.truth.lesion);
      l3_pred.push_back(kSeverityClasses.at(nn::predict(model.level3, x)) == Severity::malignant);
      l3_truth.push_back(c.truth.severity == Severity::malignant);
    }
  }
  ev.level1 = confusion(l1_pred, l1_truth);
  ev.level1_rates = rates(ev.level1);
  if (!l2_pred.empty()) {
    ev.level2 = level2_metrics(l2_pred, l2_truth);
    ev.level3 = confusion(l3_pred, l3_truth);
    ev.level3_rates = rates(ev.level3);
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
  int id = 0;
  std::size_t hidden = 10;
  double momentum = 0.9;
  wavelet::FilterName wavelet = wavelet::FilterName::daub4;
  double learning_rate = 0.1;
  std::size_t max_epochs = 10000;
  std::uint64_t seed = 0;

  void validate() const {
    nn::MlpConfig c;
    c.input_dim = 1;
    c.hidden_size = hidden;
    c.momentum = momentum;
    c.learning_rate = learning_rate;
    c.max_epochs = max_epochs;
    c.validate();
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct ExperimentOptions {
  std::size_t k = features::kDefaultPerLevel;
  double target_train_accuracy = 1.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  LevelEvaluation protocol;  // every ROI, training cases included
  LevelEvaluation heldout;   // ROIs not used for training
  std::array<nn::TrainingReport, 3> training{};
  double wall_time = 0.0;
  std::optional<std::string> error;

  // Equality ignores wall time.
  bool same_outcome(const ExperimentResult& o) const {
    return config == o.config && protocol == o.protocol && heldout == o.heldout && training == o.training &&
           error == o.error;
  }
};

inline std::vector<features::FeatureVector> extract_all(std::span<const dataset::RoiImage> rois,
                                                        wavelet::FilterName filter, std::size_t k) {
  std::vector<features::FeatureVector> out;
  out.reserve(rois.size());
  for (const auto& r : rois) out.push_back(features::extract_from_image(plane_cast<double>(r.pixels), filter, k));
  return out;
}

// Feature vectors per wavelet, computed once and shared by experiments.
class FeatureCache {
public:
  FeatureCache(std::span<const dataset::RoiImage> rois, std::size_t k) : rois_(rois), k_(k) {}

  const std::vector<features::FeatureVector>& get(wavelet::FilterName filter) {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(filter);
    if (it == cache_.end()) it = cache_.emplace(filter, extract_all(rois_, filter, k_)).first;
    return it->second;
  }

private:
  std::span<const dataset::RoiImage> rois_;
  std::size_t k_;
  std::mutex mutex_;
  std::map<wavelet::FilterName, std::vector<features::FeatureVector>> cache_;
};

inline ExperimentResult run_experiment_with(const ExperimentConfig& config, const dataset::DatasetSplit& split,
                                            std::span<const dataset::RoiImage> rois,
                                            const std::vector<features::FeatureVector>& vectors,
                                            const ExperimentOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  detail::require(vectors.size() == rois.size(), "run_experiment: feature count does not match ROI count");

  const std::set<dataset::RoiRef> train_set(split.train_ids.begin(), split.train_ids.end());
  std::vector<cascade::LabeledVector> training;
  std::vector<EvalCase> all, heldout;
  for (std::size_t i = 0; i < rois.size(); ++i) {
    const dataset::RoiRef ref{rois[i].source_id, rois[i].roi_index};
    const bool in_train = train_set.count(ref) != 0;
    if (in_train) training.push_back({vectors[i], rois[i].label});
    all.push_back({&vectors[i], rois[i].label});
    if (!in_train) heldout.push_back({&vectors[i], rois[i].label});
  }
  detail::require(training.size() == train_set.size(), "run_experiment: split references unknown ROIs");

  auto configs = cascade::level_configs(vectors.front().size(), config.hidden, config.momentum, config.learning_rate,
                                        config.max_epochs, config.seed);
  for (auto& c : configs) c.target_train_accuracy = opts.target_train_accuracy;
  auto trained = cascade::train_cascade(training, configs, config.seed);

  ExperimentResult result;
  result.config = config;
  result.training = trained.reports;
  result.protocol = evaluate_cascade(trained.model, all);
  result.heldout = evaluate_cascade(trained.model, heldout);
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// Decomposes every ROI with the configured wavelet, extracts k-per-level
// features, trains the cascade on the split's training ROIs and evaluates on
// all ROIs and on the held-out ROIs.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const dataset::DatasetSplit& split,
                                       std::span<const dataset::RoiImage> rois, const ExperimentOptions& opts = {}) {
  if (rois.empty()) throw ValidationError("run_experiment: no ROIs");
  return run_experiment_with(config, split, rois, extract_all(rois, config.wavelet, opts.k), opts);
}

struct GridOptions {
  ExperimentOptions experiment;
  std::size_t workers = 0;  // 0: hardware concurrency
};

// Runs every experiment; results keep config order. A failing experiment is
// reported in its result and does not stop the others.
inline std::vector<ExperimentResult> run_grid(std::span<const ExperimentConfig> configs,
                                              const dataset::DatasetSplit& split,
                                              std::span<const dataset::RoiImage> rois, const GridOptions& opts = {}) {
  if (configs.empty()) throw ValidationError("run_grid: no experiments");
  if (rois.empty()) throw ValidationError("run_grid: no ROIs");
  FeatureCache cache(rois, opts.experiment.k);
  std::vector<ExperimentResult> results(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = run_experiment_with(configs[i], split, rois, cache.get(configs[i].wavelet), opts.experiment);
      } catch (const std::exception& e) {
        results[i] = ExperimentResult{};
        results[i].config = configs[i];
        results[i].error = e.what();
      }
    }
  };
  std::size_t n = opts.workers ? opts.workers : std::max(1u, std::thread::hardware_concurrency());
  n = std::min(n, configs.size());
  std::vector<std::jthread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  pool.clear();
  return results;
}

} // namespace mammo::eval
