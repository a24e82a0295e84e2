#pragma once

// Three-level diagnosis cascade:
//   level 1  normal vs. cancerous
//   level 2  lesion type (ARCH, ASYM, CALC, CIRC, MISC, SPIC)
//   level 3  risk (benign, malignant)
// A ROI judged normal at level 1 leaves the cascade; levels 2 and 3 are only
// consulted for ROIs judged cancerous.

#include <array>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "features.hpp"
#include "mlp.hpp"
#include "rng.hpp"
#include "wavelet.hpp"

namespace mammo {

enum class Lesion { NORM, ARCH, ASYM, CALC, CIRC, MISC, SPIC };
enum class Severity { none, benign, malignant };

inline constexpr std::array<Lesion, 6> kLesionClasses = {Lesion::ARCH, Lesion::ASYM, Lesion::CALC,
                                                         Lesion::CIRC, Lesion::MISC, Lesion::SPIC};
inline constexpr std::array<Severity, 2> kSeverityClasses = {Severity::benign, Severity::malignant};

inline std::string_view to_string(Lesion l) {
  static constexpr std::array<std::string_view, 7> names = {"NORM", "ARCH", "ASYM", "CALC", "CIRC", "MISC", "SPIC"};
  return names[static_cast<std::size_t>(l)];
}

inline std::string_view to_string(Severity s) {
  static constexpr std::array<std::string_view, 3> names = {"none", "benign", "malignant"};
  return names[static_cast<std::size_t>(s)];
}

inline std::optional<Lesion> parse_lesion(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(Lesion::SPIC); ++i)
    if (to_string(static_cast<Lesion>(i)) == s) return static_cast<Lesion>(i);
  return std::nullopt;
}

// Index of a lesion within the six level-2 classes.
inline std::size_t lesion_index(Lesion l) {
  if (l == Lesion::NORM) throw ValidationError("NORM has no level-2 class index");
  return static_cast<std::size_t>(l) - 1;
}

inline std::size_t severity_index(Severity s) {
  if (s == Severity::none) throw ValidationError("severity 'none' has no level-3 class index");
  return static_cast<std::size_t>(s) - 1;
}

struct CaseLabel {
  Lesion lesion = Lesion::NORM;
  Severity severity = Severity::none;

  bool is_cancer() const noexcept { return lesion != Lesion::NORM; }

  void validate() const {
    if ((lesion == Lesion::NORM) != (severity == Severity::none))
      throw ValidationError("case label: NORM must pair with severity none and abnormal lesions with a severity");
  }

  friend auto operator<=>(const CaseLabel&, const CaseLabel&) = default;
};

inline std::string to_string(const CaseLabel& l) {
  return l.is_cancer() ? std::string(to_string(l.lesion)) + "-" + std::string(to_string(l.severity)) : "NORM";
}

struct Diagnosis {
  bool is_cancer = false;
  std::optional<Lesion> lesion;
  std::optional<Severity> severity;

  bool consistent() const noexcept {
    return is_cancer ? lesion.has_value() && severity.has_value() : !lesion && !severity;
  }
  friend bool operator==(const Diagnosis&, const Diagnosis&) = default;
};

// "NORMAL" or "CANCER <lesion> <severity>".
inline std::string to_string(const Diagnosis& d) {
  if (!d.is_cancer) return "NORMAL";
  return "CANCER " + std::string(to_string(*d.lesion)) + " " + std::string(to_string(*d.severity));
}

namespace cascade {

// Anything usable as a cascade level: a fixed input width and a predicted
// class index.
template <typename Net>
concept Classifier = requires(const Net& net, std::span<const double> x) {
  { net.input_dim() } -> std::convertible_to<std::size_t>;
  { predict(net, x) } -> std::convertible_to<std::size_t>;
};

template <Classifier Net>
struct BasicCascade {
  Net level1;  // normal / cancerous
  Net level2;  // kLesionClasses order
  Net level3;  // benign / malignant
  double feature_scale = 1.0;
  wavelet::FilterName filter = wavelet::FilterName::daub4;
  std::size_t k = features::kDefaultPerLevel;
  std::uint64_t master_seed = 0;

  std::size_t input_dim() const { return level1.input_dim(); }
};

using CascadeModel = BasicCascade<nn::MlpModel>;

// Expects values already divided by the model's feature scale.
template <Classifier Net>
Diagnosis diagnose_normalized(const BasicCascade<Net>& model, std::span<const double> values) {
  if (values.size() != model.input_dim())
    throw ValidationError("diagnose: feature vector has " + std::to_string(values.size()) + " values, model expects " +
                          std::to_string(model.input_dim()));
  if (predict(model.level1, values) == 0) return Diagnosis{};
  Diagnosis d;
  d.is_cancer = true;
  d.lesion = kLesionClasses.at(predict(model.level2, values));
  d.severity = kSeverityClasses.at(predict(model.level3, values));
  return d;
}

// Raw vectors (scale 1) are divided by the stored scale; vectors already
// normalized with that same scale pass through.
template <Classifier Net>
Diagnosis diagnose(const BasicCascade<Net>& model, const features::FeatureVector& v) {
  if (v.scale == model.feature_scale) return diagnose_normalized(model, v.values);
  if (v.scale != 1.0) throw ValidationError("diagnose: feature vector was normalized with a different scale");
  return diagnose_normalized(model, features::normalize(v, model.feature_scale).values);
}

struct LabeledVector {
  features::FeatureVector features;
  CaseLabel label;
};

// Pattern sets for the three nets, built from ground-truth labels: every case
// for level 1, only the cancerous cases for levels 2 and 3. Inputs are
// divided by `scale`.
struct LevelPatterns {
  std::vector<nn::Pattern> level1, level2, level3;
};

inline LevelPatterns level_patterns(std::span<const LabeledVector> training, double scale) {
  LevelPatterns out;
  for (const auto& lv : training) {
    lv.label.validate();
    auto x = features::normalize(lv.features, scale).values;
    out.level1.push_back({x, nn::one_hot(lv.label.is_cancer() ? 1 : 0, 2)});
    if (lv.label.is_cancer()) {
      out.level2.push_back({x, nn::one_hot(lesion_index(lv.label.lesion), kLesionClasses.size())});
      out.level3.push_back({std::move(x), nn::one_hot(severity_index(lv.label.severity), kSeverityClasses.size())});
    }
  }
  return out;
}

// Per-level configs sharing hidden size, momentum, learning rate and epoch
// budget, with seeds derived from a master seed by level index.
inline std::array<nn::MlpConfig, 3> level_configs(std::size_t input_dim, std::size_t hidden, double momentum,
                                                   double learning_rate, std::size_t max_epochs,
                                                   std::uint64_t master_seed) {
  std::array<nn::MlpConfig, 3> out;
  const std::array<std::size_t, 3> outputs = {2, kLesionClasses.size(), kSeverityClasses.size()};
  for (std::size_t i = 0; i < 3; ++i) {
    out[i].input_dim = input_dim;
    out[i].hidden_size = hidden;
    out[i].output_dim = outputs[i];
    out[i].momentum = momentum;
    out[i].learning_rate = learning_rate;
    out[i].max_epochs = max_epochs;
    out[i].seed = derive_seed(master_seed, i + 1);
  }
  return out;
}

struct CascadeTraining {
  CascadeModel model;
  std::array<nn::TrainingReport, 3> reports;
};

// Fits the feature scale on the training vectors, then trains each level on
// its ground-truth subset. Input and output widths of the configs are set
// from the data.
inline CascadeTraining train_cascade(std::span<const LabeledVector> training, std::array<nn::MlpConfig, 3> configs,
                                     std::uint64_t master_seed = 0) {
  if (training.empty()) throw ValidationError("train_cascade: empty training set");
  const auto& first = training.front().features;
  bool any_normal = false, any_cancer = false;
  std::vector<features::FeatureVector> raw;
  raw.reserve(training.size());
  for (const auto& lv : training) {
    if (lv.features.size() != first.size() || lv.features.filter != first.filter || lv.features.k != first.k)
      throw ValidationError("train_cascade: feature vectors differ in provenance or length");
    (lv.label.is_cancer() ? any_cancer : any_normal) = true;
    raw.push_back(lv.features);
  }
  if (!any_normal) throw ValidationError("train_cascade: training data has no NORM cases (level 1 needs both classes)");
  if (!any_cancer)
    throw ValidationError("train_cascade: training data has no abnormal cases (levels 2 and 3 have no data)");

  const double scale = features::fit_scale(raw);
  const auto sets = level_patterns(training, scale);

  const std::array<std::size_t, 3> outputs = {2, kLesionClasses.size(), kSeverityClasses.size()};
  for (std::size_t i = 0; i < 3; ++i) {
    configs[i].input_dim = first.size();
    configs[i].output_dim = outputs[i];
  }

  CascadeTraining out;
  out.model.level1 = nn::init_model(configs[0]);
  out.model.level2 = nn::init_model(configs[1]);
  out.model.level3 = nn::init_model(configs[2]);
  out.reports[0] = nn::train(out.model.level1, sets.level1);
  out.reports[1] = nn::train(out.model.level2, sets.level2);
  out.reports[2] = nn::train(out.model.level3, sets.level3);
  out.model.feature_scale = scale;
  out.model.filter = first.filter;
  out.model.k = first.k;
  out.model.master_seed = master_seed;
  return out;
}

// ---------------------------------------------------------------------------
// Directory layout: level1.model, level2.model, level3.model, manifest.txt

inline constexpr std::size_t kRoiSize = 128;

inline void save_cascade(const CascadeModel& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create model directory " + dir.string() + ": " + ec.message());

  const std::array<const nn::MlpModel*, 3> nets = {&model.level1, &model.level2, &model.level3};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto path = dir / ("level" + std::to_string(i + 1) + ".model");
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    nn::save_model(os, *nets[i], model.feature_scale);
  }

  std::ofstream os(dir / "manifest.txt");
  if (!os) throw IoError("cannot write manifest in " + dir.string());
  char scale[32];
  std::snprintf(scale, sizeof scale, "%.17g", model.feature_scale);
  os << "format=mammo-cascade 1\n"
     << "filter=" << wavelet::to_string(model.filter) << '\n'
     << "levels=" << features::kLevels << '\n'
     << "k=" << model.k << '\n'
     << "roi_size=" << kRoiSize << '\n'
     << "feature_scale=" << scale << '\n'
     << "master_seed=" << model.master_seed << '\n'
     << "level1_classes=normal,cancerous\n"
     << "level2_classes=ARCH,ASYM,CALC,CIRC,MISC,SPIC\n"
     << "level3_classes=benign,malignant\n";
}

inline std::map<std::string, std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read manifest " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("manifest: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline CascadeModel load_cascade(const std::filesystem::path& dir) {
  const auto kv = read_manifest(dir / "manifest.txt");
  auto field = [&kv](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError("manifest: missing '" + key + "'");
    return it->second;
  };
  if (field("format") != "mammo-cascade 1") throw IoError("manifest: unsupported format");
  if (field("level2_classes") != "ARCH,ASYM,CALC,CIRC,MISC,SPIC" || field("level3_classes") != "benign,malignant")
    throw IoError("manifest: unexpected class ordering");

  CascadeModel model;
  try {
    model.filter = wavelet::parse_filter_name(field("filter"));
    model.k = std::stoull(field("k"));
    model.feature_scale = std::stod(field("feature_scale"));
    model.master_seed = std::stoull(field("master_seed"));
    if (std::stoull(field("levels")) != features::kLevels || std::stoull(field("roi_size")) != kRoiSize)
      throw IoError("manifest: unsupported levels or roi_size");
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(std::string("manifest: bad value (") + e.what() + ")");
  }

  const std::array<nn::MlpModel*, 3> nets = {&model.level1, &model.level2, &model.level3};
  const std::array<std::size_t, 3> outputs = {2, kLesionClasses.size(), kSeverityClasses.size()};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto path = dir / ("level" + std::to_string(i + 1) + ".model");
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    auto loaded = nn::load_model(is);
    if (loaded.model.config.input_dim != features::kLevels * model.k || loaded.model.config.output_dim != outputs[i])
      throw IoError(path.string() + ": shape disagrees with manifest");
    *nets[i] = std::move(loaded.model);
  }
  return model;
}

} // namespace cascade
} // namespace mammo
