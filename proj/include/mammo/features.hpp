#pragma once

// Fixed-length feature vectors built from the largest-magnitude wavelet
// coefficients of each decomposition level.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "wavelet.hpp"

namespace mammo::features {

inline constexpr std::size_t kDefaultPerLevel = 100;
inline constexpr std::size_t kLevels = 3;

struct FeatureVector {
  std::vector<double> values;
  std::size_t k = kDefaultPerLevel;
  wavelet::FilterName filter = wavelet::FilterName::daub4;
  double scale = 1.0;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Pools H, V, D (and A when requested) in that scan order, row-major within
// each plane, and returns the k values of largest magnitude, signs kept,
// sorted by descending magnitude; equal magnitudes keep scan order.
inline std::vector<double> top_k_level(const wavelet::SubbandSet& bands, bool include_approximation, std::size_t k) {
  if (k == 0) throw ValidationError("top_k_level: k must be positive");
  std::vector<double> pool;
  pool.reserve(bands.H.size() * 4);
  auto append = [&pool](const RealPlane& p) { pool.insert(pool.end(), p.begin(), p.end()); };
  append(bands.H);
  append(bands.V);
  append(bands.D);
  if (include_approximation) append(bands.A);
  if (pool.size() < k)
    throw ValidationError("top_k_level: pool of " + std::to_string(pool.size()) + " coefficients is smaller than k=" +
                          std::to_string(k));

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto by_magnitude = [&pool](std::size_t a, std::size_t b) {
    const double ma = std::abs(pool[a]), mb = std::abs(pool[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), by_magnitude);

  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = pool[order[i]];
  return out;
}

// Level 1 block first. The deepest level also pools its approximation.
inline FeatureVector extract_feature_vector(const wavelet::MultilevelDecomposition& decomp,
                                            std::size_t k = kDefaultPerLevel) {
  if (decomp.level_count != kLevels || decomp.levels.size() != kLevels)
    throw ValidationError("extract_feature_vector: expected a " + std::to_string(kLevels) +
                          "-level decomposition, got " + std::to_string(decomp.level_count));
  FeatureVector fv;
  fv.k = k;
  fv.filter = decomp.filter;
  fv.values.reserve(kLevels * k);
  for (std::size_t l = 0; l < kLevels; ++l) {
    const bool deepest = l + 1 == kLevels;
    wavelet::SubbandSet bands = decomp.levels[l];
    if (deepest) bands.A = decomp.final_approximation;
    const auto block = top_k_level(bands, deepest, k);
    fv.values.insert(fv.values.end(), block.begin(), block.end());
  }
  return fv;
}

// Image -> 3-level decomposition -> feature vector.
inline FeatureVector extract_from_image(const RealPlane& image, wavelet::FilterName filter,
                                        std::size_t k = kDefaultPerLevel) {
  return extract_feature_vector(wavelet::decompose_multilevel(image, wavelet::make_filter(filter), kLevels), k);
}

// Largest absolute entry over the training corpus.
inline double fit_scale(std::span<const FeatureVector> training) {
  if (training.empty()) throw ValidationError("fit_scale: empty training collection");
  double m = 0.0;
  for (const auto& v : training)
    for (double x : v.values) m = std::max(m, std::abs(x));
  if (!(m > 0.0)) throw ValidationError("fit_scale: training features are all zero");
  return m;
}

// Divides by scale; the recorded scale composes multiplicatively.
inline FeatureVector normalize(const FeatureVector& v, double scale) {
  if (!(scale > 0.0)) throw ValidationError("normalize: scale must be positive");
  FeatureVector out = v;
  for (double& x : out.values) x /= scale;
  out.scale = v.scale * scale;
  return out;
}

// CSV: header "id,f000,...", then one row per ROI with the identifier first.
inline void write_csv(std::ostream& os, std::span<const std::string> ids, std::span<const FeatureVector> vectors) {
  if (ids.size() != vectors.size()) throw ValidationError("write_csv: id and vector counts differ");
  const std::size_t width = vectors.empty() ? kLevels * kDefaultPerLevel : vectors.front().size();
  char buf[32];
  os << "id";
  for (std::size_t i = 0; i < width; ++i) {
    std::snprintf(buf, sizeof buf, ",f%03zu", i);
    os << buf;
  }
  os << '\n';
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    if (vectors[r].size() != width) throw ValidationError("write_csv: feature vectors differ in length");
    os << ids[r];
    for (double x : vectors[r].values) {
      std::snprintf(buf, sizeof buf, ",%.17g", x);
      os << buf;
    }
    os << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line) || line.rfind("id", 0) != 0) throw IoError("feature CSV: missing header row");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    t.ids.push_back(cell);
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("feature CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != columns) throw IoError("feature CSV line " + std::to_string(line_no) + ": wrong column count");
    t.rows.push_back(std::move(row));
  }
  return t;
}

} // namespace mammo::features
