#pragma once

// MIAS archive ingestion: label file parsing, binary PGM loading, ROI
// extraction and the stratified training split.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cascade.hpp"
#include "error.hpp"
#include "plane.hpp"
#include "rng.hpp"

namespace mammo::dataset {

inline constexpr std::size_t kRoiSide = 128;

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct MiasRecord {
  std::string id;
  char tissue = '?';
  Lesion lesion = Lesion::NORM;
  std::optional<Severity> severity;
  std::optional<Point> center;
  std::optional<int> radius;
  std::size_t line = 0;

  // Abnormal record without usable coordinates; skipped at ROI extraction.
  bool missing_center() const noexcept { return lesion != Lesion::NORM && !center; }

  CaseLabel label() const { return {lesion, severity.value_or(Severity::none)}; }

  friend bool operator==(const MiasRecord&, const MiasRecord&) = default;
};

namespace internal {

inline std::optional<int> parse_int(const std::string& tok) {
  int v = 0;
  const auto* end = tok.data() + tok.size();
  const auto [p, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

} // namespace internal

// One record per non-empty line: id tissue class [severity x y radius].
// Lines starting with '#' are comments.
inline std::vector<MiasRecord> parse_mias_info(std::istream& in) {
  std::vector<MiasRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> tok{std::istream_iterator<std::string>(ss), std::istream_iterator<std::string>()};
    if (tok.empty() || tok[0][0] == '#') continue;
    auto fail = [line_no](const std::string& what) -> ValidationError {
      return ValidationError("MIAS info line " + std::to_string(line_no) + ": " + what);
    };
    if (tok.size() < 3) throw fail("expected at least id, tissue and class");

    MiasRecord r;
    r.line = line_no;
    r.id = tok[0];
    if (tok[1].size() != 1) throw fail("tissue must be a single character, got '" + tok[1] + "'");
    r.tissue = tok[1][0];
    const auto lesion = parse_lesion(tok[2]);
    if (!lesion) throw fail("unknown abnormality class '" + tok[2] + "'");
    r.lesion = *lesion;

    if (r.lesion == Lesion::NORM) {
      if (tok.size() > 3) throw fail("NORM record carries extra fields");
    } else {
      if (tok.size() < 4) throw fail("abnormal record lacks severity");
      if (tok[3] == "B") {
        r.severity = Severity::benign;
      } else if (tok[3] == "M") {
        r.severity = Severity::malignant;
      } else {
        throw fail("unknown severity '" + tok[3] + "'");
      }
      if (tok.size() >= 6) {
        const auto x = internal::parse_int(tok[4]);
        const auto y = internal::parse_int(tok[5]);
        if (!x || !y) throw fail("non-integer coordinate");
        r.center = Point{*x, *y};
        if (tok.size() >= 7) {
          const auto rad = internal::parse_int(tok[6]);
          if (!rad) throw fail("non-integer radius");
          r.radius = *rad;
        }
      } else if (tok.size() == 5) {
        throw fail("incomplete coordinate pair");
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline void write_mias_info(std::ostream& os, const std::vector<MiasRecord>& records) {
  for (const auto& r : records) {
    os << r.id << ' ' << r.tissue << ' ' << to_string(r.lesion);
    if (r.severity) os << ' ' << (*r.severity == Severity::benign ? 'B' : 'M');
    if (r.center) os << ' ' << r.center->x << ' ' << r.center->y;
    if (r.center && r.radius) os << ' ' << *r.radius;
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// PGM

class PgmError : public IoError {
public:
  enum class Kind { bad_magic, bad_header, unsupported_maxval, truncated };
  PgmError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

// Binary (P5) PGM with maxval <= 255. Comments ('#' to end of line) are
// allowed anywhere in the header.
inline GrayPlane load_pgm(std::istream& in) {
  auto skip_space_and_comments = [&in] {
    for (;;) {
      const int c = in.peek();
      if (c == '#') {
        std::string ignored;
        std::getline(in, ignored);
      } else if (c != EOF && std::isspace(c)) {
        in.get();
      } else {
        return;
      }
    }
  };
  auto read_number = [&](const char* what) {
    skip_space_and_comments();
    std::size_t v = 0;
    bool any = false;
    while (std::isdigit(in.peek())) {
      v = v * 10 + static_cast<std::size_t>(in.get() - '0');
      any = true;
      if (v > (1u << 30)) throw PgmError(PgmError::Kind::bad_header, std::string("PGM: ") + what + " out of range");
    }
    if (!any) throw PgmError(PgmError::Kind::bad_header, std::string("PGM: missing ") + what);
    return v;
  };

  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5')
    throw PgmError(PgmError::Kind::bad_magic, "PGM: unsupported magic (only binary P5 is accepted)");
  const std::size_t width = read_number("width");
  const std::size_t height = read_number("height");
  const std::size_t maxval = read_number("maxval");
  if (maxval == 0 || maxval > 255) throw PgmError(PgmError::Kind::unsupported_maxval, "PGM: maxval " + std::to_string(maxval) + " unsupported (must be 1..255)");
  if (!std::isspace(in.get())) throw PgmError(PgmError::Kind::bad_header, "PGM: missing whitespace after header");

  std::vector<unsigned char> data(width * height);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size())
    throw PgmError(PgmError::Kind::truncated, "PGM: truncated payload (" + std::to_string(in.gcount()) + " of " +
                                                            std::to_string(data.size()) + " bytes)");
  return GrayPlane(height, width, std::move(data));
}

inline GrayPlane load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  return load_pgm(in);
}

inline void write_pgm(std::ostream& os, const GrayPlane& img) {
  os << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.values().data()), static_cast<std::streamsize>(img.size()));
}

inline void write_pgm(const std::filesystem::path& path, const GrayPlane& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write image " + path.string());
  write_pgm(os, img);
}

// ---------------------------------------------------------------------------
// ROIs

struct Window {
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  friend bool operator==(const Window&, const Window&) = default;
};

// Top-left corner of the kRoiSide window centred on (x, y). With
// origin_bottom_left the y axis points up (row = height - 1 - y). Windows
// near an edge are shifted inside the image, never shrunk.
inline Window roi_window(std::size_t rows, std::size_t cols, Point center, bool origin_bottom_left) {
  if (rows < kRoiSide || cols < kRoiSide)
    throw ValidationError("extract_roi: image " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " is smaller than " + std::to_string(kRoiSide) + "x" + std::to_string(kRoiSide));
  const long half = static_cast<long>(kRoiSide / 2);
  const long r = origin_bottom_left ? static_cast<long>(rows) - 1 - center.y : center.y;
  const long c = center.x;
  const long r0 = std::clamp(r - half, 0L, static_cast<long>(rows - kRoiSide));
  const long c0 = std::clamp(c - half, 0L, static_cast<long>(cols - kRoiSide));
  return {static_cast<std::size_t>(r0), static_cast<std::size_t>(c0)};
}

inline GrayPlane crop(const GrayPlane& image, Window w) {
  GrayPlane out(kRoiSide, kRoiSide);
  for (std::size_t r = 0; r < kRoiSide; ++r) {
    const auto src = image.row(w.row0 + r).subspan(w.col0, kRoiSide);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

inline GrayPlane extract_roi(const GrayPlane& image, Point center, bool origin_bottom_left = true) {
  return crop(image, roi_window(image.rows(), image.cols(), center, origin_bottom_left));
}

// Intensity-weighted centroid (row, col) of the pixels brighter than the image
// mean; the geometric centre when no pixel is.
inline std::pair<double, double> bright_centroid(const GrayPlane& image) {
  double mean = 0.0;
  for (auto v : image) mean += v;
  mean /= static_cast<double>(image.size());
  double wsum = 0.0, rsum = 0.0, csum = 0.0;
  for (std::size_t r = 0; r < image.rows(); ++r) {
    for (std::size_t c = 0; c < image.cols(); ++c) {
      const double v = image(r, c);
      if (v > mean) {
        wsum += v;
        rsum += v * static_cast<double>(r);
        csum += v * static_cast<double>(c);
      }
    }
  }
  if (wsum == 0.0)
    return {static_cast<double>(image.rows() - 1) / 2.0, static_cast<double>(image.cols() - 1) / 2.0};
  return {rsum / wsum, csum / wsum};
}

struct NormalRoiOptions {
  std::uint64_t seed = 0;
  int jitter = 0;  // max offset in pixels; 0 keeps placement deterministic
};

// ROI for a lesion-free image, centred on the bright (breast) region.
inline GrayPlane roi_for_normal(const GrayPlane& image, NormalRoiOptions opts = {}) {
  if (image.rows() < kRoiSide || image.cols() < kRoiSide)
    throw ValidationError("roi_for_normal: image smaller than " + std::to_string(kRoiSide) + "x" +
                          std::to_string(kRoiSide));
  auto [row, col] = bright_centroid(image);
  Point p{static_cast<int>(std::lround(col)), static_cast<int>(std::lround(row))};
  if (opts.jitter > 0) {
    Rng rng(opts.seed);
    const auto span = static_cast<std::uint64_t>(2 * opts.jitter + 1);
    p.x += static_cast<int>(rng.below(span)) - opts.jitter;
    p.y += static_cast<int>(rng.below(span)) - opts.jitter;
  }
  return extract_roi(image, p, false);
}

struct RoiImage {
  GrayPlane pixels;
  CaseLabel label;
  std::string source_id;
  std::size_t roi_index = 0;

  std::string name() const { return source_id + (roi_index ? "_" + std::to_string(roi_index) : ""); }
};

using ImageLoader = std::function<GrayPlane(const std::string& id)>;

struct RoiSet {
  std::vector<RoiImage> rois;
  std::vector<std::string> skipped;  // abnormal records without coordinates
};

// One ROI per NORM record and per abnormal record with a centre, in record
// order. Images are loaded once per id.
inline RoiSet build_roi_set(const std::vector<MiasRecord>& records, const ImageLoader& load,
                            bool origin_bottom_left = true, NormalRoiOptions normal = {}) {
  RoiSet out;
  std::map<std::string, GrayPlane> cache;
  std::map<std::string, std::size_t> seen;
  for (const auto& r : records) {
    if (r.missing_center()) {
      out.skipped.push_back(r.id + " (line " + std::to_string(r.line) + ")");
      continue;
    }
    auto it = cache.find(r.id);
    if (it == cache.end()) it = cache.emplace(r.id, load(r.id)).first;
    const GrayPlane& img = it->second;

    RoiImage roi;
    roi.source_id = r.id;
    roi.roi_index = seen[r.id]++;
    roi.label = r.label();
    roi.label.validate();
    roi.pixels = r.lesion == Lesion::NORM ? roi_for_normal(img, {derive_seed(normal.seed, out.rois.size()), normal.jitter})
                                          : extract_roi(img, *r.center, origin_bottom_left);
    out.rois.push_back(std::move(roi));
  }
  return out;
}

// Loader for a MIAS-layout directory: <dir>/<id>.pgm
inline ImageLoader directory_loader(std::filesystem::path dir) {
  return [dir = std::move(dir)](const std::string& id) {
    const auto path = dir / (id + ".pgm");
    if (!std::filesystem::exists(path)) throw IoError("missing image for " + id + ": " + path.string());
    return load_pgm(path);
  };
}

// ---------------------------------------------------------------------------
// Split

struct RoiRef {
  std::string source_id;
  std::size_t roi_index = 0;
  friend auto operator<=>(const RoiRef&, const RoiRef&) = default;
};

struct DatasetSplit {
  std::vector<RoiRef> train_ids;    // in ROI order
  std::vector<RoiRef> eval_ids;     // all ROIs (training cases included)
  std::vector<RoiRef> heldout_ids;  // eval_ids minus train_ids
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Strata in (lesion, severity) order with member positions in input order.
inline std::map<CaseLabel, std::vector<std::size_t>> strata_of(const std::vector<CaseLabel>& labels) {
  std::map<CaseLabel, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < labels.size(); ++i) strata[labels[i]].push_back(i);
  return strata;
}

// How many members each stratum contributes to a training set of n_train:
// one each, then the remaining n_train - S seats apportioned to the strata
// in proportion to their remaining members by largest remainder (ties to the
// earlier stratum).
inline std::vector<std::size_t> stratum_quotas(const std::vector<std::size_t>& sizes, std::size_t n_train) {
  const std::size_t strata = sizes.size();
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  if (n_train > total)
    throw ValidationError("split: n_train=" + std::to_string(n_train) + " exceeds the " + std::to_string(total) +
                          " available ROIs");
  if (n_train < strata)
    throw ValidationError("split: n_train=" + std::to_string(n_train) + " cannot cover " + std::to_string(strata) +
                          " strata");
  std::vector<std::size_t> quota(strata, 1);
  const std::size_t extra = n_train - strata;
  const std::size_t capacity = total - strata;
  if (extra == 0) return quota;

  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder, stratum)
  std::size_t given = 0;
  for (std::size_t i = 0; i < strata; ++i) {
    const std::size_t share = extra * (sizes[i] - 1);
    quota[i] += share / capacity;
    given += share / capacity;
    remainders.emplace_back(share % capacity, i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t j = 0; j < extra - given; ++j) ++quota[remainders[j].second];
  return quota;
}

inline DatasetSplit split_dataset(const std::vector<RoiImage>& rois, std::size_t n_train, std::uint64_t seed) {
  std::vector<CaseLabel> labels;
  labels.reserve(rois.size());
  for (const auto& r : rois) labels.push_back(r.label);
  const auto strata = strata_of(labels);

  std::vector<std::size_t> sizes;
  for (const auto& [label, members] : strata) sizes.push_back(members.size());
  const auto quota = stratum_quotas(sizes, n_train);

  Rng rng(seed);
  std::vector<bool> chosen(rois.size(), false);
  std::size_t s = 0;
  for (const auto& [label, members] : strata) {
    std::vector<std::size_t> pool = members;
    rng.shuffle(std::span(pool));
    for (std::size_t i = 0; i < quota[s]; ++i) chosen[pool[i]] = true;
    ++s;
  }

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < rois.size(); ++i) {
    RoiRef ref{rois[i].source_id, rois[i].roi_index};
    split.eval_ids.push_back(ref);
    (chosen[i] ? split.train_ids : split.heldout_ids).push_back(std::move(ref));
  }
  return split;
}

} // namespace mammo::dataset
