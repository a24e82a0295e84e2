#pragma once

// Orthonormal Daubechies filter banks and periodic discrete wavelet
// transforms (1D, separable 2D, multilevel on the approximation band).
//
// Conventions shared by every transform in this header:
//   * boundary: periodic extension, so a length-n signal yields exactly n/2
//     approximation and n/2 detail coefficients and the transform is
//     orthonormal;
//   * phase: y[m] = sum_k taps[k] * x[(2m + k) mod n];
//   * 2D axes: rows are filtered first, then columns of each half.
//       A = row lowpass,  column lowpass
//       H = row lowpass,  column highpass  (responds to horizontal edges)
//       V = row highpass, column lowpass   (responds to vertical edges)
//       D = row highpass, column highpass

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "plane.hpp"

namespace mammo::wavelet {

enum class FilterName { daub4, daub8 };

inline std::string_view to_string(FilterName name) {
  return name == FilterName::daub4 ? "daub4" : "daub8";
}

// Accepts "daub4"/"daub8" and the short forms "D4"/"D8"/"db2"/"db4".
inline FilterName parse_filter_name(std::string_view text) {
  if (text == "daub4" || text == "D4" || text == "D-4" || text == "db2") return FilterName::daub4;
  if (text == "daub8" || text == "D8" || text == "D-8" || text == "db4") return FilterName::daub8;
  throw ValidationError("unsupported wavelet filter '" + std::string(text) + "' (expected daub4 or daub8)");
}

struct WaveletFilter {
  FilterName name;
  std::vector<double> lowpass;
  std::vector<double> highpass;

  std::size_t taps() const noexcept { return lowpass.size(); }
};

namespace detail {

using cplx = std::complex<double>;

// Horner evaluation; coeffs in ascending powers.
inline cplx poly_eval(std::span<const double> coeffs, cplx x) {
  cplx acc = 0.0;
  for (std::size_t i = coeffs.size(); i-- > 0;) acc = acc * x + coeffs[i];
  return acc;
}

inline cplx poly_deriv_eval(std::span<const double> coeffs, cplx x) {
  cplx acc = 0.0;
  for (std::size_t i = coeffs.size(); i-- > 1;) acc = acc * x + static_cast<double>(i) * coeffs[i];
  return acc;
}

// All complex roots of a real polynomial (ascending coefficients) by the
// Durand-Kerner iteration, each polished with Newton steps.
inline std::vector<cplx> poly_roots(std::span<const double> coeffs) {
  const std::size_t degree = coeffs.size() - 1;
  std::vector<double> monic(coeffs.begin(), coeffs.end());
  for (double& c : monic) c /= coeffs[degree];

  std::vector<cplx> roots(degree);
  const cplx seed(0.4, 0.9);
  for (std::size_t i = 0; i < degree; ++i) roots[i] = std::pow(seed, static_cast<double>(i));

  for (int iter = 0; iter < 1000; ++iter) {
    double change = 0.0;
    for (std::size_t i = 0; i < degree; ++i) {
      cplx denom = 1.0;
      for (std::size_t j = 0; j < degree; ++j)
        if (j != i) denom *= roots[i] - roots[j];
      const cplx step = poly_eval(monic, roots[i]) / denom;
      roots[i] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-15) break;
  }
  for (cplx& r : roots) {
    for (int iter = 0; iter < 5; ++iter) {
      const cplx d = poly_deriv_eval(monic, r);
      if (std::abs(d) == 0.0) break;
      r -= poly_eval(monic, r) / d;
    }
  }
  return roots;
}

inline double binomial(unsigned n, unsigned k) {
  double r = 1.0;
  for (unsigned i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// Minimum-phase Daubechies lowpass filter with the given number of vanishing
// moments (2N taps), by spectral factorization of the maxflat half-band
// polynomial P(y) = sum_{k<N} C(N-1+k, k) y^k with y = (2 - z - 1/z) / 4.
inline std::vector<double> daubechies_lowpass(unsigned moments) {
  std::vector<cplx> poly{1.0};
  auto multiply_by = [&poly](cplx root) {  // poly *= (z - root)
    std::vector<cplx> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= root * poly[i];
    }
    poly = std::move(next);
  };

  for (unsigned i = 0; i < moments; ++i) multiply_by(-1.0);

  if (moments > 1) {
    std::vector<double> half_band(moments);
    for (unsigned k = 0; k < moments; ++k) half_band[k] = binomial(moments - 1 + k, k);
    for (const cplx y : poly_roots(half_band)) {
      // (2 - z - 1/z)/4 = y  <=>  z^2 - (2 - 4y) z + 1 = 0; roots are z, 1/z.
      const cplx b = 2.0 - 4.0 * y;
      const cplx disc = std::sqrt(b * b - 4.0);
      cplx z = (b + disc) / 2.0;
      if (std::abs(z) > 1.0) z = 1.0 / z;
      multiply_by(z);
    }
  }

  // Reversed coefficient order puts the dominant taps first.
  std::vector<double> taps(poly.size());
  double total = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    taps[i] = poly[poly.size() - 1 - i].real();
    total += taps[i];
  }
  for (double& t : taps) t *= std::sqrt(2.0) / total;
  return taps;
}

} // namespace detail

// Quadrature mirror: g[k] = (-1)^k h[L-1-k].
inline std::vector<double> quadrature_mirror(std::span<const double> lowpass) {
  const std::size_t n = lowpass.size();
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = (k % 2 == 0 ? 1.0 : -1.0) * lowpass[n - 1 - k];
  return g;
}

struct FilterCheck {
  double sum_error;            // |sum(h) - sqrt(2)|
  double energy_error;         // |sum(h^2) - 1|
  double orthogonality_error;  // max over even shifts s != 0 of |sum h[k] h[k+s]|
  double mirror_error;         // max |g[k] - (-1)^k h[L-1-k]|

  bool passes(double tol = 1e-12) const {
    return sum_error <= tol && energy_error <= tol && orthogonality_error <= tol && mirror_error <= tol;
  }
};

inline FilterCheck check_filter(const WaveletFilter& f) {
  FilterCheck c{};
  const auto& h = f.lowpass;
  const std::size_t n = h.size();
  double sum = 0.0, energy = 0.0;
  for (double t : h) {
    sum += t;
    energy += t * t;
  }
  c.sum_error = std::abs(sum - std::sqrt(2.0));
  c.energy_error = std::abs(energy - 1.0);
  for (std::size_t s = 2; s < n; s += 2) {
    double acc = 0.0;
    for (std::size_t k = 0; k + s < n; ++k) acc += h[k] * h[k + s];
    c.orthogonality_error = std::max(c.orthogonality_error, std::abs(acc));
  }
  if (f.highpass.size() != n) {
    c.mirror_error = INFINITY;
  } else {
    const auto g = quadrature_mirror(h);
    for (std::size_t k = 0; k < n; ++k) c.mirror_error = std::max(c.mirror_error, std::abs(g[k] - f.highpass[k]));
  }
  return c;
}

// Built once per process and validated against the orthonormality
// invariants; construction failure is fatal rather than silently wrong.
inline const WaveletFilter& make_filter(FilterName name) {
  auto build = [](FilterName n) {
    WaveletFilter f{n, detail::daubechies_lowpass(n == FilterName::daub4 ? 2 : 4), {}};
    f.highpass = quadrature_mirror(f.lowpass);
    if (!check_filter(f).passes()) throw std::logic_error("Daubechies filter construction failed self-test");
    return f;
  };
  static const WaveletFilter d4 = build(FilterName::daub4);
  static const WaveletFilter d8 = build(FilterName::daub8);
  return name == FilterName::daub4 ? d4 : d8;
}

inline const WaveletFilter& make_filter(std::string_view name) { return make_filter(parse_filter_name(name)); }

// ---------------------------------------------------------------------------
// 1D

namespace detail {

inline void analyze(std::span<const double> x, const WaveletFilter& f, std::span<double> approx,
                    std::span<double> detail) {
  const std::size_t n = x.size();
  const std::size_t taps = f.taps();
  for (std::size_t m = 0; m < n / 2; ++m) {
    double a = 0.0, d = 0.0;
    for (std::size_t k = 0; k < taps; ++k) {
      const double v = x[(2 * m + k) % n];
      a += f.lowpass[k] * v;
      d += f.highpass[k] * v;
    }
    approx[m] = a;
    detail[m] = d;
  }
}

inline void synthesize(std::span<const double> approx, std::span<const double> detail, const WaveletFilter& f,
                       std::span<double> out) {
  const std::size_t n = out.size();
  const std::size_t taps = f.taps();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t m = 0; m < approx.size(); ++m) {
    for (std::size_t k = 0; k < taps; ++k) out[(2 * m + k) % n] += f.lowpass[k] * approx[m] + f.highpass[k] * detail[m];
  }
}

} // namespace detail

struct Signal1dPair {
  std::vector<double> approx;
  std::vector<double> detail;
};

inline Signal1dPair dwt1d(std::span<const double> signal, const WaveletFilter& f) {
  if (signal.size() % 2 != 0) throw ValidationError("dwt1d: signal length must be even");
  if (signal.size() < f.taps()) throw ValidationError("dwt1d: signal shorter than filter");
  Signal1dPair out{std::vector<double>(signal.size() / 2), std::vector<double>(signal.size() / 2)};
  detail::analyze(signal, f, out.approx, out.detail);
  return out;
}

inline std::vector<double> idwt1d(std::span<const double> approx, std::span<const double> detail,
                                  const WaveletFilter& f) {
  if (approx.size() != detail.size()) throw ValidationError("idwt1d: approximation and detail lengths differ");
  std::vector<double> out(2 * approx.size());
  detail::synthesize(approx, detail, f, out);
  return out;
}

// ---------------------------------------------------------------------------
// 2D

struct SubbandSet {
  RealPlane A, H, V, D;
};

inline SubbandSet dwt2d(const RealPlane& image, const WaveletFilter& f) {
  const std::size_t rows = image.rows(), cols = image.cols();
  if (rows % 2 != 0 || cols % 2 != 0) throw ValidationError("dwt2d: image dimensions must be even");
  if (rows < f.taps() || cols < f.taps()) throw ValidationError("dwt2d: image smaller than filter");

  const std::size_t hr = rows / 2, hc = cols / 2;
  RealPlane low(rows, hc), high(rows, hc);
  for (std::size_t r = 0; r < rows; ++r) detail::analyze(image.row(r), f, low.row(r), high.row(r));

  SubbandSet out{RealPlane(hr, hc), RealPlane(hr, hc), RealPlane(hr, hc), RealPlane(hr, hc)};
  std::vector<double> column(rows), lo(hr), hi(hr);
  auto columns = [&](const RealPlane& half, RealPlane& lo_band, RealPlane& hi_band) {
    for (std::size_t c = 0; c < hc; ++c) {
      for (std::size_t r = 0; r < rows; ++r) column[r] = half(r, c);
      detail::analyze(column, f, lo, hi);
      for (std::size_t r = 0; r < hr; ++r) {
        lo_band(r, c) = lo[r];
        hi_band(r, c) = hi[r];
      }
    }
  };
  columns(low, out.A, out.H);
  columns(high, out.V, out.D);
  return out;
}

inline RealPlane idwt2d(const SubbandSet& bands, const WaveletFilter& f) {
  if (!bands.A.same_shape(bands.H) || !bands.A.same_shape(bands.V) || !bands.A.same_shape(bands.D))
    throw ValidationError("idwt2d: subband dimensions differ");
  const std::size_t hr = bands.A.rows(), hc = bands.A.cols();
  const std::size_t rows = 2 * hr, cols = 2 * hc;

  RealPlane low(rows, hc), high(rows, hc);
  std::vector<double> lo(hr), hi(hr), column(rows);
  auto columns = [&](const RealPlane& lo_band, const RealPlane& hi_band, RealPlane& half) {
    for (std::size_t c = 0; c < hc; ++c) {
      for (std::size_t r = 0; r < hr; ++r) {
        lo[r] = lo_band(r, c);
        hi[r] = hi_band(r, c);
      }
      detail::synthesize(lo, hi, f, column);
      for (std::size_t r = 0; r < rows; ++r) half(r, c) = column[r];
    }
  };
  columns(bands.A, bands.H, low);
  columns(bands.V, bands.D, high);

  RealPlane out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) detail::synthesize(low.row(r), high.row(r), f, out.row(r));
  return out;
}

// ---------------------------------------------------------------------------
// Multilevel

// levels[0] is the finest level. Only the deepest level keeps its A plane
// (mirrored in final_approximation); shallower approximations are consumed by
// the next iteration and left empty.
struct MultilevelDecomposition {
  FilterName filter = FilterName::daub4;
  std::size_t level_count = 0;
  std::vector<SubbandSet> levels;
  RealPlane final_approximation;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

inline MultilevelDecomposition decompose_multilevel(const RealPlane& image, const WaveletFilter& f,
                                                    std::size_t levels) {
  if (levels == 0) throw ValidationError("decompose_multilevel: level count must be positive");
  const std::size_t block = std::size_t{1} << levels;
  if (image.rows() % block != 0 || image.cols() % block != 0)
    throw ValidationError("decompose_multilevel: " + std::to_string(image.rows()) + "x" +
                          std::to_string(image.cols()) + " image is not divisible by 2^" + std::to_string(levels));
  if (image.rows() / (block / 2) < f.taps() || image.cols() / (block / 2) < f.taps())
    throw ValidationError("decompose_multilevel: deepest level input is smaller than the filter");

  MultilevelDecomposition out;
  out.filter = f.name;
  out.level_count = levels;
  out.rows = image.rows();
  out.cols = image.cols();
  out.levels.reserve(levels);

  RealPlane current = image;
  for (std::size_t l = 0; l < levels; ++l) {
    SubbandSet bands = dwt2d(current, f);
    current = std::move(bands.A);
    bands.A = RealPlane();
    out.levels.push_back(std::move(bands));
  }
  out.levels.back().A = current;
  out.final_approximation = std::move(current);
  return out;
}

inline RealPlane reconstruct_multilevel(const MultilevelDecomposition& decomp, const WaveletFilter& f) {
  mammo::detail::require(decomp.levels.size() == decomp.level_count && decomp.level_count > 0,
                  "reconstruct_multilevel: inconsistent decomposition");
  RealPlane current = decomp.final_approximation;
  for (std::size_t l = decomp.level_count; l-- > 0;) {
    const SubbandSet& lv = decomp.levels[l];
    current = idwt2d(SubbandSet{current, lv.H, lv.V, lv.D}, f);
  }
  return current;
}

inline double total_energy(const MultilevelDecomposition& decomp) {
  double e = sum_of_squares(decomp.final_approximation.values());
  for (const auto& lv : decomp.levels) {
    e += sum_of_squares(lv.H.values()) + sum_of_squares(lv.V.values()) + sum_of_squares(lv.D.values());
  }
  return e;
}

// ---------------------------------------------------------------------------
// Debug text output: one file per plane, rows of space-separated decimals.

inline void write_plane_text(std::ostream& os, const RealPlane& p) {
  char buf[32];
  for (std::size_t r = 0; r < p.rows(); ++r) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", p(r, c));
      if (c) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

// Writes {level}_{H,V,D}.txt for every level and {deepest}_A.txt; returns the
// paths written, finest level first.
inline std::vector<std::filesystem::path> write_decomposition(const MultilevelDecomposition& decomp,
                                                              const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  auto emit = [&](std::size_t level, char band, const RealPlane& p) {
    auto path = dir / (std::to_string(level) + "_" + band + ".txt");
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    write_plane_text(os, p);
    written.push_back(std::move(path));
  };
  for (std::size_t l = 0; l < decomp.levels.size(); ++l) {
    emit(l + 1, 'H', decomp.levels[l].H);
    emit(l + 1, 'V', decomp.levels[l].V);
    emit(l + 1, 'D', decomp.levels[l].D);
  }
  emit(decomp.level_count, 'A', decomp.final_approximation);
  return written;
}

} // namespace mammo::wavelet
