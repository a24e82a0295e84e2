#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mammo/rng.hpp"
#include "mammo/wavelet.hpp"

namespace {

using namespace mammo;
using namespace mammo::wavelet;

RealPlane random_plane(std::size_t rows, std::size_t cols, Rng& rng) {
  RealPlane p(rows, cols);
  for (double& v : p) v = rng.uniform(-100.0, 100.0);
  return p;
}

double max_abs_diff(const RealPlane& a, const RealPlane& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

// Tensor-product oracle: every subband coefficient as a direct double sum
// over the periodically extended image.
RealPlane direct_subband(const RealPlane& x, const std::vector<double>& col_taps, const std::vector<double>& row_taps) {
  const std::size_t R = x.rows(), C = x.cols();
  RealPlane out(R / 2, C / 2);
  for (std::size_t i = 0; i < R / 2; ++i)
    for (std::size_t j = 0; j < C / 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < col_taps.size(); ++k)
        for (std::size_t l = 0; l < row_taps.size(); ++l)
          s += col_taps[k] * row_taps[l] * x((2 * i + k) % R, (2 * j + l) % C);
      out(i, j) = s;
    }
  return out;
}

TEST(WaveletFilter, Daub4MatchesClosedForm) {
  const auto& f = make_filter(FilterName::daub4);
  const double s3 = std::sqrt(3.0), d = 4.0 * std::sqrt(2.0);
  const std::vector<double> expected = {(1 + s3) / d, (3 + s3) / d, (3 - s3) / d, (1 - s3) / d};
  ASSERT_EQ(f.taps(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(f.lowpass[i], expected[i], 1e-14);
}

TEST(WaveletFilter, Daub8MatchesPublishedTaps) {
  // Daubechies (1992), 4 vanishing moments, 16-digit table values.
  const std::vector<double> published = {0.2303778133088964,  0.7148465705529154,  0.6308807679298587,
                                         -0.0279837694168599, -0.1870348117190931, 0.0308413818355607,
                                         0.0328830116668852,  -0.0105974017850690};
  const auto& f = make_filter(FilterName::daub8);
  ASSERT_EQ(f.taps(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(f.lowpass[i], published[i], 1e-14);
}

TEST(WaveletFilter, InvariantsHold) {
  for (auto name : {FilterName::daub4, FilterName::daub8}) {
    const auto& f = make_filter(name);
    const auto c = check_filter(f);
    EXPECT_LE(c.sum_error, 1e-12);
    EXPECT_LE(c.energy_error, 1e-12);
    EXPECT_LE(c.orthogonality_error, 1e-12);
    EXPECT_EQ(c.mirror_error, 0.0);
    double gsum = 0.0;
    for (double g : f.highpass) gsum += g;
    EXPECT_NEAR(gsum, 0.0, 1e-12);
  }
}

TEST(WaveletFilter, CheckDetectsBrokenTaps) {
  WaveletFilter f = make_filter(FilterName::daub4);
  f.lowpass[1] += 1e-6;
  EXPECT_FALSE(check_filter(f).passes());
}

TEST(WaveletFilter, UnknownNameRejected) {
  EXPECT_THROW(make_filter("haar"), ValidationError);
  EXPECT_EQ(make_filter("D8").name, FilterName::daub8);
}

TEST(Dwt1d, ConstantSignal) {
  const auto& f = make_filter(FilterName::daub4);
  const std::vector<double> x(8, 3.0);
  const auto [a, d] = dwt1d(x, f);
  ASSERT_EQ(a.size(), 4u);
  for (double v : a) EXPECT_NEAR(v, 3.0 * std::sqrt(2.0), 1e-12);
  for (double v : d) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Dwt1d, ImpulseFollowsPhaseConvention) {
  // y[m] = sum_k taps[k] x[(2m+k) mod 8] with x = e_0 picks taps[k] where
  // 2m + k = 8j: (m=0,k=0) and (m=3,k=2).
  const auto& f = make_filter(FilterName::daub4);
  std::vector<double> x(8, 0.0);
  x[0] = 1.0;
  const auto [a, d] = dwt1d(x, f);
  const std::vector<double> ea = {f.lowpass[0], 0.0, 0.0, f.lowpass[2]};
  const std::vector<double> ed = {f.highpass[0], 0.0, 0.0, f.highpass[2]};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(a[i], ea[i]);
    EXPECT_DOUBLE_EQ(d[i], ed[i]);
  }
}

TEST(Dwt1d, RejectsBadLengths) {
  const auto& f = make_filter(FilterName::daub4);
  EXPECT_THROW(dwt1d(std::vector<double>(2, 1.0), f), ValidationError);
  EXPECT_THROW(dwt1d(std::vector<double>(9, 1.0), f), ValidationError);
  EXPECT_THROW(idwt1d(std::vector<double>(4), std::vector<double>(3), f), ValidationError);
}

TEST(Dwt1d, PerfectReconstructionAndEnergy) {
  Rng rng(11);
  for (auto name : {FilterName::daub4, FilterName::daub8}) {
    const auto& f = make_filter(name);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(128);
      for (double& v : x) v = rng.uniform(-1.0, 1.0);
      const auto [a, d] = dwt1d(x, f);
      const auto y = idwt1d(a, d, f);
      double err = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(x[i] - y[i]));
      EXPECT_LT(err, 1e-9);
      const double ex = sum_of_squares(x);
      EXPECT_LT(std::abs(sum_of_squares(a) + sum_of_squares(d) - ex) / ex, 1e-9);
    }
  }
}

TEST(Dwt1d, InverseOfConstantCase) {
  const auto& f = make_filter(FilterName::daub8);
  const std::vector<double> a(8, 5.0 * std::sqrt(2.0)), d(8, 0.0);
  for (double v : idwt1d(a, d, f)) EXPECT_NEAR(v, 5.0, 1e-12);
}

TEST(Dwt2d, MatchesTensorProductOracle) {
  Rng rng(5);
  for (auto name : {FilterName::daub4, FilterName::daub8}) {
    const auto& f = make_filter(name);
    const auto x = random_plane(16, 24, rng);
    const auto s = dwt2d(x, f);
    EXPECT_LT(max_abs_diff(s.A, direct_subband(x, f.lowpass, f.lowpass)), 1e-10);
    EXPECT_LT(max_abs_diff(s.H, direct_subband(x, f.highpass, f.lowpass)), 1e-10);
    EXPECT_LT(max_abs_diff(s.V, direct_subband(x, f.lowpass, f.highpass)), 1e-10);
    EXPECT_LT(max_abs_diff(s.D, direct_subband(x, f.highpass, f.highpass)), 1e-10);
  }
}

TEST(Dwt2d, ConstantPlane) {
  const auto s = dwt2d(RealPlane(8, 12, 1.5), make_filter(FilterName::daub4));
  ASSERT_EQ(s.A.rows(), 4u);
  ASSERT_EQ(s.A.cols(), 6u);
  for (double v : s.A) EXPECT_NEAR(v, 3.0, 1e-12);
  for (const auto* p : {&s.H, &s.V, &s.D})
    for (double v : *p) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Dwt2d, HorizontalEdgeLandsInH) {
  // Rows 0..3 dark, 4..7 bright: varies down columns only.
  RealPlane x(8, 8, 0.0);
  for (std::size_t r = 4; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) x(r, c) = 1.0;
  const auto s = dwt2d(x, make_filter(FilterName::daub4));
  EXPECT_GT(sum_of_squares(s.H.values()), 0.1);
  EXPECT_NEAR(sum_of_squares(s.V.values()), 0.0, 1e-20);
  EXPECT_NEAR(sum_of_squares(s.D.values()), 0.0, 1e-20);
}

TEST(Dwt2d, EnergyAndInverse) {
  Rng rng(9);
  for (auto name : {FilterName::daub4, FilterName::daub8}) {
    const auto& f = make_filter(name);
    const auto x = random_plane(8, 8, rng);
    const auto s = dwt2d(x, f);
    const double total = sum_of_squares(s.A.values()) + sum_of_squares(s.H.values()) + sum_of_squares(s.V.values()) +
                         sum_of_squares(s.D.values());
    EXPECT_LT(std::abs(total - sum_of_squares(x.values())) / sum_of_squares(x.values()), 1e-9);
    const auto big = random_plane(128, 128, rng);
    EXPECT_LT(max_abs_diff(idwt2d(dwt2d(big, f), f), big), 1e-9);
  }
}

TEST(Dwt2d, Linearity) {
  Rng rng(21);
  const auto& f = make_filter(FilterName::daub8);
  const auto x = random_plane(16, 16, rng), y = random_plane(16, 16, rng);
  const double alpha = 0.7, beta = -2.5;
  RealPlane z(16, 16);
  for (std::size_t i = 0; i < z.size(); ++i) z.values()[i] = alpha * x.values()[i] + beta * y.values()[i];
  const auto sx = dwt2d(x, f), sy = dwt2d(y, f), sz = dwt2d(z, f);
  auto check = [&](const RealPlane& a, const RealPlane& b, const RealPlane& c) {
    for (std::size_t i = 0; i < c.size(); ++i)
      EXPECT_NEAR(c.values()[i], alpha * a.values()[i] + beta * b.values()[i], 1e-9);
  };
  check(sx.A, sy.A, sz.A);
  check(sx.H, sy.H, sz.H);
  check(sx.V, sy.V, sz.V);
  check(sx.D, sy.D, sz.D);
}

TEST(Dwt2d, Errors) {
  const auto& f = make_filter(FilterName::daub4);
  EXPECT_THROW(dwt2d(RealPlane(7, 8), f), ValidationError);
  SubbandSet s{RealPlane(4, 4), RealPlane(4, 3), RealPlane(4, 4), RealPlane(4, 4)};
  EXPECT_THROW(idwt2d(s, f), ValidationError);
}

TEST(Idwt2d, ConstantFromApproximation) {
  SubbandSet s{RealPlane(4, 4, 2.0 * 7.0), RealPlane(4, 4), RealPlane(4, 4), RealPlane(4, 4)};
  for (double v : idwt2d(s, make_filter(FilterName::daub8))) EXPECT_NEAR(v, 7.0, 1e-12);
}

TEST(Multilevel, DimensionsFor128Roi) {
  Rng rng(3);
  const auto d = decompose_multilevel(random_plane(128, 128, rng), make_filter(FilterName::daub4), 3);
  ASSERT_EQ(d.levels.size(), 3u);
  const std::size_t sides[] = {64, 32, 16};
  for (std::size_t l = 0; l < 3; ++l) {
    for (const auto* p : {&d.levels[l].H, &d.levels[l].V, &d.levels[l].D}) {
      EXPECT_EQ(p->rows(), sides[l]);
      EXPECT_EQ(p->cols(), sides[l]);
    }
  }
  EXPECT_TRUE(d.levels[0].A.empty());
  EXPECT_TRUE(d.levels[1].A.empty());
  EXPECT_EQ(d.final_approximation.rows(), 16u);
  EXPECT_EQ(d.levels[2].A, d.final_approximation);
}

TEST(Multilevel, ConstantImage) {
  const auto d = decompose_multilevel(RealPlane(64, 64, 2.0), make_filter(FilterName::daub8), 3);
  for (const auto& lv : d.levels)
    for (const auto* p : {&lv.H, &lv.V, &lv.D})
      for (double v : *p) EXPECT_NEAR(v, 0.0, 1e-10);
  for (double v : d.final_approximation) EXPECT_NEAR(v, 16.0, 1e-10);
}

TEST(Multilevel, RejectsIndivisibleAndTooSmall) {
  EXPECT_THROW(decompose_multilevel(RealPlane(100, 100), make_filter(FilterName::daub4), 3), ValidationError);
  // 32 / 4 = 8 at the deepest input: fine for daub8; 16 / 4 = 4 is not.
  EXPECT_NO_THROW(decompose_multilevel(RealPlane(32, 32), make_filter(FilterName::daub8), 3));
  EXPECT_THROW(decompose_multilevel(RealPlane(16, 16), make_filter(FilterName::daub8), 3), ValidationError);
  EXPECT_THROW(decompose_multilevel(RealPlane(16, 16), make_filter(FilterName::daub8), 0), ValidationError);
}

TEST(Multilevel, ReconstructsAndConservesEnergy) {
  Rng rng(13);
  for (auto name : {FilterName::daub4, FilterName::daub8}) {
    const auto& f = make_filter(name);
    for (std::size_t side : {32u, 64u, 128u}) {
      const auto x = random_plane(side, side, rng);
      const auto d = decompose_multilevel(x, f, 2);
      EXPECT_LT(max_abs_diff(reconstruct_multilevel(d, f), x), 1e-9);
      EXPECT_LT(std::abs(total_energy(d) - sum_of_squares(x.values())) / sum_of_squares(x.values()), 1e-9);
    }
  }
}

TEST(Multilevel, WritesDebugFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "mammo_wavelet_debug";
  std::filesystem::remove_all(dir);
  Rng rng(1);
  const auto d = decompose_multilevel(random_plane(32, 32, rng), make_filter(FilterName::daub4), 3);
  const auto files = write_decomposition(d, dir);
  ASSERT_EQ(files.size(), 10u);
  EXPECT_TRUE(std::filesystem::exists(dir / "1_H.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "3_A.txt"));
  std::ifstream in(dir / "3_A.txt");
  std::vector<double> values;
  double v;
  while (in >> v) values.push_back(v);
  ASSERT_EQ(values.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(values[i], d.final_approximation.values()[i]);
  std::filesystem::remove_all(dir);
}

} // namespace
