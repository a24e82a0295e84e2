#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mammo/cascade.hpp"
#include "mammo/rng.hpp"

namespace mammo::cascade_testing {

// Wraps a net and counts predictions made through it.
struct CountingNet {
  nn::MlpModel inner;
  std::size_t* calls = nullptr;

  std::size_t input_dim() const { return inner.input_dim(); }
};

inline std::size_t predict(const CountingNet& net, std::span<const double> x) {
  ++*net.calls;
  return nn::predict(net.inner, x);
}

} // namespace mammo::cascade_testing

namespace {

using namespace mammo;
using namespace mammo::cascade;
using mammo::cascade_testing::CountingNet;

nn::MlpModel model_with(std::size_t in, std::size_t out, std::uint64_t seed) {
  nn::MlpConfig c;
  c.input_dim = in;
  c.hidden_size = 3;
  c.output_dim = out;
  c.seed = seed;
  return nn::init_model(c);
}

features::FeatureVector vec(std::vector<double> v) {
  features::FeatureVector f;
  f.values = std::move(v);
  f.k = f.values.size() / 3;
  return f;
}

TEST(Labels, Invariant) {
  EXPECT_NO_THROW((CaseLabel{Lesion::NORM, Severity::none}.validate()));
  EXPECT_NO_THROW((CaseLabel{Lesion::SPIC, Severity::malignant}.validate()));
  EXPECT_THROW((CaseLabel{Lesion::NORM, Severity::benign}.validate()), ValidationError);
  EXPECT_THROW((CaseLabel{Lesion::CIRC, Severity::none}.validate()), ValidationError);
  EXPECT_EQ(lesion_index(Lesion::ARCH), 0u);
  EXPECT_EQ(lesion_index(Lesion::SPIC), 5u);
  EXPECT_EQ(to_string(Diagnosis{}), "NORMAL");
  EXPECT_EQ(to_string(Diagnosis{true, Lesion::CIRC, Severity::benign}), "CANCER CIRC benign");
}

TEST(Diagnose, NormalVerdictShortCircuits) {
  std::size_t c1 = 0, c2 = 0, c3 = 0;
  BasicCascade<CountingNet> m{{model_with(6, 2, 1), &c1}, {model_with(6, 6, 2), &c2}, {model_with(6, 2, 3), &c3}};
  // Level 1 always says "normal".
  m.level1.inner.params.b2 = {8.0, -8.0};
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> x(6);
    for (double& v : x) v = rng.uniform(-1, 1);
    const auto d = diagnose_normalized(m, x);
    EXPECT_FALSE(d.is_cancer);
    EXPECT_TRUE(d.consistent());
  }
  EXPECT_EQ(c1, 500u);
  EXPECT_EQ(c2, 0u);
  EXPECT_EQ(c3, 0u);

  m.level1.inner.params.b2 = {-8.0, 8.0};
  const auto d = diagnose_normalized(m, std::vector<double>(6, 0.1));
  EXPECT_TRUE(d.is_cancer);
  EXPECT_TRUE(d.consistent());
  EXPECT_EQ(c2, 1u);
  EXPECT_EQ(c3, 1u);
}

TEST(Diagnose, OutputAlwaysConsistent) {
  Rng rng(9);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CascadeModel m{model_with(9, 2, seed), model_with(9, 6, seed + 100), model_with(9, 2, seed + 200)};
    m.level1.params.b2 = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<double> x(9);
    for (double& v : x) v = rng.uniform(-2, 2);
    EXPECT_TRUE(diagnose_normalized(m, x).consistent());
  }
}

TEST(Diagnose, WrongLength) {
  CascadeModel m{model_with(9, 2, 1), model_with(9, 6, 2), model_with(9, 2, 3)};
  EXPECT_THROW(diagnose(m, vec(std::vector<double>(6))), ValidationError);
}

TEST(Diagnose, AppliesStoredScaleToRawVectors) {
  CascadeModel m{model_with(3, 2, 1), model_with(3, 6, 2), model_with(3, 2, 3)};
  m.feature_scale = 10.0;
  const auto raw = vec({5.0, -10.0, 2.0});
  const auto normed = features::normalize(raw, 10.0);
  EXPECT_EQ(diagnose(m, raw), diagnose_normalized(m, normed.values));
  EXPECT_EQ(diagnose(m, normed), diagnose_normalized(m, normed.values));
  EXPECT_THROW(diagnose(m, features::normalize(raw, 3.0)), ValidationError);
}

std::vector<LabeledVector> random_training(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<LabeledVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledVector lv;
    lv.features.values.resize(dim);
    lv.features.k = dim / 3;
    for (double& v : lv.features.values) v = rng.normal(0, 20);
    const auto l = static_cast<Lesion>(rng.below(7));
    lv.label = {l, l == Lesion::NORM ? Severity::none : kSeverityClasses[rng.below(2)]};
    out.push_back(lv);
  }
  return out;
}

TEST(Training, SubsetsMatchBruteForceFilter) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto data = random_training(rng, 1 + rng.below(40), 6);
    const double scale = 7.0;
    const auto sets = level_patterns(data, scale);
    ASSERT_EQ(sets.level1.size(), data.size());
    std::vector<std::vector<double>> expected_inputs;
    std::vector<std::size_t> expected_lesion, expected_severity;
    for (const auto& d : data) {
      if (d.label.lesion == Lesion::NORM) continue;
      std::vector<double> x = d.features.values;
      for (double& v : x) v /= scale;
      expected_inputs.push_back(x);
      expected_lesion.push_back(static_cast<std::size_t>(d.label.lesion) - 1);
      expected_severity.push_back(d.label.severity == Severity::malignant ? 1 : 0);
    }
    ASSERT_EQ(sets.level2.size(), expected_inputs.size());
    ASSERT_EQ(sets.level3.size(), expected_inputs.size());
    for (std::size_t i = 0; i < expected_inputs.size(); ++i) {
      EXPECT_EQ(sets.level2[i].input, expected_inputs[i]);
      EXPECT_EQ(nn::argmax(sets.level2[i].target), expected_lesion[i]);
      EXPECT_EQ(sets.level3[i].input, expected_inputs[i]);
      EXPECT_EQ(nn::argmax(sets.level3[i].target), expected_severity[i]);
    }
  }
}

std::array<nn::MlpConfig, 3> configs_for(std::size_t dim, std::uint64_t seed) {
  auto c = level_configs(dim, 4, 0.9, 0.5, 2000, seed);
  return c;
}

TEST(Training, TwoCaseCascadeSeparatesItsCases) {
  std::vector<LabeledVector> data(2);
  data[0].features = vec({1, 0, 0, 1, 0, 0});
  data[0].label = {Lesion::NORM, Severity::none};
  data[1].features = vec({0, 1, 1, 0, 1, 1});
  data[1].label = {Lesion::CIRC, Severity::benign};
  const auto t = train_cascade(data, configs_for(6, 3), 3);
  for (const auto& r : t.reports) EXPECT_EQ(r.stopped_by, nn::StopReason::accuracy_reached);
  EXPECT_EQ(t.model.feature_scale, 1.0);
  EXPECT_EQ(diagnose(t.model, data[0].features), Diagnosis{});
  EXPECT_EQ(diagnose(t.model, data[1].features), (Diagnosis{true, Lesion::CIRC, Severity::benign}));
  EXPECT_EQ(t.model.level2.config.output_dim, 6u);
  EXPECT_EQ(t.model.level3.config.output_dim, 2u);
}

TEST(Training, RequiresBothNormalAndAbnormalCases) {
  std::vector<LabeledVector> norm(3);
  for (auto& n : norm) n.features = vec({1, 2, 3});
  try {
    train_cascade(norm, configs_for(3, 0));
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("abnormal"), std::string::npos);
  }
  for (auto& n : norm) n.label = {Lesion::MISC, Severity::malignant};
  try {
    train_cascade(norm, configs_for(3, 0));
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("NORM"), std::string::npos);
  }
  EXPECT_THROW(train_cascade(std::vector<LabeledVector>{}, configs_for(3, 0)), ValidationError);
}

TEST(Training, LevelSeedsAreDistinctAndDerived) {
  const auto c = level_configs(300, 20, 0.95, 0.1, 100, 42);
  EXPECT_NE(c[0].seed, c[1].seed);
  EXPECT_NE(c[1].seed, c[2].seed);
  EXPECT_EQ(c[0].seed, derive_seed(42, 1));
  EXPECT_EQ(c[1].output_dim, 6u);
}

TEST(Training, LevelOneIndependentOfDeeperNets) {
  Rng rng(2);
  auto data = random_training(rng, 40, 9);
  data[0].label = {Lesion::NORM, Severity::none};
  data[1].label = {Lesion::CALC, Severity::benign};
  auto cfg = configs_for(9, 5);
  for (auto& c : cfg) c.max_epochs = 50;
  const auto t = train_cascade(data, cfg, 5);
  for (const auto& d : data) {
    const auto x = features::normalize(d.features, t.model.feature_scale).values;
    EXPECT_EQ(diagnose_normalized(t.model, x).is_cancer, nn::predict(t.model.level1, x) == 1);
  }
}

TEST(Persistence, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "mammo_cascade_rt";
  std::filesystem::remove_all(dir);
  CascadeModel m{model_with(30, 2, 1), model_with(30, 6, 2), model_with(30, 2, 3)};
  m.feature_scale = 123.25;
  m.filter = wavelet::FilterName::daub8;
  m.k = 10;
  m.master_seed = 77;
  save_cascade(m, dir);
  for (const char* f : {"level1.model", "level2.model", "level3.model", "manifest.txt"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto back = load_cascade(dir);
  EXPECT_EQ(back.level1.params, m.level1.params);
  EXPECT_EQ(back.level2.params, m.level2.params);
  EXPECT_EQ(back.level3.params, m.level3.params);
  EXPECT_EQ(back.feature_scale, 123.25);
  EXPECT_EQ(back.filter, wavelet::FilterName::daub8);
  EXPECT_EQ(back.k, 10u);
  EXPECT_EQ(back.master_seed, 77u);

  std::ofstream(dir / "level2.model") << "garbage";
  EXPECT_THROW(load_cascade(dir), IoError);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_cascade(dir), IoError);
}

} // namespace
