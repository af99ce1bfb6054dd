#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "pvmppt/dataset.hpp"
#include "support.hpp"

using namespace pvmppt;

TEST(Dataset, DefaultGridHas209Samples) {
  const Dataset& ds = fixtures::default_dataset();
  EXPECT_EQ(ds.all().size(), 19u * 11u);
  EXPECT_EQ(ds.validation.size(), 42u);
  EXPECT_EQ(ds.train.size(), 167u);
  std::set<std::pair<double, double>> points;
  for (const MppSample& s : ds.all()) points.insert({s.g, s.t});
  EXPECT_EQ(points.size(), 209u);
}

TEST(Dataset, GridAxisIsInclusive) {
  EXPECT_EQ(grid_axis(100.0, 1000.0, 50.0).size(), 19u);
  EXPECT_EQ(grid_axis(273.0, 323.0, 5.0).back(), 323.0);
  EXPECT_EQ(grid_axis(1.0, 1.0, 0.5), std::vector<double>{1.0});
}

TEST(Dataset, StcSampleMatchesDatasheet) {
  const MppSample s = mpp_sample(1000.0, 298.15, default_array());
  EXPECT_NEAR(s.v_mpp, 8.25, 0.0825);
  EXPECT_NEAR(s.p_mpp, 115.5, 1.155);
}

TEST(Dataset, SamplesAgreeWithDenseSweep) {
  const auto all = fixtures::default_dataset().all();
  for (std::size_t k = 0; k < all.size(); k += 7) {
    const MppSample& s = all[k];
    const MppPoint dense = fixtures::dense_sweep_mpp(EnvSample::uniform(s.g, s.t, 2), default_array());
    EXPECT_NEAR(s.p_mpp, dense.p, 5e-4 * dense.p) << s.g << " " << s.t;
    EXPECT_NEAR(s.v_mpp * array_current(s.v_mpp, EnvSample::uniform(s.g, s.t, 2), default_array()), s.p_mpp,
                1e-9 * s.p_mpp);
  }
}

TEST(Dataset, PowerRisesWithIrradianceAtFixedTemperature) {
  for (double t : {273.0, 298.0, 323.0}) {
    double prev = 0.0;
    for (double g : grid_axis(100.0, 1000.0, 50.0)) {
      const double p = mpp_sample(g, t, default_array()).p_mpp;
      EXPECT_GT(p, prev);
      prev = p;
    }
  }
}

TEST(Dataset, PowerFallsWithTemperatureAtFixedIrradiance) {
  double prev = 1e9;
  for (double t : grid_axis(273.0, 323.0, 5.0)) {
    const double p = mpp_sample(800.0, t, default_array()).p_mpp;
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Dataset, SameSeedGivesIdenticalCsv) {
  DatasetSpec spec;
  spec.g_step = 150.0;
  const std::string a = dataset_csv(generate(spec, default_array()).all());
  const std::string b = dataset_csv(generate(spec, default_array()).all());
  EXPECT_EQ(a, b);
  spec.rng_seed = 7;
  EXPECT_NE(a, dataset_csv(generate(spec, default_array()).all()));
}

TEST(Dataset, CsvRoundTripIsExact) {
  const auto all = fixtures::default_dataset().all();
  const std::string text = dataset_csv(all);
  EXPECT_EQ(text.substr(0, text.find('\n')), "g_wpm2,t_k,v_mpp_v,p_mpp_w");
  std::istringstream in(text);
  EXPECT_EQ(parse_dataset_csv(in), all);
}

TEST(Dataset, CsvRejectsBadHeaderAndRows) {
  std::istringstream bad_header("g,t,v,p\n1,2,3,4\n");
  EXPECT_THROW(parse_dataset_csv(bad_header), ConfigError);
  std::istringstream short_row("g_wpm2,t_k,v_mpp_v,p_mpp_w\n1,2,3\n");
  EXPECT_THROW(parse_dataset_csv(short_row), ConfigError);
  std::istringstream junk("g_wpm2,t_k,v_mpp_v,p_mpp_w\n1,2,x,4\n");
  EXPECT_THROW(parse_dataset_csv(junk), ConfigError);
}

TEST(Dataset, SpecValidation) {
  DatasetSpec spec;
  spec.g_step = 0.0;
  EXPECT_THROW(generate(spec, default_array()), ConfigError);
  spec = DatasetSpec{};
  spec.t_min = 330.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = DatasetSpec{};
  spec.holdout_fraction = 1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Dataset, SplitKeepsEverySampleOnce) {
  std::vector<MppSample> v;
  for (int k = 0; k < 10; ++k) v.push_back({double(k), 300.0, 1.0, 1.0});
  const Dataset ds = split_dataset(v, 0.3);
  EXPECT_EQ(ds.validation.size(), 3u);
  EXPECT_EQ(ds.all(), v);
}

TEST(Normalize, EndpointsMapToUnitInterval) {
  const NormBounds b = NormBounds::for_array(default_array().p_max);
  const auto out = normalize_set({{0.0, 253.0, 0.0, 0.0}, {1200.0, 348.0, 9.0, 1.1 * default_array().p_max}}, b);
  EXPECT_EQ(out[0].input, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(out[0].target, 0.0);
  EXPECT_EQ(out[1].input, (std::vector<double>{1.0, 1.0}));
  EXPECT_DOUBLE_EQ(out[1].target, 1.0);
}

TEST(Normalize, OutOfEnvelopeThrows) {
  const NormBounds b = NormBounds::for_array(default_array().p_max);
  EXPECT_THROW(normalize_set({{1300.0, 300.0, 8.0, 100.0}}, b), BoundsViolation);
  EXPECT_THROW(normalize_set({{800.0, 350.0, 8.0, 100.0}}, b), BoundsViolation);
  EXPECT_THROW(normalize_set({{800.0, 300.0, 8.0, 200.0}}, b), BoundsViolation);
}

TEST(Normalize, DefaultSetStaysInsideUnitBox) {
  const NormBounds b = NormBounds::for_array(default_array().p_max);
  for (const Sample& s : normalize_set(fixtures::default_dataset().all(), b)) {
    for (double x : s.input) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
    EXPECT_GT(s.target, 0.0);
    EXPECT_LT(s.target, 1.0);
  }
}
