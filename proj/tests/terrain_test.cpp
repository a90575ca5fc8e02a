#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "terravolt/terrain.hpp"

using namespace terravolt;

namespace {

TerrainGenConfig small_cfg() {
  TerrainGenConfig cfg;
  cfg.extent_x = 4.0;
  cfg.extent_y = 4.0;
  cfg.cell_size = 0.05;
  cfg.seed = 7;
  return cfg;
}

std::string temp_path(const char* name) {
  return std::string(::testing::TempDir()) + name;
}

}  // namespace

TEST(MakeRamp, FlatPlaneIsAllZero) {
  const Dem dem = make_ramp(0.0, 0.0, small_cfg());
  for (double z : dem.elevations) EXPECT_EQ(z, 0.0);
}

TEST(MakeRamp, FortyFiveDegreesGivesUnitRise) {
  const Dem dem = make_ramp(45.0, 0.0, small_cfg());
  // z at x = 1 m equals tan(45 deg) * 1 m
  EXPECT_NEAR(dem.elevation_at(1.0, 2.0), 1.0, 1e-12);
}

TEST(MakeRamp, FiveDegreeRampHandValue) {
  const Dem dem = make_ramp(5.0, 0.0, small_cfg());
  EXPECT_NEAR(dem.elevation_at(2.0, 1.0), 2.0 * std::tan(5.0 * kPi / 180.0), 1e-12);
  EXPECT_NEAR(dem.elevation_at(2.0, 1.0), 0.17498, 1e-4);
}

TEST(MakeRamp, RejectsBadAngles) {
  EXPECT_THROW(make_ramp(std::nan(""), 0.0, small_cfg()), std::invalid_argument);
  EXPECT_THROW(make_ramp(90.0, 0.0, small_cfg()), std::invalid_argument);
  EXPECT_THROW(make_ramp(0.0, -95.0, small_cfg()), std::invalid_argument);
}

TEST(MakeRough, ZeroAmplitudeIsFlat) {
  TerrainGenConfig cfg = small_cfg();
  cfg.roughness_amplitude = 0.0;
  const Dem dem = make_rough(cfg);
  for (double z : dem.elevations) EXPECT_EQ(z, 0.0);
}

TEST(MakeRough, DeterministicInSeed) {
  TerrainGenConfig cfg = small_cfg();
  cfg.roughness_amplitude = 0.05;
  const Dem a = make_rough(cfg);
  const Dem b = make_rough(cfg);
  ASSERT_EQ(a.elevations.size(), b.elevations.size());
  for (std::size_t i = 0; i < a.elevations.size(); ++i)
    EXPECT_EQ(a.elevations[i], b.elevations[i]);

  cfg.seed = 8;
  const Dem c = make_rough(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.elevations.size(); ++i)
    if (a.elevations[i] != c.elevations[i]) any_diff = true;
  EXPECT_TRUE(any_diff);
}

TEST(MakeRough, RmsMatchesAmplitude) {
  TerrainGenConfig cfg = small_cfg();
  cfg.roughness_amplitude = 0.05;
  const Dem dem = make_rough(cfg);
  double ms = 0.0;
  for (double z : dem.elevations) ms += z * z;
  const double rms = std::sqrt(ms / static_cast<double>(dem.elevations.size()));
  EXPECT_GE(rms, 0.04);
  EXPECT_LE(rms, 0.06);
}

TEST(MakeRough, RejectsBadCorrelationLength) {
  TerrainGenConfig cfg = small_cfg();
  cfg.roughness_amplitude = 0.05;
  cfg.correlation_length = 0.0;
  EXPECT_THROW(make_rough(cfg), std::invalid_argument);
}

TEST(AddBumps, ZeroDensityIsIdentity) {
  TerrainGenConfig cfg = small_cfg();
  cfg.roughness_amplitude = 0.03;
  const Dem base = make_rough(cfg);
  cfg.bump_density = 0.0;
  const Dem out = add_bumps(base, cfg);
  for (std::size_t i = 0; i < base.elevations.size(); ++i)
    EXPECT_EQ(base.elevations[i], out.elevations[i]);
}

TEST(AddBumps, SingleBumpRaisesCenterCellByHeight) {
  TerrainGenConfig cfg = small_cfg();
  cfg.bump_density = 1.0 / 16.0;  // one bump over the 4x4 m extent
  cfg.bump_radius = 0.3;
  cfg.bump_height = 0.08;
  const Dem base = make_ramp(0.0, 0.0, cfg);
  const Dem out = add_bumps(base, cfg);
  double max_rise = 0.0;
  int raised_to_height = 0;
  for (std::size_t i = 0; i < out.elevations.size(); ++i) {
    max_rise = std::max(max_rise, out.elevations[i]);
    if (std::abs(out.elevations[i] - cfg.bump_height) < 1e-12) ++raised_to_height;
  }
  EXPECT_NEAR(max_rise, cfg.bump_height, 1e-12);
  EXPECT_EQ(raised_to_height, 1);
}

TEST(AddBumps, OverlapResolvesByPointwiseMax) {
  TerrainGenConfig cfg = small_cfg();
  const Dem base = make_ramp(2.0, 1.0, cfg);
  const double radius = 0.4, height = 0.1;
  const std::pair<double, double> c1{1.9, 2.0}, c2{2.2, 2.0};  // overlapping
  const Dem out = add_bumps_at(base, {c1, c2}, radius, height);

  // brute-force evaluation of both caps on every node
  for (int r = 0; r < base.n_rows; ++r) {
    for (int c = 0; c < base.n_cols; ++c) {
      const double x = base.origin_x + c * base.cell_size;
      const double y = base.origin_y + r * base.cell_size;
      auto cap = [&](const std::pair<double, double>& ctr) {
        const double d2 =
            ((x - ctr.first) * (x - ctr.first) + (y - ctr.second) * (y - ctr.second)) /
            (radius * radius);
        return d2 >= 1.0 ? 0.0 : height * std::sqrt(1.0 - d2);
      };
      const double expected = base.at(r, c) + std::max(cap(c1), cap(c2));
      EXPECT_NEAR(out.at(r, c), expected, 1e-12);
    }
  }
}

TEST(SamplePointCloud, FlatDemGivesZeroElevations) {
  const Dem dem = make_ramp(0.0, 0.0, small_cfg());
  const PointCloud cloud = sample_point_cloud(dem, 64.0, 3);
  for (const auto& p : cloud.points) EXPECT_EQ(p.z, 0.0);
}

TEST(SamplePointCloud, CountMatchesDensityTimesArea) {
  const Dem dem = make_ramp(0.0, 0.0, small_cfg());
  const PointCloud cloud = sample_point_cloud(dem, 256.0, 3);
  EXPECT_NEAR(static_cast<double>(cloud.points.size()), 4096.0, 0.05 * 4096.0);
}

TEST(SamplePointCloud, DeterministicInSeed) {
  TerrainGenConfig cfg = small_cfg();
  cfg.roughness_amplitude = 0.04;
  const Dem dem = make_rough(cfg);
  const PointCloud a = sample_point_cloud(dem, 128.0, 11);
  const PointCloud b = sample_point_cloud(dem, 128.0, 11);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].x, b.points[i].x);
    EXPECT_EQ(a.points[i].y, b.points[i].y);
    EXPECT_EQ(a.points[i].z, b.points[i].z);
  }
}

TEST(SamplePointCloud, RejectsEmptyDemAndBadDensity) {
  Dem empty;
  EXPECT_THROW(sample_point_cloud(empty, 10.0, 1), std::invalid_argument);
  const Dem dem = make_ramp(0.0, 0.0, small_cfg());
  EXPECT_THROW(sample_point_cloud(dem, 0.0, 1), std::invalid_argument);
}

TEST(Bilinear, ReproducesNodeValuesExactly) {
  TerrainGenConfig cfg = small_cfg();
  cfg.roughness_amplitude = 0.05;
  const Dem dem = make_rough(cfg);
  for (int r = 0; r < dem.n_rows; r += 13) {
    for (int c = 0; c < dem.n_cols; c += 17) {
      const double x = dem.origin_x + c * dem.cell_size;
      const double y = dem.origin_y + r * dem.cell_size;
      EXPECT_EQ(dem.elevation_at(x, y), dem.at(r, c));
    }
  }
}

TEST(DemIo, RoundTripIsIdentity) {
  TerrainGenConfig cfg = small_cfg();
  cfg.roughness_amplitude = 0.07;
  Dem dem = make_rough(cfg);
  dem.origin_x = -1.25;
  dem.origin_y = 3.5;
  const std::string path = temp_path("roundtrip.dem");
  save_dem(dem, path);
  const Dem back = load_dem(path);
  EXPECT_EQ(back.n_cols, dem.n_cols);
  EXPECT_EQ(back.n_rows, dem.n_rows);
  EXPECT_EQ(back.cell_size, dem.cell_size);
  EXPECT_EQ(back.origin_x, dem.origin_x);
  EXPECT_EQ(back.origin_y, dem.origin_y);
  ASSERT_EQ(back.elevations.size(), dem.elevations.size());
  for (std::size_t i = 0; i < dem.elevations.size(); ++i)
    EXPECT_EQ(back.elevations[i], dem.elevations[i]);
}

TEST(DemIo, SmallLiteralFile) {
  const std::string path = temp_path("small.dem");
  {
    std::ofstream f(path);
    f << "ncols 2\nnrows 2\ncellsize 1.0\nxll 0\nyll 0\n0 0\n1 1\n";
  }
  const Dem dem = load_dem(path);
  EXPECT_EQ(dem.n_cols, 2);
  EXPECT_EQ(dem.n_rows, 2);
  EXPECT_EQ(dem.cell_size, 1.0);
  EXPECT_EQ(dem.at(0, 0), 0.0);
  EXPECT_EQ(dem.at(1, 0), 1.0);
  EXPECT_EQ(dem.at(1, 1), 1.0);
}

TEST(DemIo, DimensionMismatchNamesLine) {
  const std::string path = temp_path("broken.dem");
  {
    std::ofstream f(path);
    f << "ncols 4\nnrows 1\ncellsize 1.0\nxll 0\nyll 0\n0 0 0\n";
  }
  try {
    load_dem(path);
    FAIL() << "expected parse_error";
  } catch (const parse_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos);
  }
}

TEST(DemIo, NonNumericCellNamesLine) {
  const std::string path = temp_path("nonnum.dem");
  {
    std::ofstream f(path);
    f << "ncols 2\nnrows 2\ncellsize 1.0\nxll 0\nyll 0\n0 0\n1 oops\n";
  }
  try {
    load_dem(path);
    FAIL() << "expected parse_error";
  } catch (const parse_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos);
  }
}

TEST(DemIo, MissingFileIsAnError) {
  EXPECT_THROW(load_dem("/nonexistent/nowhere.dem"), parse_error);
}
