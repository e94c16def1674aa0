#include <algorithm>
#include <gtest/gtest.h>

#include "cardioseg/preprocess.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace cardioseg;

TEST(Resample, UnchangedSpacingIsIdentity) {
  Rng rng(11);
  const Volume3 v = testutil::random_volume(rng, Vec3i{5, 4, 3}, Vec3d{1.5, 1.5, 1.5});
  const Volume3 out = resample(v, 1.5, ResampleMode::Trilinear);
  EXPECT_EQ(out.dims, v.dims);
  for (std::size_t i = 0; i < v.data.size(); ++i) ASSERT_EQ(out.data[i], v.data[i]);
}

TEST(Resample, ConstantVolumeStaysConstant) {
  Volume3 v = make_volume(Vec3i{5, 5, 5}, Vec3d{2.0, 2.0, 2.0}, 3.25f);
  const Volume3 out = resample(v, 0.7, ResampleMode::Trilinear);
  EXPECT_EQ(out.dims, (Vec3i{14, 14, 14}));
  for (float x : out.data) ASSERT_FLOAT_EQ(x, 3.25f);
}

TEST(Resample, RampAgainstPointwiseOracle) {
  // 4^3 at 3.0 mm -> 1.5 mm: an 8-wide grid; every voxel checked against an
  // independent trilinear interpolation at the output voxel center.
  Volume3 v = make_volume(Vec3i{4, 4, 4}, Vec3d{3.0, 3.0, 3.0});
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) v.at(x, y, z) = float(x);
  const Volume3 out = resample(v, 1.5, ResampleMode::Trilinear);
  ASSERT_EQ(out.dims, (Vec3i{8, 8, 8}));
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const double px = (x + 0.5) * 0.5 - 0.5;
        const double py = (y + 0.5) * 0.5 - 0.5;
        const double pz = (z + 0.5) * 0.5 - 0.5;
        const double expect = oracle::trilerp_clamp(v.dims, v.data, px, py, pz);
        ASSERT_NEAR(out.at(x, y, z), expect, 1e-5) << x << " " << y << " " << z;
      }
}

TEST(Resample, RandomVolumesAgainstOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3i dims{int(rng.uniform_int(2, 7)), int(rng.uniform_int(2, 7)),
                     int(rng.uniform_int(2, 7))};
    const Vec3d sp{rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)};
    const Volume3 v = testutil::random_volume(rng, dims, sp);
    const double target = rng.uniform(0.5, 3.0);
    const Volume3 out = resample(v, target, ResampleMode::Trilinear);
    for (int z = 0; z < out.dims.z; ++z)
      for (int y = 0; y < out.dims.y; ++y)
        for (int x = 0; x < out.dims.x; ++x) {
          const double expect = oracle::trilerp_clamp(
              v.dims, v.data, (x + 0.5) * target / sp.x - 0.5,
              (y + 0.5) * target / sp.y - 0.5, (z + 0.5) * target / sp.z - 0.5);
          ASSERT_NEAR(out.at(x, y, z), expect, 1e-5);
        }
  }
}

TEST(Resample, NearestPreservesLabelValueSet) {
  Rng rng(3);
  const LabelMap labels = testutil::random_labels(rng, Vec3i{6, 5, 4}, Vec3d{2, 2, 2});
  const LabelMap out = resample(labels, 0.9, ResampleMode::Nearest);
  std::set<int> in_set(labels.data.begin(), labels.data.end());
  for (auto v : out.data) EXPECT_TRUE(in_set.count(v)) << int(v);
}

TEST(Resample, TrilinearLabelsRejected) {
  const LabelMap labels = make_labelmap(Vec3i{2, 2, 2}, Vec3d{1, 1, 1});
  try {
    resample(labels, 2.0, ResampleMode::Trilinear);
    FAIL() << "expected invalid-mode error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_mode);
  }
}

TEST(ForegroundCenter, SingletonAndMidpoint) {
  LabelMap m = make_labelmap(Vec3i{8, 8, 8}, Vec3d{1, 1, 1});
  m.at(3, 4, 5) = 2;
  const Vec3d c = foreground_center(m);
  EXPECT_DOUBLE_EQ(c.x, 3.0);
  EXPECT_DOUBLE_EQ(c.y, 4.0);
  EXPECT_DOUBLE_EQ(c.z, 5.0);

  LabelMap two = make_labelmap(Vec3i{4, 4, 4}, Vec3d{1, 1, 1});
  two.at(0, 0, 0) = 1;
  two.at(2, 0, 0) = 1;
  const Vec3d mid = foreground_center(two);
  EXPECT_DOUBLE_EQ(mid.x, 1.0);
  EXPECT_DOUBLE_EQ(mid.y, 0.0);
  EXPECT_DOUBLE_EQ(mid.z, 0.0);
}

TEST(ForegroundCenter, RandomMaskMatchesBruteForce) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    LabelMap m = make_labelmap(Vec3i{7, 6, 5}, Vec3d{1, 1, 1});
    double sx = 0, sy = 0, sz = 0;
    std::size_t n = 0;
    for (int z = 0; z < 5; ++z)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 7; ++x)
          if (rng.uniform01() < 0.2) {
            m.at(x, y, z) = std::uint8_t(rng.uniform_int(1, 7));
            sx += x;
            sy += y;
            sz += z;
            ++n;
          }
    if (n == 0) continue;
    const Vec3d c = foreground_center(m);
    EXPECT_NEAR(c.x, sx / n, 1e-12);
    EXPECT_NEAR(c.y, sy / n, 1e-12);
    EXPECT_NEAR(c.z, sz / n, 1e-12);
  }
}

TEST(ForegroundCenter, EmptyForegroundFails) {
  const LabelMap m = make_labelmap(Vec3i{3, 3, 3}, Vec3d{1, 1, 1});
  try {
    foreground_center(m);
    FAIL() << "expected empty-foreground error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_foreground);
  }
}

TEST(Crop, CenterCropOfSameSizeIsIdentity) {
  Rng rng(4);
  const Volume3 v = testutil::random_volume(rng, Vec3i{4, 4, 4}, Vec3d{1, 1, 1});
  const Volume3 out = crop_to_cube(v, grid_center(v.dims), 4, -7.0f);
  for (std::size_t i = 0; i < v.data.size(); ++i) ASSERT_EQ(out.data[i], v.data[i]);
}

TEST(Crop, EntirelyOutsideGivesUniformFill) {
  Rng rng(4);
  const Volume3 v = testutil::random_volume(rng, Vec3i{4, 4, 4}, Vec3d{1, 1, 1});
  const Volume3 out = crop_to_cube(v, Vec3d{100, 100, 100}, 3, -7.0f);
  for (float x : out.data) ASSERT_EQ(x, -7.0f);
}

TEST(Crop, CornerCropMatchesIndexArithmetic) {
  // Coordinate-tagged volume: value = x + 10 y + 100 z.
  Volume3 v = make_volume(Vec3i{4, 4, 4}, Vec3d{1, 1, 1});
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) v.at(x, y, z) = float(x + 10 * y + 100 * z);
  const Volume3 out = crop_to_cube(v, Vec3d{0, 0, 0}, 3, -1.0f);
  // Output voxel o maps to input o - 1 (half = 3/2 = 1, center 0).
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        const int sx = x - 1, sy = y - 1, sz = z - 1;
        const bool inside = sx >= 0 && sy >= 0 && sz >= 0;
        const float expect = inside ? float(sx + 10 * sy + 100 * sz) : -1.0f;
        ASSERT_EQ(out.at(x, y, z), expect);
      }
}

TEST(Crop, InverseCropRestoresOverlap) {
  Rng rng(9);
  const Vec3i dims{6, 6, 6};
  const Volume3 v = testutil::random_volume(rng, dims, Vec3d{1, 1, 1});
  const Vec3d center{2.0, 3.0, 4.0};
  const int size = 4;
  const Volume3 cropped = crop_to_cube(v, center, size, 0.0f);
  // crop(out, half - c + half2) inverts the index shift for a size2 = 6 crop.
  const Vec3d inv_center{size / 2 - 2.0 + dims.x / 2, size / 2 - 3.0 + dims.y / 2,
                         size / 2 - 4.0 + dims.z / 2};
  const Volume3 restored = crop_to_cube(cropped, inv_center, 6, -99.0f);
  int checked = 0;
  for (int z = 0; z < 6; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x)
        if (restored.at(x, y, z) != -99.0f) {
          ASSERT_EQ(restored.at(x, y, z), v.at(x, y, z));
          ++checked;
        }
  EXPECT_GT(checked, 0);
}

TEST(Normalize, CtRuleExactValues) {
  Volume3 v = make_volume(Vec3i{5, 1, 1}, Vec3d{1, 1, 1});
  v.data = {-2048.0f, 0.0f, 2048.0f, 4096.0f, -1024.0f};
  const Volume3 out = normalize(v, Modality::CT);
  EXPECT_EQ(out.data[0], -1.0f);
  EXPECT_EQ(out.data[1], 0.0f);
  EXPECT_EQ(out.data[2], 1.0f);
  EXPECT_EQ(out.data[3], 1.0f);  // clipped
  EXPECT_EQ(out.data[4], -0.5f);
}

TEST(Normalize, CtOutputAlwaysInRange) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Volume3 v = testutil::random_volume(rng, Vec3i{6, 6, 6}, Vec3d{1, 1, 1}, -6000, 6000);
    const Volume3 out = normalize(v, Modality::CT);
    for (float x : out.data) {
      ASSERT_GE(x, -1.0f);
      ASSERT_LE(x, 1.0f);
    }
  }
}

TEST(Normalize, MrPercentileMapping) {
  // Values 0..100 once each: p10 = 10 and p90 = 90 under the linear
  // interpolation percentile, so 10 -> -1, 90 -> +1, 50 -> 0.
  Volume3 v = make_volume(Vec3i{101, 1, 1}, Vec3d{1, 1, 1});
  for (int i = 0; i <= 100; ++i) v.data[i] = float(100 - i);  // unsorted on purpose
  const Volume3 out = normalize(v, Modality::MR);
  auto value_of = [&](float raw) {
    for (std::size_t i = 0; i < v.data.size(); ++i)
      if (v.data[i] == raw) return out.data[i];
    ADD_FAILURE();
    return 0.0f;
  };
  EXPECT_NEAR(value_of(10.0f), -1.0f, 1e-6);
  EXPECT_NEAR(value_of(90.0f), 1.0f, 1e-6);
  EXPECT_NEAR(value_of(50.0f), 0.0f, 1e-6);
  EXPECT_NEAR(value_of(0.0f), -1.25f, 1e-6);    // not clipped
  EXPECT_NEAR(value_of(100.0f), 1.25f, 1e-6);   // not clipped
}

TEST(Normalize, MrAffineInvariance) {
  Rng rng(13);
  const Volume3 v = testutil::random_volume(rng, Vec3i{8, 8, 8}, Vec3d{1, 1, 1}, 0, 500);
  const Volume3 base = normalize(v, Modality::MR);
  Volume3 scaled = v;
  for (float& x : scaled.data) x = 3.7f * x + 250.0f;
  const Volume3 out = normalize(scaled, Modality::MR);
  for (std::size_t i = 0; i < base.data.size(); ++i)
    ASSERT_NEAR(out.data[i], base.data[i], 1e-5);
}

TEST(Normalize, MrDegenerateIntensityFails) {
  const Volume3 v = make_volume(Vec3i{4, 4, 4}, Vec3d{1, 1, 1}, 7.0f);
  try {
    normalize(v, Modality::MR);
    FAIL() << "expected degenerate-intensity error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_intensity);
  }
}

TEST(DetectModality, HounsfieldHeuristic) {
  Volume3 ct = make_volume(Vec3i{2, 2, 2}, Vec3d{1, 1, 1});
  ct.data = {-1000, 1500, 30, 40, -500, 200, 70, 90};
  EXPECT_EQ(detect_modality(ct), Modality::CT);

  Volume3 mr = make_volume(Vec3i{2, 2, 2}, Vec3d{1, 1, 1});
  mr.data = {0, 800, 100, 230, 400, 20, 650, 75};
  EXPECT_EQ(detect_modality(mr), Modality::MR);

  const Volume3 zeros = make_volume(Vec3i{3, 3, 3}, Vec3d{1, 1, 1});
  EXPECT_EQ(detect_modality(zeros), Modality::MR);

  // Wide range alone is not enough without the air signal.
  Volume3 bright = make_volume(Vec3i{2, 2, 2}, Vec3d{1, 1, 1});
  bright.data = {0, 2500, 100, 230, 400, 20, 650, 75};
  EXPECT_EQ(detect_modality(bright), Modality::MR);
}
