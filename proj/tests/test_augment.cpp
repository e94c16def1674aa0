#include <cmath>
#include <gtest/gtest.h>
#include <set>

#include "cardioseg/augment.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace cardioseg;

namespace {

SpatialAugConfig zero_ranges() {
  SpatialAugConfig cfg;
  cfg.max_translation = 0;
  cfg.max_rotation = 0;
  cfg.scale_lo = cfg.scale_hi = 1.0;
  cfg.max_elastic = 0;
  cfg.elastic_grid_nodes = 2;
  return cfg;
}

}  // namespace

TEST(SampleSpatial, AllRangesZeroGivesZeroField) {
  Rng rng(1);
  const DisplacementField f = sample_spatial(zero_ranges(), Vec3i{5, 4, 3}, rng);
  for (std::size_t i = 0; i < f.dx.size(); ++i) {
    ASSERT_EQ(f.dx[i], 0.0f);
    ASSERT_EQ(f.dy[i], 0.0f);
    ASSERT_EQ(f.dz[i], 0.0f);
  }
}

TEST(SampleSpatial, TranslationOnlyIsConstantField) {
  SpatialAugConfig cfg = zero_ranges();
  cfg.max_translation = 5.0;
  Rng rng(42);
  const DisplacementField f = sample_spatial(cfg, Vec3i{4, 4, 4}, rng);
  // Replay the draw order to recover the sampled translation.
  Rng replay(42);
  const float tx = float(replay.uniform(-5.0, 5.0));
  const float ty = float(replay.uniform(-5.0, 5.0));
  const float tz = float(replay.uniform(-5.0, 5.0));
  for (std::size_t i = 0; i < f.dx.size(); ++i) {
    ASSERT_NEAR(f.dx[i], tx, 1e-5);
    ASSERT_NEAR(f.dy[i], ty, 1e-5);
    ASSERT_NEAR(f.dz[i], tz, 1e-5);
  }
}

TEST(SampleSpatial, RotationOnlyMatchesClosedForm) {
  SpatialAugConfig cfg = zero_ranges();
  cfg.max_rotation = 0.35;
  const Vec3i dims{6, 5, 7};
  Rng rng(7);
  const DisplacementField f = sample_spatial(cfg, dims, rng);

  Rng replay(7);
  for (int i = 0; i < 3; ++i) replay.uniform(0, 0);  // translation draws
  const double ax = replay.uniform(-0.35, 0.35);
  const double ay = replay.uniform(-0.35, 0.35);
  const double az = replay.uniform(-0.35, 0.35);

  // Independent closed-form rotation about the grid center, X*Y*Z order.
  const double cX = std::cos(ax), sX = std::sin(ax);
  const double cY = std::cos(ay), sY = std::sin(ay);
  const double cZ = std::cos(az), sZ = std::sin(az);
  const Vec3d c{(dims.x - 1) / 2.0, (dims.y - 1) / 2.0, (dims.z - 1) / 2.0};
  std::size_t i = 0;
  for (int z = 0; z < dims.z; ++z)
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x, ++i) {
        const double u = x - c.x, v = y - c.y, w = z - c.z;
        // Rz, then Ry, then Rx applied to (u, v, w).
        const double u1 = cZ * u - sZ * v, v1 = sZ * u + cZ * v, w1 = w;
        const double u2 = cY * u1 + sY * w1, v2 = v1, w2 = -sY * u1 + cY * w1;
        const double u3 = u2, v3 = cX * v2 - sX * w2, w3 = sX * v2 + cX * w2;
        ASSERT_NEAR(f.dx[i], u3 + c.x - x, 1e-4);
        ASSERT_NEAR(f.dy[i], v3 + c.y - y, 1e-4);
        ASSERT_NEAR(f.dz[i], w3 + c.z - z, 1e-4);
      }
}

TEST(SampleSpatial, SameSeedReproduces) {
  SpatialAugConfig cfg;  // full defaults
  cfg.elastic_grid_nodes = 3;
  Rng a(99), b(99);
  const DisplacementField fa = sample_spatial(cfg, Vec3i{6, 6, 6}, a);
  const DisplacementField fb = sample_spatial(cfg, Vec3i{6, 6, 6}, b);
  EXPECT_EQ(fa.dx, fb.dx);
  EXPECT_EQ(fa.dy, fb.dy);
  EXPECT_EQ(fa.dz, fb.dz);
}

TEST(ApplyField, ZeroFieldIsIdentityBothModes) {
  Rng rng(3);
  const Vec3i dims{5, 4, 3};
  const Volume3 v = testutil::random_volume(rng, dims, Vec3d{1, 1, 1});
  DisplacementField zero;
  zero.dims = dims;
  zero.dx.assign(voxel_count(dims), 0);
  zero.dy.assign(voxel_count(dims), 0);
  zero.dz.assign(voxel_count(dims), 0);

  const Volume3 tri = apply_field(v, zero, Interp::Trilinear, -9.0f);
  const Volume3 nn = apply_field(v, zero, Interp::Nearest, -9.0f);
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    ASSERT_EQ(tri.data[i], v.data[i]);
    ASSERT_EQ(nn.data[i], v.data[i]);
  }

  const LabelMap labels = testutil::random_labels(rng, dims, Vec3d{1, 1, 1});
  const LabelMap lout = apply_field(labels, zero, Interp::Nearest);
  EXPECT_EQ(lout.data, labels.data);
}

TEST(ApplyField, IntegerTranslationShiftsExactly) {
  Rng rng(17);
  const Vec3i dims{5, 5, 5};
  const LabelMap labels = testutil::random_labels(rng, dims, Vec3d{1, 1, 1});
  DisplacementField f;
  f.dims = dims;
  f.dx.assign(voxel_count(dims), 2.0f);  // sample from x+2
  f.dy.assign(voxel_count(dims), 0.0f);
  f.dz.assign(voxel_count(dims), -1.0f);
  const LabelMap out = apply_field(labels, f, Interp::Nearest, 0);
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        const int sx = x + 2, sz = z - 1;
        const std::uint8_t expect =
            (sx < 5 && sz >= 0) ? labels.at(sx, y, sz) : std::uint8_t(0);
        ASSERT_EQ(out.at(x, y, z), expect);
      }
}

TEST(ApplyField, RandomSmoothFieldMatchesPointwiseOracle) {
  Rng rng(23);
  const Vec3i dims{8, 8, 8};
  Volume3 v = make_volume(dims, Vec3d{1, 1, 1});
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) v.at(x, y, z) = float(x + 0.5 * y - 0.25 * z);

  SpatialAugConfig cfg;
  cfg.max_translation = 1.0;
  cfg.max_rotation = 0.2;
  cfg.scale_lo = 0.9;
  cfg.scale_hi = 1.1;
  cfg.elastic_grid_nodes = 3;
  cfg.max_elastic = 0.8;
  const DisplacementField f = sample_spatial(cfg, dims, rng);
  const Volume3 out = apply_field(v, f, Interp::Trilinear, -5.0f);
  std::size_t i = 0;
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x, ++i) {
        const double expect = oracle::trilerp_fill(dims, v.data, x + double(f.dx[i]),
                                                   y + double(f.dy[i]), z + double(f.dz[i]),
                                                   -5.0);
        ASSERT_NEAR(out.at(x, y, z), expect, 1e-5);
      }
}

TEST(ApplyField, NearestNeverInventsLabels) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3i dims{6, 6, 6};
    LabelMap labels = make_labelmap(dims, Vec3d{1, 1, 1});
    for (auto& x : labels.data)
      x = rng.uniform01() < 0.5 ? 0 : std::uint8_t(rng.uniform_int(2, 5));
    SpatialAugConfig cfg;
    cfg.max_translation = 2.0;
    cfg.elastic_grid_nodes = 3;
    cfg.max_elastic = 2.0;
    const DisplacementField f = sample_spatial(cfg, dims, rng);
    const LabelMap out = apply_field(labels, f, Interp::Nearest, 0);
    std::set<int> in_set(labels.data.begin(), labels.data.end());
    in_set.insert(0);  // fill
    for (auto v : out.data) ASSERT_TRUE(in_set.count(v));
  }
}

TEST(ApplyField, ConstantVolumeStaysConstantInside) {
  Rng rng(5);
  const Vec3i dims{8, 8, 8};
  const Volume3 v = make_volume(dims, Vec3d{1, 1, 1}, 2.5f);
  SpatialAugConfig cfg;
  cfg.max_translation = 1.5;
  cfg.max_rotation = 0.3;
  cfg.elastic_grid_nodes = 3;
  cfg.max_elastic = 1.0;
  const DisplacementField f = sample_spatial(cfg, dims, rng);
  const Volume3 out = apply_field(v, f, Interp::Trilinear, -1.0f);
  for (float x : out.data) ASSERT_TRUE(x == 2.5f || x == -1.0f);
}

TEST(ApplyField, DimsMismatchFails) {
  const Volume3 v = make_volume(Vec3i{3, 3, 3}, Vec3d{1, 1, 1});
  DisplacementField f;
  f.dims = Vec3i{2, 2, 2};
  f.dx.assign(8, 0);
  f.dy.assign(8, 0);
  f.dz.assign(8, 0);
  EXPECT_THROW(apply_field(v, f, Interp::Trilinear, 0.0f), Error);
  const LabelMap m = make_labelmap(Vec3i{3, 3, 3}, Vec3d{1, 1, 1});
  try {
    apply_field(m, f, Interp::Trilinear);
    FAIL() << "expected invalid-mode error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_mode);
  }
}

TEST(SampleIntensity, RangesRespectedCtAndMr) {
  IntensityAugConfig cfg;
  Rng rng(12);
  const std::set<std::uint8_t> labels{1, 3, 5};
  for (int trial = 0; trial < 200; ++trial) {
    const IntensityAugParams ct = sample_intensity(Modality::CT, labels, cfg, rng);
    ASSERT_GE(ct.global_shift, -0.2);
    ASSERT_LE(ct.global_shift, 0.2);
    ASSERT_GE(ct.global_scale, 0.8);
    ASSERT_LE(ct.global_scale, 1.2);
    ASSERT_EQ(ct.per_label.size(), 3u);
    for (const auto& [label, pair] : ct.per_label) {
      ASSERT_GE(pair.first, -0.1);
      ASSERT_LE(pair.first, 0.1);
      ASSERT_GE(pair.second, 0.9);
      ASSERT_LE(pair.second, 1.1);
    }
    const IntensityAugParams mr = sample_intensity(Modality::MR, labels, cfg, rng);
    ASSERT_GE(mr.global_scale, 0.6);
    ASSERT_LE(mr.global_scale, 1.4);
  }
}

TEST(SampleIntensity, EmptyLabelSetGivesEmptyMap) {
  IntensityAugConfig cfg;
  Rng rng(8);
  const IntensityAugParams p = sample_intensity(Modality::CT, {}, cfg, rng);
  EXPECT_TRUE(p.per_label.empty());
}

TEST(SampleIntensity, MonteCarloRangeCoverage) {
  IntensityAugConfig cfg;
  Rng rng(99);
  double shift_min = 1e9, shift_max = -1e9, scale_min = 1e9, scale_max = -1e9;
  for (int i = 0; i < 10000; ++i) {
    const IntensityAugParams p = sample_intensity(Modality::MR, {}, cfg, rng);
    shift_min = std::min(shift_min, p.global_shift);
    shift_max = std::max(shift_max, p.global_shift);
    scale_min = std::min(scale_min, p.global_scale);
    scale_max = std::max(scale_max, p.global_scale);
  }
  // Empirical extremes sit inside and near the bounds.
  EXPECT_GE(shift_min, -0.2);
  EXPECT_LE(shift_min, -0.195);
  EXPECT_LE(shift_max, 0.2);
  EXPECT_GE(shift_max, 0.195);
  EXPECT_GE(scale_min, 0.6);
  EXPECT_LE(scale_min, 0.61);
  EXPECT_LE(scale_max, 1.4);
  EXPECT_GE(scale_max, 1.39);
}

TEST(ApplyIntensity, IdentityParamsLeaveVolumeUnchanged) {
  Rng rng(14);
  const Volume3 v = testutil::random_volume(rng, Vec3i{4, 4, 4}, Vec3d{1, 1, 1});
  const LabelMap labels = testutil::random_labels(rng, Vec3i{4, 4, 4}, Vec3d{1, 1, 1});
  const Volume3 out = apply_intensity(v, labels, IntensityAugParams{});
  for (std::size_t i = 0; i < v.data.size(); ++i) ASSERT_EQ(out.data[i], v.data[i]);
}

TEST(ApplyIntensity, GlobalShiftOnly) {
  Rng rng(15);
  const Volume3 v = testutil::random_volume(rng, Vec3i{4, 4, 4}, Vec3d{1, 1, 1});
  const LabelMap labels = make_labelmap(Vec3i{4, 4, 4}, Vec3d{1, 1, 1});
  IntensityAugParams p;
  p.global_shift = 0.2;
  const Volume3 out = apply_intensity(v, labels, p);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    ASSERT_NEAR(out.data[i], v.data[i] + 0.2f, 1e-6);
}

TEST(ApplyIntensity, PerLabelMatchesPointwiseEvaluation) {
  const Vec3i dims{4, 4, 4};
  Volume3 v = make_volume(dims, Vec3d{1, 1, 1});
  LabelMap labels = make_labelmap(dims, Vec3d{1, 1, 1});
  Rng rng(16);
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    v.data[i] = float(rng.uniform(-1, 1));
    labels.data[i] = i % 3 == 0 ? 1 : (i % 3 == 1 ? 2 : 0);
  }
  IntensityAugParams p;
  p.global_shift = -0.1;
  p.global_scale = 1.1;
  p.per_label[1] = {0.05, 0.95};
  p.per_label[2] = {-0.07, 1.08};
  const Volume3 out = apply_intensity(v, labels, p);
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    double shift = 0.0, scale = 1.0;
    if (labels.data[i] == 1) { shift = 0.05; scale = 0.95; }
    if (labels.data[i] == 2) { shift = -0.07; scale = 1.08; }
    const double expect = scale * (1.1 * v.data[i] - 0.1) + shift;
    ASSERT_NEAR(out.data[i], expect, 1e-6);
  }
}

TEST(ApplyIntensity, ShapeMismatchFails) {
  const Volume3 v = make_volume(Vec3i{3, 3, 3}, Vec3d{1, 1, 1});
  const LabelMap labels = make_labelmap(Vec3i{2, 2, 2}, Vec3d{1, 1, 1});
  try {
    apply_intensity(v, labels, IntensityAugParams{});
    FAIL() << "expected shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape);
  }
}
