#include <gtest/gtest.h>
#include <set>

#include "cardioseg/preprocess.hpp"
#include "cardioseg/synth.hpp"
#include "testutil.hpp"

using namespace cardioseg;

TEST(Synth, SameSeedGivesIdenticalTriple) {
  Rng a(4), b(4);
  const PhantomPair pa = generate_phantom(a, 32, 1.5);
  const PhantomPair pb = generate_phantom(b, 32, 1.5);
  EXPECT_EQ(pa.ct.data, pb.ct.data);
  EXPECT_EQ(pa.mr.data, pb.mr.data);
  EXPECT_EQ(pa.labels.data, pb.labels.data);
}

TEST(Synth, AllLabelsPresentFromSize32) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u, 17u, 99u}) {
    Rng rng(seed);
    const PhantomPair p = generate_phantom(rng, 32, 1.5);
    std::set<int> labels(p.labels.data.begin(), p.labels.data.end());
    EXPECT_EQ(labels.size(), 8u) << "seed " << seed;
    for (int l = 0; l <= 7; ++l) EXPECT_TRUE(labels.count(l)) << "seed " << seed << " label " << l;
  }
}

TEST(Synth, ModalityDetectionFires) {
  for (std::uint64_t seed : {1u, 7u, 21u, 555u}) {
    Rng rng(seed);
    const PhantomPair p = generate_phantom(rng, 32, 1.5);
    EXPECT_EQ(detect_modality(p.ct), Modality::CT) << "seed " << seed;
    EXPECT_EQ(detect_modality(p.mr), Modality::MR) << "seed " << seed;
  }
}

TEST(Synth, IntensityEnvelopes) {
  Rng rng(11);
  const PhantomPair p = generate_phantom(rng, 32, 1.5);
  EXPECT_LE(volume_min(p.ct), -200.0f);
  EXPECT_GE(volume_min(p.mr), 0.0f);
}

TEST(Synth, MyocardiumShellTouchesLvPool) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Rng rng(seed);
    const PhantomPair p = generate_phantom(rng, 32, 1.5);
    const LabelMap& m = p.labels;
    bool adjacent = false;
    for (int z = 0; z < m.dims.z && !adjacent; ++z)
      for (int y = 0; y < m.dims.y && !adjacent; ++y)
        for (int x = 0; x < m.dims.x && !adjacent; ++x) {
          if (m.at(x, y, z) != kLabelLV) continue;
          const int nb[6][3] = {{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z},
                                {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}};
          for (const auto& n : nb) {
            if (n[0] < 0 || n[0] >= m.dims.x || n[1] < 0 || n[1] >= m.dims.y || n[2] < 0 ||
                n[2] >= m.dims.z)
              continue;
            if (m.at(n[0], n[1], n[2]) == kLabelMyo) {
              adjacent = true;
              break;
            }
          }
        }
    EXPECT_TRUE(adjacent) << "seed " << seed;
  }
}

TEST(Synth, ForegroundFractionInBounds) {
  for (std::uint64_t seed : {1u, 2u, 3u, 9u, 13u, 77u}) {
    for (int size : {32, 48}) {
      Rng rng(seed);
      const PhantomPair p = generate_phantom(rng, size, 1.5);
      std::size_t fg = 0;
      for (auto v : p.labels.data) fg += v > 0;
      const double fraction = double(fg) / double(p.labels.data.size());
      EXPECT_GE(fraction, 0.05) << "seed " << seed << " size " << size;
      EXPECT_LE(fraction, 0.60) << "seed " << seed << " size " << size;
    }
  }
}

TEST(Synth, RejectsTooSmallSize) {
  Rng rng(1);
  try {
    generate_phantom(rng, 15, 1.5);
    FAIL() << "expected config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

TEST(Synth, HeaderSpacingAndDims) {
  Rng rng(2);
  const PhantomPair p = generate_phantom(rng, 16, 3.0);
  EXPECT_EQ(p.ct.dims, (Vec3i{16, 16, 16}));
  EXPECT_EQ(p.ct.spacing, (Vec3d{3.0, 3.0, 3.0}));
  EXPECT_EQ(p.labels.dims, p.ct.dims);
  EXPECT_EQ(p.mr.dims, p.ct.dims);
}
