#pragma once

// Paired synthetic phantoms standing in for real scans: seven non-overlapping
// ellipsoid/shell/tube structures with a CT-like rendering (Hounsfield-scale
// constants, air background region, additive noise) and an MR-like rendering
// (non-negative, different intensity ordering, multiplicative noise).
// Constant-plus-noise intensities keep the task learnable by a tiny net;
// anatomical realism is a non-goal.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "cardioseg/errors.hpp"
#include "cardioseg/rng.hpp"
#include "cardioseg/volume.hpp"

namespace cardioseg {

// Label roster: 1 LV, 2 RV, 3 LA, 4 RA blood pools, 5 LV myocardium shell,
// 6 aorta, 7 pulmonary artery.
enum : std::uint8_t {
  kLabelLV = 1,
  kLabelRV = 2,
  kLabelLA = 3,
  kLabelRA = 4,
  kLabelMyo = 5,
  kLabelAorta = 6,
  kLabelPA = 7,
};

struct PhantomPair {
  Volume3 ct;
  Volume3 mr;
  LabelMap labels;
};

namespace detail {

struct Ellipsoid {
  double cx, cy, cz;  // unit coordinates
  double ax, ay, az;  // semi-axes, unit coordinates

  bool contains(double x, double y, double z) const {
    const double u = (x - cx) / ax, v = (y - cy) / ay, w = (z - cz) / az;
    return u * u + v * v + w * w <= 1.0;
  }
};

struct TubeZ {
  double cx, cy;    // axis position
  double radius;    // unit coordinates
  double z0, z1;

  bool contains(double x, double y, double z) const {
    if (z < z0 || z > z1) return false;
    const double u = x - cx, v = y - cy;
    return u * u + v * v <= radius * radius;
  }
};

}  // namespace detail

inline PhantomPair generate_phantom(Rng& rng, int size, double spacing) {
  if (size < 16) fail(Errc::config, "generate_phantom: size must be >= 16");
  if (spacing <= 0) fail(Errc::config, "generate_phantom: spacing must be > 0");

  auto jc = [&rng]() { return rng.uniform(-0.012, 0.012); };  // center jitter
  auto jr = [&rng]() { return rng.uniform(0.95, 1.05); };     // radius jitter

  using detail::Ellipsoid;
  using detail::TubeZ;

  // Draw order is fixed: LV, shell thickness, RV, LA, RA, aorta, PA.
  // Structure volumes are kept within a few voxel-count octaves of each
  // other so that class-balanced losses converge at similar speeds.
  const double lv_r = jr();
  const Ellipsoid lv{0.40 + jc(), 0.42 + jc(), 0.42 + jc(),
                     0.130 * lv_r, 0.130 * lv_r, 0.160 * lv_r};
  const double shell_t = std::max(0.045 * jr(), 1.05 / size);
  const Ellipsoid myo_outer{lv.cx, lv.cy, lv.cz, lv.ax + shell_t, lv.ay + shell_t,
                            lv.az + shell_t};
  const double rv_r = jr();
  const Ellipsoid rv{0.70 + jc(), 0.40 + jc(), 0.42 + jc(),
                     0.120 * rv_r, 0.120 * rv_r, 0.150 * rv_r};
  const double la_r = jr();
  const Ellipsoid la{0.40 + jc(), 0.70 + jc(), 0.55 + jc(),
                     0.115 * la_r, 0.115 * la_r, 0.140 * la_r};
  const double ra_r = jr();
  const Ellipsoid ra{0.70 + jc(), 0.70 + jc(), 0.55 + jc(),
                     0.115 * ra_r, 0.115 * ra_r, 0.140 * ra_r};
  const TubeZ aorta{0.53 + jc(), 0.56 + jc(), std::max(0.085 * jr(), 1.0 / size), 0.55, 0.95};
  const TubeZ pa{0.70 + jc(), 0.52 + jc(), std::max(0.080 * jr(), 1.0 / size), 0.58, 0.95};

  // Everything outside the body ellipsoid is air in the CT rendering.
  const Ellipsoid body{0.52, 0.52, 0.50, 0.47, 0.47, 0.55};

  const Vec3i dims{size, size, size};
  const Vec3d sp{spacing, spacing, spacing};
  PhantomPair p{make_volume(dims, sp), make_volume(dims, sp), make_labelmap(dims, sp)};

  std::vector<std::uint8_t> air(voxel_count(dims), 0);
  std::size_t i = 0;
  for (int z = 0; z < size; ++z)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x, ++i) {
        const double ux = (x + 0.5) / size;
        const double uy = (y + 0.5) / size;
        const double uz = (z + 0.5) / size;
        std::uint8_t label = 0;
        if (lv.contains(ux, uy, uz)) label = kLabelLV;
        else if (myo_outer.contains(ux, uy, uz)) label = kLabelMyo;
        else if (rv.contains(ux, uy, uz)) label = kLabelRV;
        else if (la.contains(ux, uy, uz)) label = kLabelLA;
        else if (ra.contains(ux, uy, uz)) label = kLabelRA;
        else if (aorta.contains(ux, uy, uz)) label = kLabelAorta;
        else if (pa.contains(ux, uy, uz)) label = kLabelPA;
        p.labels.data[i] = label;
        if (label == 0 && !body.contains(ux, uy, uz)) air[i] = 1;
      }

  // HU-plausible constants per structure: contrast-enhanced pools spread
  // across the enhancement range, myocardium near soft tissue.
  static constexpr std::array<double, kNumClasses> ct_hu{40.0,  500.0, 150.0, 650.0,
                                                         300.0, 60.0,  800.0, 400.0};
  // MR rendering: non-negative, different background/air behaviour and a
  // different per-label intensity ordering (RV and myocardium swap ranks).
  static constexpr std::array<double, kNumClasses> mr_base{250.0, 700.0, 120.0, 850.0,
                                                           480.0, 300.0, 950.0, 580.0};

  for (i = 0; i < p.labels.data.size(); ++i) {
    const double base = air[i] ? -1000.0 : ct_hu[p.labels.data[i]];
    p.ct.data[i] = static_cast<float>(base + rng.normal(0.0, 7.0));
  }
  for (i = 0; i < p.labels.data.size(); ++i) {
    const double base = air[i] ? 10.0 : mr_base[p.labels.data[i]];
    const double v = base * (1.0 + 0.03 * rng.normal(0.0, 1.0));
    p.mr.data[i] = static_cast<float>(std::max(0.0, v));
  }
  return p;
}

}  // namespace cardioseg
