#pragma once

// Spatial augmentation (translation, rotation, scaling, elastic deformation)
// expressed as one backward-warping displacement field, plus classical
// intensity augmentation (global and per-label shift/scale).

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "cardioseg/errors.hpp"
#include "cardioseg/interpolation.hpp"
#include "cardioseg/preprocess.hpp"
#include "cardioseg/rng.hpp"
#include "cardioseg/volume.hpp"

namespace cardioseg {

struct SpatialAugConfig {
  double max_translation = 20.0;  // voxels, per axis
  double max_rotation = 0.35;     // radians, per axis
  double scale_lo = 0.8;
  double scale_hi = 1.2;        // isotropic
  int elastic_grid_nodes = 8;   // per dimension
  double max_elastic = 15.0;    // voxels, per component

  void validate() const {
    if (max_translation < 0 || max_rotation < 0 || max_elastic < 0)
      fail(Errc::config, "spatial augmentation: ranges must be >= 0");
    if (!(scale_lo > 0) || scale_lo > scale_hi)
      fail(Errc::config, "spatial augmentation: require 0 < scale_lo <= scale_hi");
    if (elastic_grid_nodes < 2) fail(Errc::config, "spatial augmentation: grid nodes >= 2");
  }
};

// Per-voxel displacement in voxels; output(v) samples input at v + field(v).
struct DisplacementField {
  Vec3i dims;
  std::vector<float> dx, dy, dz;
};

struct IntensityAugParams {
  double global_shift = 0.0;
  double global_scale = 1.0;
  std::map<std::uint8_t, std::pair<double, double>> per_label;  // label -> (shift, scale)
};

struct IntensityAugConfig {
  double max_shift = 0.2;
  double ct_scale_lo = 0.8, ct_scale_hi = 1.2;
  double mr_scale_lo = 0.6, mr_scale_hi = 1.4;
  // Per-label ranges; kept small relative to the global ranges.
  double label_shift = 0.1;
  double label_scale_lo = 0.9, label_scale_hi = 1.1;

  void validate() const {
    if (max_shift < 0 || label_shift < 0)
      fail(Errc::config, "intensity augmentation: shifts must be >= 0");
    if (!(ct_scale_lo > 0) || ct_scale_lo > ct_scale_hi || !(mr_scale_lo > 0) ||
        mr_scale_lo > mr_scale_hi || !(label_scale_lo > 0) || label_scale_lo > label_scale_hi)
      fail(Errc::config, "intensity augmentation: invalid scale range");
  }
};

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
      r[i][j] = s;
    }
  return r;
}

inline Mat3 rotation_xyz(double ax, double ay, double az) {
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cz = std::cos(az), sz = std::sin(az);
  const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  return mat_mul(rx, mat_mul(ry, rz));
}

}  // namespace detail

// Draws one spatial transform and materializes it as a displacement field:
// an affine part (isotropic scale, then rotations composed X*Y*Z, then
// translation, all about the grid center) plus an elastic part drawn on a
// coarse control grid and upsampled trilinearly to the voxel grid.
// Draw order is fixed, so a seed fully determines the field.
inline DisplacementField sample_spatial(const SpatialAugConfig& cfg, Vec3i dims, Rng& rng) {
  cfg.validate();
  if (dims.x < 1 || dims.y < 1 || dims.z < 1)
    fail(Errc::config, "sample_spatial: dims must be >= 1");

  const double tx = rng.uniform(-cfg.max_translation, cfg.max_translation);
  const double ty = rng.uniform(-cfg.max_translation, cfg.max_translation);
  const double tz = rng.uniform(-cfg.max_translation, cfg.max_translation);
  const double ax = rng.uniform(-cfg.max_rotation, cfg.max_rotation);
  const double ay = rng.uniform(-cfg.max_rotation, cfg.max_rotation);
  const double az = rng.uniform(-cfg.max_rotation, cfg.max_rotation);
  const double scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  const detail::Mat3 rot = detail::rotation_xyz(ax, ay, az);

  const int gn = cfg.elastic_grid_nodes;
  std::vector<float> gx(static_cast<std::size_t>(gn) * gn * gn);
  std::vector<float> gy(gx.size()), gz(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) {
    gx[i] = static_cast<float>(rng.uniform(-cfg.max_elastic, cfg.max_elastic));
    gy[i] = static_cast<float>(rng.uniform(-cfg.max_elastic, cfg.max_elastic));
    gz[i] = static_cast<float>(rng.uniform(-cfg.max_elastic, cfg.max_elastic));
  }
  const Vec3i gdims{gn, gn, gn};
  // Control node i sits at voxel coordinate i * (dim-1)/(gn-1).
  const double ux = dims.x > 1 ? double(gn - 1) / (dims.x - 1) : 0.0;
  const double uy = dims.y > 1 ? double(gn - 1) / (dims.y - 1) : 0.0;
  const double uz = dims.z > 1 ? double(gn - 1) / (dims.z - 1) : 0.0;

  const Vec3d c = grid_center(dims);
  DisplacementField f;
  f.dims = dims;
  f.dx.resize(voxel_count(dims));
  f.dy.resize(f.dx.size());
  f.dz.resize(f.dx.size());

  std::size_t i = 0;
  for (int z = 0; z < dims.z; ++z)
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x, ++i) {
        const double vx = scale * (x - c.x);
        const double vy = scale * (y - c.y);
        const double vz = scale * (z - c.z);
        const double px = rot[0][0] * vx + rot[0][1] * vy + rot[0][2] * vz + c.x + tx;
        const double py = rot[1][0] * vx + rot[1][1] * vy + rot[1][2] * vz + c.y + ty;
        const double pz = rot[2][0] * vx + rot[2][1] * vy + rot[2][2] * vz + c.z + tz;
        const double gxp = x * ux, gyp = y * uy, gzp = z * uz;
        const double ex =
            sample_trilinear(gdims, gx.data(), gxp, gyp, gzp, Boundary::ClampToEdge, 0.0);
        const double ey =
            sample_trilinear(gdims, gy.data(), gxp, gyp, gzp, Boundary::ClampToEdge, 0.0);
        const double ez =
            sample_trilinear(gdims, gz.data(), gxp, gyp, gzp, Boundary::ClampToEdge, 0.0);
        f.dx[i] = static_cast<float>(px - x + ex);
        f.dy[i] = static_cast<float>(py - y + ey);
        f.dz[i] = static_cast<float>(pz - z + ez);
      }
  return f;
}

// Backward warp: output(v) = interpolate(input, v + field(v)); reads outside
// the grid return `fill`.
inline Volume3 apply_field(const Volume3& vol, const DisplacementField& field, Interp mode,
                           float fill) {
  check_same_dims(vol.dims, field.dims, "apply_field");
  Volume3 out = make_volume(vol.dims, vol.spacing);
  std::size_t i = 0;
  for (int z = 0; z < vol.dims.z; ++z)
    for (int y = 0; y < vol.dims.y; ++y)
      for (int x = 0; x < vol.dims.x; ++x, ++i) {
        const double px = x + double(field.dx[i]);
        const double py = y + double(field.dy[i]);
        const double pz = z + double(field.dz[i]);
        out.data[i] = mode == Interp::Trilinear
                          ? static_cast<float>(sample_trilinear(vol.dims, vol.data.data(), px,
                                                                py, pz, Boundary::Fill, fill))
                          : sample_nearest(vol.dims, vol.data.data(), px, py, pz,
                                           Boundary::Fill, fill);
      }
  return out;
}

inline LabelMap apply_field(const LabelMap& labels, const DisplacementField& field,
                            Interp mode, std::uint8_t fill = 0) {
  if (mode != Interp::Nearest)
    fail(Errc::invalid_mode, "apply_field: label maps require Nearest mode");
  check_same_dims(labels.dims, field.dims, "apply_field");
  LabelMap out = make_labelmap(labels.dims, labels.spacing);
  std::size_t i = 0;
  for (int z = 0; z < labels.dims.z; ++z)
    for (int y = 0; y < labels.dims.y; ++y)
      for (int x = 0; x < labels.dims.x; ++x, ++i)
        out.data[i] =
            sample_nearest(labels.dims, labels.data.data(), x + double(field.dx[i]),
                           y + double(field.dy[i]), z + double(field.dz[i]), Boundary::Fill,
                           fill);
  return out;
}

// Global shift/scale plus an extra shift/scale per present foreground label.
// Labels are visited in ascending order so a seed determines the draw.
inline IntensityAugParams sample_intensity(Modality modality,
                                           const std::set<std::uint8_t>& labels_present,
                                           const IntensityAugConfig& cfg, Rng& rng) {
  cfg.validate();
  IntensityAugParams p;
  p.global_shift = rng.uniform(-cfg.max_shift, cfg.max_shift);
  p.global_scale = modality == Modality::CT ? rng.uniform(cfg.ct_scale_lo, cfg.ct_scale_hi)
                                            : rng.uniform(cfg.mr_scale_lo, cfg.mr_scale_hi);
  for (std::uint8_t label : labels_present) {
    if (label == 0) continue;
    const double shift = rng.uniform(-cfg.label_shift, cfg.label_shift);
    const double scale = rng.uniform(cfg.label_scale_lo, cfg.label_scale_hi);
    p.per_label[label] = {shift, scale};
  }
  return p;
}

// out(v) = s_l * (global_scale * in(v) + global_shift) + t_l with (t_l, s_l)
// the per-label pair for labels(v), identity (0, 1) when absent. No clipping.
inline Volume3 apply_intensity(const Volume3& vol, const LabelMap& labels,
                               const IntensityAugParams& p) {
  check_same_dims(vol.dims, labels.dims, "apply_intensity");
  if (p.global_scale <= 0) fail(Errc::config, "apply_intensity: global scale must be > 0");
  std::array<double, kNumClasses> shift{};
  std::array<double, kNumClasses> scale;
  scale.fill(1.0);
  for (const auto& [label, pair] : p.per_label) {
    if (label >= kNumClasses) fail(Errc::config, "apply_intensity: label out of range");
    if (pair.second <= 0) fail(Errc::config, "apply_intensity: per-label scale must be > 0");
    shift[label] = pair.first;
    scale[label] = pair.second;
  }
  Volume3 out = make_volume(vol.dims, vol.spacing);
  for (std::size_t i = 0; i < vol.data.size(); ++i) {
    const std::uint8_t l = labels.data[i];
    out.data[i] = static_cast<float>(scale[l] * (p.global_scale * vol.data[i] + p.global_shift) +
                                     shift[l]);
  }
  return out;
}

}  // namespace cardioseg
