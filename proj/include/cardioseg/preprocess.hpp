#pragma once

// Preprocessing the network sees for every sample: resample to isotropic
// spacing, crop a cube around the heart, normalize per modality. Modality of
// unlabeled inputs is detected from the intensity histogram.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cardioseg/errors.hpp"
#include "cardioseg/interpolation.hpp"
#include "cardioseg/volume.hpp"

namespace cardioseg {

enum class Modality { CT, MR };

enum class ResampleMode { Trilinear, Nearest };

namespace detail {

inline Vec3i resampled_dims(const Vec3i& dims, const Vec3d& spacing, double target) {
  auto out = [target](int n, double s) {
    return std::max<int>(1, static_cast<int>(std::llround(n * s / target)));
  };
  return Vec3i{out(dims.x, spacing.x), out(dims.y, spacing.y), out(dims.z, spacing.z)};
}

}  // namespace detail

// Resamples onto an isotropic grid with the requested spacing. Samples are
// taken at output-voxel centers; the source position for output index o is
// (o + 0.5) * (target / input_spacing) - 0.5, with clamp-to-edge boundaries.
// Unchanged spacing is the exact identity.
inline Volume3 resample(const Volume3& vol, double target_spacing, ResampleMode mode) {
  if (target_spacing <= 0.0) fail(Errc::config, "resample: target spacing must be > 0");
  const Vec3i od = detail::resampled_dims(vol.dims, vol.spacing, target_spacing);
  Volume3 out = make_volume(od, Vec3d{target_spacing, target_spacing, target_spacing});
  const double rx = target_spacing / vol.spacing.x;
  const double ry = target_spacing / vol.spacing.y;
  const double rz = target_spacing / vol.spacing.z;
  std::size_t i = 0;
  for (int z = 0; z < od.z; ++z) {
    const double pz = (z + 0.5) * rz - 0.5;
    for (int y = 0; y < od.y; ++y) {
      const double py = (y + 0.5) * ry - 0.5;
      for (int x = 0; x < od.x; ++x, ++i) {
        const double px = (x + 0.5) * rx - 0.5;
        if (mode == ResampleMode::Trilinear) {
          out.data[i] = static_cast<float>(sample_trilinear(
              vol.dims, vol.data.data(), px, py, pz, Boundary::ClampToEdge, 0.0));
        } else {
          out.data[i] = sample_nearest(vol.dims, vol.data.data(), px, py, pz,
                                       Boundary::ClampToEdge, 0.0f);
        }
      }
    }
  }
  return out;
}

inline LabelMap resample(const LabelMap& labels, double target_spacing, ResampleMode mode) {
  if (mode != ResampleMode::Nearest)
    fail(Errc::invalid_mode, "resample: label maps require Nearest mode");
  if (target_spacing <= 0.0) fail(Errc::config, "resample: target spacing must be > 0");
  const Vec3i od = detail::resampled_dims(labels.dims, labels.spacing, target_spacing);
  LabelMap out = make_labelmap(od, Vec3d{target_spacing, target_spacing, target_spacing});
  const double rx = target_spacing / labels.spacing.x;
  const double ry = target_spacing / labels.spacing.y;
  const double rz = target_spacing / labels.spacing.z;
  std::size_t i = 0;
  for (int z = 0; z < od.z; ++z)
    for (int y = 0; y < od.y; ++y)
      for (int x = 0; x < od.x; ++x, ++i)
        out.data[i] = sample_nearest(labels.dims, labels.data.data(), (x + 0.5) * rx - 0.5,
                                     (y + 0.5) * ry - 0.5, (z + 0.5) * rz - 0.5,
                                     Boundary::ClampToEdge, std::uint8_t(0));
  return out;
}

// Arithmetic mean of all foreground voxel coordinates.
inline Vec3d foreground_center(const LabelMap& labels) {
  double sx = 0, sy = 0, sz = 0;
  std::size_t n = 0, i = 0;
  for (int z = 0; z < labels.dims.z; ++z)
    for (int y = 0; y < labels.dims.y; ++y)
      for (int x = 0; x < labels.dims.x; ++x, ++i)
        if (labels.data[i] > 0) {
          sx += x; sy += y; sz += z;
          ++n;
        }
  if (n == 0) fail(Errc::empty_foreground, "foreground_center: label map has no foreground");
  return Vec3d{sx / n, sy / n, sz / n};
}

inline Vec3d grid_center(const Vec3i& dims) {
  return Vec3d{(dims.x - 1) / 2.0, (dims.y - 1) / 2.0, (dims.z - 1) / 2.0};
}

namespace detail {

template <typename VolT, typename ValT>
VolT crop_cube_impl(const VolT& in, Vec3d center, int size, ValT fill) {
  if (size < 1) fail(Errc::config, "crop_to_cube: size must be >= 1");
  const int cx = static_cast<int>(std::llround(center.x));
  const int cy = static_cast<int>(std::llround(center.y));
  const int cz = static_cast<int>(std::llround(center.z));
  const int half = size / 2;
  VolT out;
  out.dims = Vec3i{size, size, size};
  out.spacing = in.spacing;
  out.data.assign(voxel_count(out.dims), fill);
  std::size_t i = 0;
  for (int z = 0; z < size; ++z) {
    const int sz_ = z - half + cz;
    for (int y = 0; y < size; ++y) {
      const int sy = y - half + cy;
      for (int x = 0; x < size; ++x, ++i) {
        const int sx = x - half + cx;
        if (sx >= 0 && sx < in.dims.x && sy >= 0 && sy < in.dims.y && sz_ >= 0 &&
            sz_ < in.dims.z)
          out.data[i] = in.data[linear_index(in.dims, sx, sy, sz_)];
      }
    }
  }
  return out;
}

}  // namespace detail

// Extracts a size^3 cube; the input voxel at round(center) lands at the
// output cube's center (size/2, floor). Voxels outside the input are `fill`.
inline Volume3 crop_to_cube(const Volume3& vol, Vec3d center, int size, float fill) {
  return detail::crop_cube_impl(vol, center, size, fill);
}

inline LabelMap crop_to_cube(const LabelMap& labels, Vec3d center, int size,
                             std::uint8_t fill = 0) {
  return detail::crop_cube_impl(labels, center, size, fill);
}

// Linear-interpolation percentile over a sorted array, q in [0, 100].
inline double percentile_sorted(const std::vector<float>& sorted, double q) {
  if (sorted.empty()) fail(Errc::config, "percentile: empty data");
  if (sorted.size() == 1) return sorted[0];
  const double rank = q / 100.0 * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const double frac = rank - lo;
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (double(sorted[lo + 1]) - double(sorted[lo]));
}

// CT: divide by 2048 and clip to [-1, 1] (raw Hounsfield units in, no
// slope/intercept handling). MR: linearly map the 10th/90th percentile to
// [-1, 1]; not clipped, so values outside [-1, 1] are permitted.
inline Volume3 normalize(const Volume3& vol, Modality modality) {
  Volume3 out = vol;
  if (modality == Modality::CT) {
    for (float& v : out.data) {
      const float s = v / 2048.0f;
      v = s < -1.0f ? -1.0f : (s > 1.0f ? 1.0f : s);
    }
    return out;
  }
  std::vector<float> sorted = vol.data;
  std::sort(sorted.begin(), sorted.end());
  const double p10 = percentile_sorted(sorted, 10.0);
  const double p90 = percentile_sorted(sorted, 90.0);
  if (!(p90 > p10))
    fail(Errc::degenerate_intensity, "normalize: MR volume has degenerate intensity range");
  const double scale = 2.0 / (p90 - p10);
  for (float& v : out.data) v = static_cast<float>((v - p10) * scale - 1.0);
  return out;
}

// CT images carry the Hounsfield unit scale: air in the field of view sits
// near -1000 HU and the dynamic range spans well over 1000, while MR
// magnitudes are non-negative. Returns CT iff both signals are present.
inline Modality detect_modality(const Volume3& vol) {
  if (vol.data.empty()) return Modality::MR;
  const float mn = volume_min(vol);
  const float mx = volume_max(vol);
  if (mn <= -200.0f && (mx - mn) >= 1000.0f) return Modality::CT;
  return Modality::MR;
}

}  // namespace cardioseg
