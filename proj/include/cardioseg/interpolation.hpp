#pragma once

#include <cmath>
#include <cstdint>

#include "cardioseg/volume.hpp"

namespace cardioseg {

enum class Interp { Trilinear, Nearest };
enum class Boundary { ClampToEdge, Fill };

namespace detail {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Per-axis interpolation support: floor index, +1 neighbour (clamped) and
// the fractional weight of the neighbour.
struct AxisLerp {
  int i0, i1;
  double frac;
};

inline AxisLerp axis_lerp(double p, int n) {
  double f = std::floor(p);
  int i0 = static_cast<int>(f);
  double frac = p - f;
  if (i0 < 0) { i0 = 0; frac = 0.0; }
  if (i0 > n - 1) { i0 = n - 1; frac = 0.0; }
  int i1 = i0 + 1 <= n - 1 ? i0 + 1 : n - 1;
  if (i0 == n - 1) frac = 0.0;
  return {i0, i1, frac};
}

}  // namespace detail

// Trilinear sample of a scalar grid at continuous voxel coordinates.
// ClampToEdge clamps the position into [0, n-1] per axis; Fill returns
// `fill` whenever the position leaves that range on any axis.
template <typename T>
inline double sample_trilinear(const Vec3i& dims, const T* data, double px, double py,
                               double pz, Boundary boundary, double fill) {
  if (boundary == Boundary::Fill) {
    if (px < 0.0 || px > dims.x - 1 || py < 0.0 || py > dims.y - 1 || pz < 0.0 ||
        pz > dims.z - 1)
      return fill;
  } else {
    px = px < 0.0 ? 0.0 : (px > dims.x - 1 ? double(dims.x - 1) : px);
    py = py < 0.0 ? 0.0 : (py > dims.y - 1 ? double(dims.y - 1) : py);
    pz = pz < 0.0 ? 0.0 : (pz > dims.z - 1 ? double(dims.z - 1) : pz);
  }
  const auto ax = detail::axis_lerp(px, dims.x);
  const auto ay = detail::axis_lerp(py, dims.y);
  const auto az = detail::axis_lerp(pz, dims.z);

  auto at = [&](int x, int y, int z) {
    return static_cast<double>(data[linear_index(dims, x, y, z)]);
  };
  const double c00 = at(ax.i0, ay.i0, az.i0) * (1 - ax.frac) + at(ax.i1, ay.i0, az.i0) * ax.frac;
  const double c10 = at(ax.i0, ay.i1, az.i0) * (1 - ax.frac) + at(ax.i1, ay.i1, az.i0) * ax.frac;
  const double c01 = at(ax.i0, ay.i0, az.i1) * (1 - ax.frac) + at(ax.i1, ay.i0, az.i1) * ax.frac;
  const double c11 = at(ax.i0, ay.i1, az.i1) * (1 - ax.frac) + at(ax.i1, ay.i1, az.i1) * ax.frac;
  const double c0 = c00 * (1 - ay.frac) + c10 * ay.frac;
  const double c1 = c01 * (1 - ay.frac) + c11 * ay.frac;
  return c0 * (1 - az.frac) + c1 * az.frac;
}

// Nearest-neighbour sample. The nearest voxel is the rounded index; with
// Boundary::Fill a rounded index outside the grid yields `fill`.
template <typename T>
inline T sample_nearest(const Vec3i& dims, const T* data, double px, double py, double pz,
                        Boundary boundary, T fill) {
  int x = static_cast<int>(std::llround(px));
  int y = static_cast<int>(std::llround(py));
  int z = static_cast<int>(std::llround(pz));
  if (boundary == Boundary::Fill) {
    if (x < 0 || x >= dims.x || y < 0 || y >= dims.y || z < 0 || z >= dims.z) return fill;
  } else {
    x = detail::clampi(x, 0, dims.x - 1);
    y = detail::clampi(y, 0, dims.y - 1);
    z = detail::clampi(z, 0, dims.z - 1);
  }
  return data[linear_index(dims, x, y, z)];
}

}  // namespace cardioseg
