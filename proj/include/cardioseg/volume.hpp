#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cardioseg/errors.hpp"

namespace cardioseg {

// Class count is fixed for the whole pipeline: background 0 plus seven
// cardiac structures 1..7.
inline constexpr int kNumClasses = 8;
inline constexpr std::uint8_t kMaxLabel = 7;

struct Vec3i {
  int x = 0, y = 0, z = 0;
  friend bool operator==(const Vec3i&, const Vec3i&) = default;
};

struct Vec3d {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const Vec3d&, const Vec3d&) = default;
};

inline std::size_t voxel_count(const Vec3i& dims) {
  return static_cast<std::size_t>(dims.x) * static_cast<std::size_t>(dims.y) *
         static_cast<std::size_t>(dims.z);
}

// Row-major with x fastest-varying: i = x + nx*(y + ny*z).
inline std::size_t linear_index(const Vec3i& dims, int x, int y, int z) {
  return static_cast<std::size_t>(x) +
         static_cast<std::size_t>(dims.x) *
             (static_cast<std::size_t>(y) +
              static_cast<std::size_t>(dims.y) * static_cast<std::size_t>(z));
}

inline Vec3i coords_of(const Vec3i& dims, std::size_t i) {
  const std::size_t nx = static_cast<std::size_t>(dims.x);
  const std::size_t ny = static_cast<std::size_t>(dims.y);
  return Vec3i{static_cast<int>(i % nx), static_cast<int>((i / nx) % ny),
               static_cast<int>(i / (nx * ny))};
}

// Dense 3D scalar grid, 32-bit floats, with physical voxel spacing in mm.
struct Volume3 {
  Vec3i dims;
  Vec3d spacing{1.0, 1.0, 1.0};
  std::vector<float> data;

  float& at(int x, int y, int z) { return data[linear_index(dims, x, y, z)]; }
  float at(int x, int y, int z) const { return data[linear_index(dims, x, y, z)]; }
};

// Dense 3D grid of class IDs (0 = background, 1..7 = cardiac structures).
struct LabelMap {
  Vec3i dims;
  Vec3d spacing{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> data;

  std::uint8_t& at(int x, int y, int z) { return data[linear_index(dims, x, y, z)]; }
  std::uint8_t at(int x, int y, int z) const { return data[linear_index(dims, x, y, z)]; }
};

inline Volume3 make_volume(Vec3i dims, Vec3d spacing, float fill = 0.0f) {
  return Volume3{dims, spacing, std::vector<float>(voxel_count(dims), fill)};
}

inline LabelMap make_labelmap(Vec3i dims, Vec3d spacing, std::uint8_t fill = 0) {
  return LabelMap{dims, spacing, std::vector<std::uint8_t>(voxel_count(dims), fill)};
}

inline void check_same_dims(const Vec3i& a, const Vec3i& b, const char* what) {
  if (!(a == b)) fail(Errc::shape, std::string(what) + ": grid dimensions differ");
}

inline float volume_min(const Volume3& v) {
  return v.data.empty() ? 0.0f : *std::min_element(v.data.begin(), v.data.end());
}

inline float volume_max(const Volume3& v) {
  return v.data.empty() ? 0.0f : *std::max_element(v.data.begin(), v.data.end());
}

}  // namespace cardioseg
