#pragma once

// Connected-component cleanup of predicted label maps: keep the largest
// component per label, then the largest component of the foreground union.

#include <cstdint>
#include <vector>

#include "cardioseg/errors.hpp"
#include "cardioseg/volume.hpp"

namespace cardioseg {

struct Components {
  std::vector<std::int32_t> ids;  // 0 = background, components numbered 1..n
  std::vector<std::size_t> sizes;  // sizes[i] = size of component i+1
};

// Component IDs are assigned in scan order of their first voxel, which makes
// size ties resolve deterministically (smallest ID wins).
inline Components connected_components(const Vec3i& dims, const std::vector<std::uint8_t>& mask,
                                       int connectivity = 26) {
  if (connectivity != 6 && connectivity != 26)
    fail(Errc::config, "connected_components: connectivity must be 6 or 26");
  if (mask.size() != voxel_count(dims))
    fail(Errc::shape, "connected_components: mask length does not match dims");

  std::vector<Vec3i> offsets;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        if (connectivity == 6 && std::abs(dx) + std::abs(dy) + std::abs(dz) != 1) continue;
        offsets.push_back(Vec3i{dx, dy, dz});
      }

  Components out;
  out.ids.assign(mask.size(), 0);
  std::vector<std::size_t> stack;
  std::size_t seed = 0;
  for (int z = 0; z < dims.z; ++z)
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x, ++seed) {
        if (!mask[seed] || out.ids[seed] != 0) continue;
        const std::int32_t id = static_cast<std::int32_t>(out.sizes.size()) + 1;
        std::size_t size = 0;
        stack.clear();
        stack.push_back(seed);
        out.ids[seed] = id;
        while (!stack.empty()) {
          const std::size_t cur = stack.back();
          stack.pop_back();
          ++size;
          const Vec3i c = coords_of(dims, cur);
          for (const Vec3i& o : offsets) {
            const int nx = c.x + o.x, ny = c.y + o.y, nz = c.z + o.z;
            if (nx < 0 || nx >= dims.x || ny < 0 || ny >= dims.y || nz < 0 || nz >= dims.z)
              continue;
            const std::size_t ni = linear_index(dims, nx, ny, nz);
            if (mask[ni] && out.ids[ni] == 0) {
              out.ids[ni] = id;
              stack.push_back(ni);
            }
          }
        }
        out.sizes.push_back(size);
      }
  return out;
}

namespace detail {

// Zeroes every voxel of `labels` whose component in `mask` is not the largest.
inline void keep_largest(LabelMap& labels, const std::vector<std::uint8_t>& mask,
                         int connectivity) {
  const Components cc = connected_components(labels.dims, mask, connectivity);
  if (cc.sizes.size() <= 1) return;
  std::int32_t best = 1;
  for (std::size_t i = 1; i < cc.sizes.size(); ++i)
    if (cc.sizes[i] > cc.sizes[best - 1]) best = static_cast<std::int32_t>(i) + 1;
  for (std::size_t i = 0; i < labels.data.size(); ++i)
    if (cc.ids[i] != 0 && cc.ids[i] != best) labels.data[i] = 0;
}

}  // namespace detail

// Stage 1: per foreground label, keep only its largest component. Stage 2:
// binarize the remaining foreground and keep its largest component. Voxels
// only ever turn into background, never change label.
inline LabelMap largest_cc_filter(const LabelMap& labels, int connectivity = 26) {
  LabelMap out = labels;
  std::vector<std::uint8_t> mask(out.data.size());
  for (std::uint8_t label = 1; label <= kMaxLabel; ++label) {
    bool any = false;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      mask[i] = out.data[i] == label ? 1 : 0;
      any = any || mask[i];
    }
    if (any) detail::keep_largest(out, mask, connectivity);
  }
  bool any = false;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    mask[i] = out.data[i] > 0 ? 1 : 0;
    any = any || mask[i];
  }
  if (any) detail::keep_largest(out, mask, connectivity);
  return out;
}

}  // namespace cardioseg
