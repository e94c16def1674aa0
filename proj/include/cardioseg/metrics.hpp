#pragma once

// Challenge metrics in physical units: Dice Similarity Coefficient (percent),
// Hausdorff Distance (mm) and Average Symmetric Surface Distance (mm).
// Surfaces are foreground voxels with at least one 6-connected background or
// out-of-bounds neighbour; distances are exact voxel-center distances.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "cardioseg/detail/textio.hpp"
#include "cardioseg/errors.hpp"
#include "cardioseg/volume.hpp"

namespace cardioseg {

namespace detail {

inline std::vector<Vec3i> surface_voxels(const Vec3i& dims, const LabelMap& labels,
                                         std::uint8_t cls) {
  static constexpr int off[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                    {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  std::vector<Vec3i> out;
  std::size_t i = 0;
  for (int z = 0; z < dims.z; ++z)
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x, ++i) {
        if (labels.data[i] != cls) continue;
        for (const auto& o : off) {
          const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
          if (nx < 0 || nx >= dims.x || ny < 0 || ny >= dims.y || nz < 0 || nz >= dims.z ||
              labels.data[linear_index(dims, nx, ny, nz)] != cls) {
            out.push_back(Vec3i{x, y, z});
            break;
          }
        }
      }
  return out;
}

struct SurfaceStats {
  double max_ab = 0, sum_ab = 0;  // directed a -> b
  double max_ba = 0, sum_ba = 0;  // directed b -> a
  std::size_t na = 0, nb = 0;
};

inline SurfaceStats surface_distance_stats(const std::vector<Vec3i>& a,
                                           const std::vector<Vec3i>& b, const Vec3d& sp) {
  auto nearest_sq = [&sp](const Vec3i& p, const std::vector<Vec3i>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3i& q : set) {
      const double dx = (p.x - q.x) * sp.x;
      const double dy = (p.y - q.y) * sp.y;
      const double dz = (p.z - q.z) * sp.z;
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best) best = d;
    }
    return best;
  };
  SurfaceStats s;
  s.na = a.size();
  s.nb = b.size();
  for (const Vec3i& p : a) {
    const double d = std::sqrt(nearest_sq(p, b));
    s.sum_ab += d;
    if (d > s.max_ab) s.max_ab = d;
  }
  for (const Vec3i& q : b) {
    const double d = std::sqrt(nearest_sq(q, a));
    s.sum_ba += d;
    if (d > s.max_ba) s.max_ba = d;
  }
  return s;
}

inline std::size_t class_count(const LabelMap& m, std::uint8_t cls) {
  std::size_t n = 0;
  for (std::uint8_t v : m.data) n += v == cls;
  return n;
}

}  // namespace detail

// 100 * 2|P and G| / (|P| + |G|); both masks empty scores 100, exactly one
// empty scores 0.
inline double dsc_percent(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls) {
  check_same_dims(pred.dims, gt.dims, "dsc");
  std::size_t np = 0, ng = 0, ni = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] == cls;
    const bool g = gt.data[i] == cls;
    np += p;
    ng += g;
    ni += p && g;
  }
  if (np + ng == 0) return 100.0;
  return 100.0 * 2.0 * double(ni) / double(np + ng);
}

// Max over both directions of the maximum surface-to-surface distance.
// Empty masks make the metric undefined (nullopt), not an error.
inline std::optional<double> hausdorff_mm(const LabelMap& pred, const LabelMap& gt,
                                          std::uint8_t cls, const Vec3d& spacing) {
  check_same_dims(pred.dims, gt.dims, "hausdorff");
  const auto sp = detail::surface_voxels(pred.dims, pred, cls);
  const auto sg = detail::surface_voxels(gt.dims, gt, cls);
  if (sp.empty() || sg.empty()) return std::nullopt;
  const auto s = detail::surface_distance_stats(sp, sg, spacing);
  return std::max(s.max_ab, s.max_ba);
}

inline std::optional<double> assd_mm(const LabelMap& pred, const LabelMap& gt,
                                     std::uint8_t cls, const Vec3d& spacing) {
  check_same_dims(pred.dims, gt.dims, "assd");
  const auto sp = detail::surface_voxels(pred.dims, pred, cls);
  const auto sg = detail::surface_voxels(gt.dims, gt, cls);
  if (sp.empty() || sg.empty()) return std::nullopt;
  const auto s = detail::surface_distance_stats(sp, sg, spacing);
  return (s.sum_ab + s.sum_ba) / double(s.na + s.nb);
}

struct ClassMetrics {
  double dsc = 0.0;
  double hd = 0.0;
  double assd = 0.0;
  bool distances_valid = false;  // false when either mask is empty
};

struct MetricsReport {
  std::array<ClassMetrics, 7> per_class;  // classes 1..7
  double mean_dsc = 0.0;
  double mean_hd = 0.0;
  double mean_assd = 0.0;
  bool mean_distances_valid = false;
};

inline MetricsReport evaluate(const LabelMap& pred, const LabelMap& gt, const Vec3d& spacing) {
  check_same_dims(pred.dims, gt.dims, "evaluate");
  MetricsReport r;
  double dsc_sum = 0, hd_sum = 0, assd_sum = 0;
  int dist_valid = 0;
  for (std::uint8_t cls = 1; cls <= kMaxLabel; ++cls) {
    ClassMetrics& m = r.per_class[cls - 1];
    m.dsc = dsc_percent(pred, gt, cls);
    dsc_sum += m.dsc;
    const auto sp = detail::surface_voxels(pred.dims, pred, cls);
    const auto sg = detail::surface_voxels(gt.dims, gt, cls);
    if (!sp.empty() && !sg.empty()) {
      const auto s = detail::surface_distance_stats(sp, sg, spacing);
      m.hd = std::max(s.max_ab, s.max_ba);
      m.assd = (s.sum_ab + s.sum_ba) / double(s.na + s.nb);
      m.distances_valid = true;
      hd_sum += m.hd;
      assd_sum += m.assd;
      ++dist_valid;
    }
  }
  r.mean_dsc = dsc_sum / 7.0;
  if (dist_valid > 0) {
    r.mean_hd = hd_sum / dist_valid;
    r.mean_assd = assd_sum / dist_valid;
    r.mean_distances_valid = true;
  }
  return r;
}

// CSV with one row per class plus a mean row; undefined distances print nan.
inline void write_report_csv(std::ostream& os, const MetricsReport& r) {
  os << "class,dsc,hd,assd\n";
  auto value = [](double v, bool valid) {
    return valid ? detail::format_double(v) : std::string("nan");
  };
  for (int cls = 1; cls <= 7; ++cls) {
    const ClassMetrics& m = r.per_class[cls - 1];
    os << cls << "," << detail::format_double(m.dsc) << "," << value(m.hd, m.distances_valid)
       << "," << value(m.assd, m.distances_valid) << "\n";
  }
  os << "mean," << detail::format_double(r.mean_dsc) << ","
     << value(r.mean_hd, r.mean_distances_valid) << ","
     << value(r.mean_assd, r.mean_distances_valid) << "\n";
}

}  // namespace cardioseg
