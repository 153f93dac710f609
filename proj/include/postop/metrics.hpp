#pragma once

// Per-case segmentation metrics. Undefined values (e.g. Dice of two empty
// masks under the default policy) are std::nullopt.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "postop/error.hpp"
#include "postop/morphology.hpp"
#include "postop/volume.hpp"

namespace postop {

/// Single labels and the BraTS composites.
enum class Region { ET, ED, CAV, WT, TC };

inline constexpr std::array<Region, 5> kAllRegions{Region::ET, Region::ED, Region::CAV, Region::WT,
                                                   Region::TC};
inline constexpr std::array<Region, 3> kTissueRegions{Region::ET, Region::ED, Region::CAV};
inline constexpr std::array<Region, 3> kBratsRegions{Region::ET, Region::WT, Region::TC};

constexpr std::string_view region_name(Region r) {
  switch (r) {
    case Region::ET: return "ET";
    case Region::ED: return "ED";
    case Region::CAV: return "CAV";
    case Region::WT: return "WT";
    case Region::TC: return "TC";
  }
  return "?";
}

inline Region parse_region(std::string_view s) {
  for (Region r : kAllRegions)
    if (region_name(r) == s) return r;
  throw Error(ErrorCode::InvalidConfig, "unknown region '" + std::string(s) + "'");
}

/// Whether canonical label `l` belongs to region `r`.
constexpr bool region_contains(Region r, std::uint8_t l) {
  switch (r) {
    case Region::ET: return l == 1;
    case Region::ED: return l == 2;
    case Region::CAV: return l == 3;
    case Region::WT: return l >= 1 && l <= 3;
    case Region::TC: return l == 1 || l == 3;
  }
  return false;
}

/// What Dice/Jaccard/VSI return when both masks are empty.
enum class EmptyPolicy { Undefined, One };

inline Mask extract_mask(const LabelVolume& lv, Region r) {
  Mask m(lv.geometry, 0);
  for (std::size_t i = 0; i < lv.size(); ++i) m.data[i] = region_contains(r, lv.data[i]) ? 1 : 0;
  return m;
}

/// Voxel confusion counts of `pred` against `gt`.
struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t gt_size() const { return tp + fn; }
  std::size_t pred_size() const { return tp + fp; }
};

inline Confusion confusion(const Mask& gt, const Mask& pred) {
  require_same_geometry(gt, pred, "confusion");
  Confusion c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool g = gt.data[i] != 0, p = pred.data[i] != 0;
    if (g && p) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace detail {
inline std::optional<double> empty_value(EmptyPolicy p) {
  return p == EmptyPolicy::One ? std::optional<double>(1.0) : std::nullopt;
}
}  // namespace detail

inline std::optional<double> dice(const Confusion& c, EmptyPolicy p = EmptyPolicy::Undefined) {
  const std::size_t denom = c.gt_size() + c.pred_size();
  if (denom == 0) return detail::empty_value(p);
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline std::optional<double> jaccard(const Confusion& c, EmptyPolicy p = EmptyPolicy::Undefined) {
  const std::size_t uni = c.tp + c.fp + c.fn;
  if (uni == 0) return detail::empty_value(p);
  return static_cast<double>(c.tp) / static_cast<double>(uni);
}

/// 1 - ||A| - |B|| / (|A| + |B|)
inline std::optional<double> volumetric_similarity(const Confusion& c,
                                                   EmptyPolicy p = EmptyPolicy::Undefined) {
  const std::size_t a = c.gt_size(), b = c.pred_size();
  if (a + b == 0) return detail::empty_value(p);
  const std::size_t diff = a > b ? a - b : b - a;
  return 1.0 - static_cast<double>(diff) / static_cast<double>(a + b);
}

/// Undefined when the ground truth is empty.
inline std::optional<double> sensitivity(const Confusion& c) {
  if (c.gt_size() == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

/// Undefined only when every voxel is ground-truth foreground.
inline std::optional<double> specificity(const Confusion& c) {
  if (c.tn + c.fp == 0) return std::nullopt;
  return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

inline std::optional<double> dice(const Mask& gt, const Mask& pred, EmptyPolicy p = EmptyPolicy::Undefined) {
  return dice(confusion(gt, pred), p);
}
inline std::optional<double> jaccard(const Mask& gt, const Mask& pred, EmptyPolicy p = EmptyPolicy::Undefined) {
  return jaccard(confusion(gt, pred), p);
}
inline std::optional<double> volumetric_similarity(const Mask& gt, const Mask& pred,
                                                   EmptyPolicy p = EmptyPolicy::Undefined) {
  return volumetric_similarity(confusion(gt, pred), p);
}

struct SensSpec {
  std::optional<double> sensitivity, specificity;
};

inline SensSpec sensitivity_specificity(const Mask& gt, const Mask& pred) {
  const Confusion c = confusion(gt, pred);
  return {sensitivity(c), specificity(c)};
}

inline double volume_cm3(std::size_t voxels, const Vec3& spacing) {
  return static_cast<double>(voxels) * (spacing[0] * spacing[1] * spacing[2]) / 1000.0;
}

inline double volume_cm3(const Mask& m) { return volume_cm3(count_nonzero(m), m.geometry.spacing); }

/// Linear-interpolation percentile (q in [0, 1]) of an ascending list.
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "percentile of empty list");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

/// Foreground voxels with a background (or out-of-volume) face neighbour.
inline Mask surface(const Mask& m) {
  const auto& d = m.geometry.dims;
  Mask s(m.geometry, 0);
  const std::size_t nx = d[0], nxy = d[0] * d[1];
  for (std::size_t k = 0; k < d[2]; ++k)
    for (std::size_t j = 0; j < d[1]; ++j)
      for (std::size_t i = 0; i < d[0]; ++i) {
        const std::size_t v = i + nx * j + nxy * k;
        if (!m.data[v]) continue;
        const bool border = i == 0 || j == 0 || k == 0 || i + 1 == d[0] || j + 1 == d[1] || k + 1 == d[2];
        const bool open = border || !m.data[v - 1] || !m.data[v + 1] || !m.data[v - nx] ||
                          !m.data[v + nx] || !m.data[v - nxy] || !m.data[v + nxy];
        s.data[v] = open ? 1 : 0;
      }
  return s;
}

namespace detail {

struct Box {
  Index3 lo{}, hi{};  // inclusive
  bool empty = true;
  void add(const Index3& c) {
    for (int a = 0; a < 3; ++a) {
      if (empty || c[a] < lo[a]) lo[a] = c[a];
      if (empty || c[a] > hi[a]) hi[a] = c[a];
    }
    empty = false;
  }
};

// Distances (mm) from each surface voxel of `from` to the nearest surface
// voxel of `to`, restricted to `box` which must contain both surfaces.
inline std::vector<double> surface_distances(const Mask& from_surf, const Mask& to_surf, const Box& box) {
  Index3 sub{};
  for (int a = 0; a < 3; ++a) sub[a] = box.hi[a] - box.lo[a] + 1;
  const auto to_local = [&](std::size_t li) {
    const std::size_t x = li % sub[0], y = (li / sub[0]) % sub[1], z = li / (sub[0] * sub[1]);
    return to_surf.index(x + box.lo[0], y + box.lo[1], z + box.lo[2]);
  };
  const auto d2 = morph::squared_distance_map(sub, to_surf.geometry.spacing,
                                              [&](std::size_t li) { return to_surf.data[to_local(li)] != 0; });
  std::vector<double> out;
  for (std::size_t li = 0; li < d2.size(); ++li)
    if (from_surf.data[to_local(li)]) out.push_back(std::sqrt(d2[li]));
  return out;
}

}  // namespace detail

/// 95th-percentile symmetric surface distance in mm; undefined if either mask is empty.
inline std::optional<double> hausdorff95(const Mask& gt, const Mask& pred, double q = 0.95) {
  require_same_geometry(gt, pred, "hausdorff95");
  const Mask sa = surface(gt), sb = surface(pred);
  detail::Box box;
  bool any_a = false, any_b = false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (sa.data[i] || sb.data[i]) box.add(sa.coords(i));
    any_a = any_a || sa.data[i];
    any_b = any_b || sb.data[i];
  }
  if (!any_a || !any_b) return std::nullopt;
  auto dab = detail::surface_distances(sa, sb, box);
  auto dba = detail::surface_distances(sb, sa, box);
  std::sort(dab.begin(), dab.end());
  std::sort(dba.begin(), dba.end());
  return std::max(percentile_sorted(dab, q), percentile_sorted(dba, q));
}

struct MetricRecord {
  Region region = Region::ET;
  std::optional<double> dice, jaccard, vsi, sensitivity, specificity, hausdorff95;
  double gt_volume_cm3 = 0.0, pred_volume_cm3 = 0.0;
};

struct EvaluateOptions {
  EmptyPolicy empty_policy = EmptyPolicy::Undefined;
  bool with_hausdorff = true;
};

inline MetricRecord evaluate_region(const LabelVolume& gt, const LabelVolume& pred, Region r,
                                    const EvaluateOptions& opt = {}) {
  require_same_geometry(gt, pred, "evaluate_case");
  const Mask g = extract_mask(gt, r), p = extract_mask(pred, r);
  const Confusion c = confusion(g, p);
  MetricRecord rec;
  rec.region = r;
  rec.dice = dice(c, opt.empty_policy);
  rec.jaccard = jaccard(c, opt.empty_policy);
  rec.vsi = volumetric_similarity(c, opt.empty_policy);
  rec.sensitivity = sensitivity(c);
  rec.specificity = specificity(c);
  if (opt.with_hausdorff) rec.hausdorff95 = hausdorff95(g, p);
  rec.gt_volume_cm3 = volume_cm3(c.gt_size(), gt.geometry.spacing);
  rec.pred_volume_cm3 = volume_cm3(c.pred_size(), gt.geometry.spacing);
  return rec;
}

template <typename Regions = decltype(kAllRegions)>
std::vector<MetricRecord> evaluate_case(const LabelVolume& gt, const LabelVolume& pred,
                                        const Regions& regions = kAllRegions,
                                        const EvaluateOptions& opt = {}) {
  require_same_geometry(gt, pred, "evaluate_case");
  std::vector<MetricRecord> out;
  for (Region r : regions) out.push_back(evaluate_region(gt, pred, r, opt));
  return out;
}

}  // namespace postop
