#pragma once

// Deterministic synthetic postoperative brain phantoms with exact ground
// truth, the synthetic atlas stand-in, and a rule-based baseline segmenter.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "postop/error.hpp"
#include "postop/geometry.hpp"
#include "postop/metrics.hpp"
#include "postop/morphology.hpp"
#include "postop/preprocess.hpp"
#include "postop/random.hpp"
#include "postop/resample.hpp"
#include "postop/volume.hpp"

namespace postop::phantom {

/// Per-sequence values in kAllSequences order (t1, t1ce, t2, flair).
using PerSequence = std::array<double, 4>;

inline std::size_t seq_index(Sequence s) { return static_cast<std::size_t>(s); }

enum class Shape { Sphere, Ellipsoid };

struct Lesion {
  Shape shape = Shape::Sphere;
  Vec3 center_mm{0, 0, 0};
  /// Sphere uses radii[0].
  Vec3 radii_mm{5, 5, 5};
  std::uint8_t label = 1;
  PerSequence intensity{};
};

/// Default tissue contrasts: enhancing tumor bright on t1ce and dark on t1,
/// edema bright on flair/t2, cavity dark on t1/t1ce/flair.
inline PerSequence default_intensity(std::uint8_t label) {
  switch (label) {
    case 1: return {2.0, 12.0, 8.0, 9.0};
    case 2: return {5.0, 5.0, 10.0, 12.0};
    case 3: return {1.0, 1.0, 12.0, 2.0};
    default: return {6.0, 6.0, 5.0, 5.0};
  }
}

struct PhantomSpec {
  std::uint64_t seed = 1;
  std::string case_id = "phantom";
  Index3 dims = AtlasGrid::kDims;
  Vec3 spacing = AtlasGrid::kSpacing;
  Vec3 brain_semi_axes_mm{70, 85, 60};
  PerSequence brain_intensity{6.0, 6.0, 5.0, 5.0};
  /// Skull shell outside the brain; thickness 0 disables it.
  double skull_gap_mm = 4.0;
  double skull_thickness_mm = 4.0;
  PerSequence skull_intensity{4.0, 4.0, 2.0, 2.0};
  /// Painted in order; later lesions win where they overlap.
  std::vector<Lesion> lesions;
  PerSequence noise_sigma{0, 0, 0, 0};
  /// Reference world -> sequence world.
  std::array<AffineTransform, 4> misalignment{};
  /// Fraction of enhancing-tumor volume removed; radii scale by cbrt(1 - f).
  double resection_fraction = 0.0;

  Geometry geometry() const { return Geometry::axis_aligned(dims, spacing); }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (dims[a] < 1 || !(spacing[a] > 0)) throw Error(ErrorCode::InvalidSpec, "bad grid");
      if (!(brain_semi_axes_mm[a] > 0)) throw Error(ErrorCode::InvalidSpec, "brain semi-axes must be > 0");
    }
    if (!(resection_fraction >= 0 && resection_fraction <= 1))
      throw Error(ErrorCode::InvalidSpec, "resection_fraction must be in [0, 1]");
    if (skull_gap_mm < 0 || skull_thickness_mm < 0) throw Error(ErrorCode::InvalidSpec, "negative skull size");
    for (double s : noise_sigma)
      if (s < 0) throw Error(ErrorCode::InvalidSpec, "noise sigma must be >= 0");
    for (const auto& m : misalignment)
      if (!m.invertible()) throw Error(ErrorCode::InvalidSpec, "misalignment must be invertible");
    // Every lesion must sit inside the brain: probe its surface along a
    // Fibonacci sphere of directions.
    constexpr int kProbes = 256;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (const auto& l : lesions) {
      if (l.label < 1 || l.label > kMaxLabel) throw Error(ErrorCode::InvalidSpec, "lesion label must be 1..3");
      const Vec3 r = l.shape == Shape::Sphere ? Vec3{l.radii_mm[0], l.radii_mm[0], l.radii_mm[0]} : l.radii_mm;
      for (double x : r)
        if (!(x >= 0)) throw Error(ErrorCode::InvalidSpec, "lesion radii must be >= 0");
      for (int p = 0; p < kProbes; ++p) {
        const double y = 1.0 - 2.0 * (p + 0.5) / kProbes;
        const double rad = std::sqrt(1.0 - y * y);
        const double th = golden * p;
        const Vec3 dir{rad * std::cos(th), y, rad * std::sin(th)};
        double q = 0;
        for (int a = 0; a < 3; ++a) {
          const double c = (l.center_mm[a] + r[a] * dir[a]) / brain_semi_axes_mm[a];
          q += c * c;
        }
        if (q > 1.0) throw Error(ErrorCode::InvalidSpec, "lesion extends outside the brain ellipsoid");
      }
    }
  }
};

/// Brain voxels (0/1) and ground-truth labels in the reference frame.
struct PhantomCase {
  std::string case_id;
  SequenceSet sequences;
  LabelVolume gt;
  Mask brain;
  PhantomSpec spec;
};

namespace detail {

enum : std::uint8_t { kBackground = 0, kSkull = 254, kBrain = 255 };

inline Vec3 effective_radii(const Lesion& l, double resection) {
  Vec3 r = l.shape == Shape::Sphere ? Vec3{l.radii_mm[0], l.radii_mm[0], l.radii_mm[0]} : l.radii_mm;
  if (l.label == 1) {
    const double s = std::cbrt(std::max(0.0, 1.0 - resection));
    for (double& x : r) x *= s;
  }
  return r;
}

inline bool inside_ellipsoid(const Eigen::Vector3d& q, const Vec3& c, const Vec3& r) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (r[a] <= 0) return false;
    const double d = (q[a] - c[a]) / r[a];
    s += d * d;
  }
  return s <= 1.0;
}

// Tissue at reference point q: lesion index + 1 (1-based) or one of the codes above.
struct Tissue {
  std::uint8_t kind = kBackground;
  int lesion = -1;
};

class Scene {
 public:
  explicit Scene(const PhantomSpec& s) : spec_(s) {
    for (const auto& l : s.lesions) radii_.push_back(effective_radii(l, s.resection_fraction));
    for (int a = 0; a < 3; ++a) {
      inner_[a] = s.brain_semi_axes_mm[a] + s.skull_gap_mm;
      outer_[a] = inner_[a] + s.skull_thickness_mm;
    }
  }

  Tissue at(const Eigen::Vector3d& q) const {
    Tissue t;
    const Vec3 origin{0, 0, 0};
    if (inside_ellipsoid(q, origin, spec_.brain_semi_axes_mm)) {
      t.kind = kBrain;
      for (std::size_t i = spec_.lesions.size(); i-- > 0;) {
        if (inside_ellipsoid(q, spec_.lesions[i].center_mm, radii_[i])) {
          t.kind = spec_.lesions[i].label;
          t.lesion = static_cast<int>(i);
          break;
        }
      }
    } else if (spec_.skull_thickness_mm > 0 && inside_ellipsoid(q, origin, outer_) &&
               !inside_ellipsoid(q, origin, inner_)) {
      t.kind = kSkull;
    }
    return t;
  }

  double intensity(const Tissue& t, std::size_t seq) const {
    if (t.lesion >= 0) return spec_.lesions[static_cast<std::size_t>(t.lesion)].intensity[seq];
    if (t.kind == kBrain) return spec_.brain_intensity[seq];
    if (t.kind == kSkull) return spec_.skull_intensity[seq];
    return 0.0;
  }

 private:
  const PhantomSpec& spec_;
  std::vector<Vec3> radii_;
  Vec3 inner_{}, outer_{};
};

}  // namespace detail

/// Renders every sequence (through its misalignment, plus seeded Gaussian
/// noise) and the exact reference-frame ground truth. A voxel belongs to a
/// shape iff its center lies inside it.
inline PhantomCase generate_case(const PhantomSpec& spec) {
  spec.validate();
  const Geometry geo = spec.geometry();
  const detail::Scene scene(spec);
  PhantomCase pc;
  pc.case_id = spec.case_id;
  pc.spec = spec;
  pc.gt = LabelVolume(geo, 0);
  pc.brain = Mask(geo, 0);
  const auto& d = geo.dims;
  std::size_t idx = 0;
  for (std::size_t k = 0; k < d[2]; ++k)
    for (std::size_t j = 0; j < d[1]; ++j)
      for (std::size_t i = 0; i < d[0]; ++i, ++idx) {
        const auto t = scene.at(geo.voxel_to_world(double(i), double(j), double(k)));
        if (t.kind != detail::kBackground && t.kind != detail::kSkull) pc.brain.data[idx] = 1;
        if (t.lesion >= 0) pc.gt.data[idx] = t.kind;
      }

  const CounterRng case_rng(spec.seed);
  for (Sequence s : kAllSequences) {
    const std::size_t si = seq_index(s);
    const CounterRng rng = case_rng.fork(si);
    const Eigen::Matrix4d to_ref = spec.misalignment[si].inverse().matrix() * geo.affine;
    VoxelGrid g(geo, 0.0);
    const double sigma = spec.noise_sigma[si];
    idx = 0;
    for (std::size_t k = 0; k < d[2]; ++k)
      for (std::size_t j = 0; j < d[1]; ++j)
        for (std::size_t i = 0; i < d[0]; ++i, ++idx) {
          const Eigen::Vector3d q = (to_ref * Eigen::Vector4d(double(i), double(j), double(k), 1.0)).head<3>();
          double v = scene.intensity(scene.at(q), si);
          if (sigma > 0) v += sigma * rng.normal(idx);
          g.data[idx] = v;
        }
    pc.sequences[s] = std::move(g);
  }
  return pc;
}

/// Lesion-free, noiseless, aligned t1 phantom on the 240x240x155 atlas grid.
inline VoxelGrid synthetic_atlas_volume(const PhantomSpec& base = {}) {
  PhantomSpec s = base;
  s.dims = AtlasGrid::kDims;
  s.spacing = AtlasGrid::kSpacing;
  s.lesions.clear();
  s.noise_sigma = {0, 0, 0, 0};
  s.misalignment = {};
  s.validate();
  const Geometry geo = s.geometry();
  const detail::Scene scene(s);
  VoxelGrid g(geo, 0.0);
  const auto& d = geo.dims;
  std::size_t idx = 0;
  for (std::size_t k = 0; k < d[2]; ++k)
    for (std::size_t j = 0; j < d[1]; ++j)
      for (std::size_t i = 0; i < d[0]; ++i, ++idx)
        g.data[idx] = scene.intensity(scene.at(geo.voxel_to_world(double(i), double(j), double(k))),
                                      seq_index(Sequence::T1));
  return g;
}

inline AtlasGrid synthetic_atlas(const PhantomSpec& base = {}) { return AtlasGrid(synthetic_atlas_volume(base)); }

// ---- cohorts ----

struct CohortVariation {
  double max_translation_mm = 4.0;
  double max_rotation_deg = 4.0;
  /// Fraction of cases whose ground truth is GTR (no residual enhancing tumor).
  double gtr_ratio = 0.5;
  /// Residual cases draw resection fraction uniformly from [0, this].
  double max_rt_resection = 0.5;
  double lesion_jitter_mm = 5.0;
  double radius_jitter = 0.15;
  /// Fraction of cases labelled as late postoperative scans; the rest are early.
  double lps_fraction = 0.0;
  std::vector<std::string> centers{"PhantomCenterA", "PhantomCenterB"};
};

struct CohortCaseInfo {
  std::string case_id, center, timepoint;
  bool gt_gtr = false;
  std::uint64_t seed = 0;
  PhantomSpec spec;
};

/// Typical postoperative scene: edema envelope, resection cavity, and an
/// enhancing nodule on the cavity wall.
inline PhantomSpec default_case_spec() {
  PhantomSpec s;
  s.noise_sigma = {0.5, 0.5, 0.5, 0.5};
  Lesion ed{Shape::Ellipsoid, {22, 12, 6}, {22, 20, 18}, 2, default_intensity(2)};
  Lesion cav{Shape::Sphere, {22, 12, 6}, {11, 11, 11}, 3, default_intensity(3)};
  Lesion et{Shape::Sphere, {33, 14, 8}, {8, 8, 8}, 1, default_intensity(1)};
  s.lesions = {ed, cav, et};
  return s;
}

/// Draws `n` case specs. Case i uses seed (seed XOR i); exactly
/// round(n * gtr_ratio) cases are fully resected.
inline std::vector<CohortCaseInfo> plan_cohort(std::size_t n, const PhantomSpec& base, const CohortVariation& var,
                                               std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidSpec, "cohort size must be >= 1");
  if (!(var.gtr_ratio >= 0 && var.gtr_ratio <= 1)) throw Error(ErrorCode::InvalidSpec, "gtr_ratio must be in [0,1]");
  if (var.centers.empty()) throw Error(ErrorCode::InvalidSpec, "at least one center name is required");
  const auto n_gtr = static_cast<std::size_t>(std::llround(static_cast<double>(n) * var.gtr_ratio));
  const auto n_lps = static_cast<std::size_t>(std::llround(static_cast<double>(n) * var.lps_fraction));
  // Fisher-Yates on a cohort-level stream decides which cases are GTR.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngStream perm(CounterRng(seed).fork(0xC0407));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[perm.below(i + 1)]);
  std::vector<bool> gtr(n, false);
  for (std::size_t i = 0; i < n_gtr; ++i) gtr[order[i]] = true;

  std::vector<CohortCaseInfo> out;
  for (std::size_t i = 0; i < n; ++i) {
    CohortCaseInfo info;
    info.seed = seed ^ static_cast<std::uint64_t>(i);
    char id[32];
    std::snprintf(id, sizeof id, "case%03zu", i);
    info.case_id = id;
    info.center = var.centers[i % var.centers.size()];
    info.timepoint = i >= n - n_lps ? "LPS" : "EPS";
    info.gt_gtr = gtr[i];
    RngStream r(CounterRng(info.seed).fork(0x5bec));
    PhantomSpec s = base;
    s.seed = info.seed;
    s.case_id = info.case_id;
    const Vec3 shift{r.uniform(-1, 1) * var.lesion_jitter_mm, r.uniform(-1, 1) * var.lesion_jitter_mm,
                     r.uniform(-1, 1) * var.lesion_jitter_mm};
    const double grow = 1.0 + r.uniform(-1, 1) * var.radius_jitter;
    for (auto& l : s.lesions) {
      for (int a = 0; a < 3; ++a) {
        l.center_mm[a] += shift[a];
        l.radii_mm[a] *= grow;
      }
    }
    s.resection_fraction = gtr[i] ? 1.0 : r.uniform(0.0, var.max_rt_resection);
    for (std::size_t q = 0; q < 4; ++q) {
      AffineParams p;
      for (std::size_t a = 0; a < 3; ++a) p[a] = r.uniform(-1, 1) * var.max_translation_mm;
      for (std::size_t a = 3; a < 6; ++a) p[a] = deg2rad(r.uniform(-1, 1) * var.max_rotation_deg);
      s.misalignment[q] = AffineTransform::from_params(p);
    }
    s.validate();
    info.spec = std::move(s);
    out.push_back(std::move(info));
  }
  return out;
}

// ---- baseline segmenter ----

struct BaselineConfig {
  /// Thresholds on z-scores.
  double et_t1ce_min = 2.5;
  double et_t1_max = -2.0;
  double ed_flair_min = 2.0;
  double cav_t1_max = -3.0;
  std::size_t min_et_voxels = 5;
  /// Inputs whose masked mean deviates from 0 by more than this are rejected.
  double normalization_tolerance = 0.1;
};

/// Threshold rules on z-scored t1/t1ce/flair inside the brain mask:
/// ET = t1ce bright and t1 dark (islands < min_et_voxels removed);
/// CAV = t1 dark, not ET, largest component; ED = flair bright, not ET/CAV.
inline LabelVolume baseline_segment(const SequenceSet& z, const Mask& brain, const BaselineConfig& cfg = {}) {
  for (Sequence s : {Sequence::T1, Sequence::T1ce, Sequence::FLAIR})
    if (!z.count(s))
      throw Error(ErrorCode::MissingReferenceSequence,
                  "baseline segmenter needs " + std::string(sequence_name(s)));
  const VoxelGrid& t1 = z.at(Sequence::T1);
  const VoxelGrid& t1ce = z.at(Sequence::T1ce);
  const VoxelGrid& flair = z.at(Sequence::FLAIR);
  for (const VoxelGrid* g : {&t1, &t1ce, &flair}) {
    require_same_geometry(*g, brain, "baseline_segment");
    const auto mm = masked_moments(*g, brain);
    if (mm.n == 0 || std::abs(mm.mean) > cfg.normalization_tolerance)
      throw Error(ErrorCode::NotNormalized, "masked mean " + std::to_string(mm.mean));
  }
  const std::size_t n = brain.size();
  Mask et(brain.geometry, 0);
  for (std::size_t i = 0; i < n; ++i)
    et.data[i] = brain.data[i] && t1ce.data[i] > cfg.et_t1ce_min && t1.data[i] < cfg.et_t1_max;
  et = morph::remove_small_components(et, cfg.min_et_voxels);
  Mask cav(brain.geometry, 0);
  for (std::size_t i = 0; i < n; ++i) cav.data[i] = brain.data[i] && !et.data[i] && t1.data[i] < cfg.cav_t1_max;
  cav = morph::largest_component(cav);
  LabelVolume out(brain.geometry, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (et.data[i]) out.data[i] = 1;
    else if (cav.data[i]) out.data[i] = 3;
    else if (brain.data[i] && flair.data[i] > cfg.ed_flair_min) out.data[i] = 2;
  }
  return out;
}

// ---- JSON spec files ----

inline nlohmann::json to_json(const PhantomSpec& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["case_id"] = s.case_id;
  j["dims"] = s.dims;
  j["spacing"] = s.spacing;
  j["brain_semi_axes_mm"] = s.brain_semi_axes_mm;
  j["brain_intensity"] = s.brain_intensity;
  j["skull_gap_mm"] = s.skull_gap_mm;
  j["skull_thickness_mm"] = s.skull_thickness_mm;
  j["skull_intensity"] = s.skull_intensity;
  j["noise_sigma"] = s.noise_sigma;
  j["resection_fraction"] = s.resection_fraction;
  j["lesions"] = nlohmann::json::array();
  for (const auto& l : s.lesions)
    j["lesions"].push_back({{"shape", l.shape == Shape::Sphere ? "sphere" : "ellipsoid"},
                            {"center_mm", l.center_mm},
                            {"radii_mm", l.radii_mm},
                            {"label", l.label},
                            {"intensity", l.intensity}});
  j["misalignment"] = nlohmann::json::array();
  for (const auto& m : s.misalignment) {
    std::vector<double> rows;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) rows.push_back(m.matrix()(r, c));
    j["misalignment"].push_back(rows);
  }
  return j;
}

inline PhantomSpec spec_from_json(const nlohmann::json& j, PhantomSpec s = default_case_spec()) {
  try {
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("case_id")) s.case_id = j["case_id"].get<std::string>();
    if (j.contains("dims")) s.dims = j["dims"].get<Index3>();
    if (j.contains("spacing")) s.spacing = j["spacing"].get<Vec3>();
    if (j.contains("brain_semi_axes_mm")) s.brain_semi_axes_mm = j["brain_semi_axes_mm"].get<Vec3>();
    if (j.contains("brain_intensity")) s.brain_intensity = j["brain_intensity"].get<PerSequence>();
    if (j.contains("skull_gap_mm")) s.skull_gap_mm = j["skull_gap_mm"].get<double>();
    if (j.contains("skull_thickness_mm")) s.skull_thickness_mm = j["skull_thickness_mm"].get<double>();
    if (j.contains("skull_intensity")) s.skull_intensity = j["skull_intensity"].get<PerSequence>();
    if (j.contains("noise_sigma")) {
      if (j["noise_sigma"].is_number()) s.noise_sigma.fill(j["noise_sigma"].get<double>());
      else s.noise_sigma = j["noise_sigma"].get<PerSequence>();
    }
    if (j.contains("resection_fraction")) s.resection_fraction = j["resection_fraction"].get<double>();
    if (j.contains("lesions")) {
      s.lesions.clear();
      for (const auto& l : j["lesions"]) {
        Lesion x;
        const std::string shape = l.value("shape", "sphere");
        if (shape != "sphere" && shape != "ellipsoid") throw Error(ErrorCode::InvalidSpec, "unknown shape " + shape);
        x.shape = shape == "sphere" ? Shape::Sphere : Shape::Ellipsoid;
        x.center_mm = l.at("center_mm").get<Vec3>();
        if (l.at("radii_mm").is_number()) x.radii_mm.fill(l.at("radii_mm").get<double>());
        else x.radii_mm = l.at("radii_mm").get<Vec3>();
        x.label = l.at("label").get<std::uint8_t>();
        x.intensity = l.contains("intensity") ? l["intensity"].get<PerSequence>() : default_intensity(x.label);
        s.lesions.push_back(x);
      }
    }
    if (j.contains("misalignment")) {
      const auto& m = j["misalignment"];
      if (m.size() != 4) throw Error(ErrorCode::InvalidSpec, "misalignment needs one entry per sequence");
      for (std::size_t q = 0; q < 4; ++q) {
        const auto rows = m[q].get<std::vector<double>>();
        if (rows.size() != 12) throw Error(ErrorCode::InvalidSpec, "misalignment entries are 3x4 row-major");
        Eigen::Matrix4d mat = Eigen::Matrix4d::Identity();
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 4; ++c) mat(r, c) = rows[static_cast<std::size_t>(4 * r + c)];
        s.misalignment[q] = AffineTransform(mat);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  s.validate();
  return s;
}

struct CohortSpec {
  std::size_t n = 20;
  std::uint64_t seed = stats::kDefaultSeed;
  PhantomSpec base = default_case_spec();
  CohortVariation variation;
};

inline CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
  CohortSpec c;
  try {
    c.n = j.value("n", c.n);
    c.seed = j.value("seed", c.seed);
    if (j.contains("base")) c.base = spec_from_json(j["base"]);
    if (j.contains("variation")) {
      const auto& v = j["variation"];
      auto& o = c.variation;
      o.max_translation_mm = v.value("max_translation_mm", o.max_translation_mm);
      o.max_rotation_deg = v.value("max_rotation_deg", o.max_rotation_deg);
      o.gtr_ratio = v.value("gtr_ratio", o.gtr_ratio);
      o.max_rt_resection = v.value("max_rt_resection", o.max_rt_resection);
      o.lesion_jitter_mm = v.value("lesion_jitter_mm", o.lesion_jitter_mm);
      o.radius_jitter = v.value("radius_jitter", o.radius_jitter);
      o.lps_fraction = v.value("lps_fraction", o.lps_fraction);
      if (v.contains("centers")) o.centers = v["centers"].get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  return c;
}

}  // namespace postop::phantom
