#pragma once

// Preprocessing chain: registration to the atlas grid, resampling, brain
// mask and z-score normalization.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "postop/error.hpp"
#include "postop/geometry.hpp"
#include "postop/morphology.hpp"
#include "postop/registration.hpp"
#include "postop/resample.hpp"
#include "postop/stats.hpp"
#include "postop/volume.hpp"

namespace postop {

enum class Sequence { T1, T1ce, T2, FLAIR };

inline constexpr std::array<Sequence, 4> kAllSequences{Sequence::T1, Sequence::T1ce, Sequence::T2,
                                                       Sequence::FLAIR};

constexpr std::string_view sequence_name(Sequence s) {
  switch (s) {
    case Sequence::T1: return "t1";
    case Sequence::T1ce: return "t1ce";
    case Sequence::T2: return "t2";
    case Sequence::FLAIR: return "flair";
  }
  return "?";
}

inline Sequence parse_sequence(std::string_view s) {
  for (Sequence q : kAllSequences)
    if (sequence_name(q) == s) return q;
  throw Error(ErrorCode::InvalidConfig, "unknown sequence '" + std::string(s) + "'");
}

using SequenceSet = std::map<Sequence, VoxelGrid>;

enum class MaskProvenance { External, Fallback };

struct BrainMask {
  Mask mask;
  MaskProvenance provenance = MaskProvenance::Fallback;
};

namespace detail {
inline void require_nonconstant(const VoxelGrid& g, const char* what) {
  if (g.data.empty()) throw Error(ErrorCode::ConstantImage, std::string(what) + " is empty");
  const auto [lo, hi] = std::minmax_element(g.data.begin(), g.data.end());
  if (!(*hi > *lo)) throw Error(ErrorCode::ConstantImage, std::string(what) + " is constant");
}
}  // namespace detail

/// Otsu threshold over a 256-bin histogram spanning [min, max]. Returns the
/// upper edge of the last background bin; foreground is value > threshold.
inline double otsu_threshold(const VoxelGrid& g) {
  detail::require_nonconstant(g, "image");
  const auto [lo_it, hi_it] = std::minmax_element(g.data.begin(), g.data.end());
  const double lo = *lo_it, hi = *hi_it;
  constexpr int kBins = 256;
  const double width = (hi - lo) / kBins;
  std::array<double, kBins> hist{};
  for (double v : g.data) {
    int b = static_cast<int>((v - lo) / width);
    hist[std::clamp(b, 0, kBins - 1)] += 1.0;
  }
  const double total = static_cast<double>(g.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += b * hist[b];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int b = 0; b < kBins - 1; ++b) {
    w0 += hist[b];
    sum0 += b * hist[b];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  return lo + width * (best_bin + 1);
}

/// Classical brain mask: Otsu threshold, largest 6-connected component,
/// closing with a radius-2 ball, cavity filling.
inline BrainMask skull_strip_fallback(const VoxelGrid& t1) {
  const double thr = otsu_threshold(t1);
  Mask fg(t1.geometry, 0);
  for (std::size_t i = 0; i < t1.size(); ++i) fg.data[i] = t1.data[i] > thr ? 1 : 0;
  if (count_nonzero(fg) == 0) throw Error(ErrorCode::EmptyMask, "threshold selected no voxels");
  Mask m = morph::largest_component(fg);
  m = morph::close_ball(m, 2.0);
  m = morph::fill_cavities(m);
  m = morph::largest_component(m);
  return {std::move(m), MaskProvenance::Fallback};
}

/// (v - mean) / sd inside the mask (population sd), 0 outside.
inline VoxelGrid zscore_normalize(const VoxelGrid& g, const Mask& mask) {
  require_same_geometry(g, mask, "zscore_normalize");
  std::vector<double> inside;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (mask.data[i]) inside.push_back(g.data[i]);
  if (inside.size() < 2) throw Error(ErrorCode::DegenerateMask, "fewer than 2 masked voxels");
  const double mu = stats::mean(inside);
  const double sd = stats::population_sd(inside);
  if (!(sd > 0.0)) throw Error(ErrorCode::DegenerateMask, "zero intensity variance under mask");
  VoxelGrid out(g.geometry, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (mask.data[i]) out.data[i] = (g.data[i] - mu) / sd;
  return out;
}

struct MaskedMoments {
  double mean = 0, sd = 0;
  std::size_t n = 0;
};

inline MaskedMoments masked_moments(const VoxelGrid& g, const Mask& mask) {
  require_same_geometry(g, mask, "masked_moments");
  std::vector<double> inside;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (mask.data[i]) inside.push_back(g.data[i]);
  if (inside.empty()) return {};
  return {stats::mean(inside), stats::population_sd(inside), inside.size()};
}

struct PipelineInput {
  SequenceSet sequences;
  /// Precomputed brain mask on the atlas grid; bypasses the fallback.
  std::optional<Mask> external_mask;
};

struct PipelineOutput {
  SequenceSet normalized;
  /// Resampled, not yet normalized.
  SequenceSet resampled;
  BrainMask mask;
  /// Sequence world -> atlas world.
  std::map<Sequence, AffineTransform> to_atlas;
  /// t1ce -> atlas, and each other sequence -> t1ce.
  std::map<Sequence, RegistrationResult> registrations;
  std::vector<std::string> warnings;
};

struct PipelineConfig {
  /// Used for t1ce -> atlas.
  RegistrationConfig registration;
  /// Sequences of one session share the head, so they are aligned to t1ce
  /// rigidly; the remaining settings come from `registration`.
  Dof intra_subject_dof = Dof::Rigid;
  /// Skip registration entirely (inputs already on a common, atlas-aligned frame).
  bool skip_registration = false;
};

/// 1. t1ce -> atlas; 2. other sequences -> t1ce, composed with step 1;
/// 3. one resampling per sequence onto the atlas grid; 4. brain mask
/// (external, else fallback on resampled t1, else t1ce); 5. z-score.
inline PipelineOutput run_pipeline(const PipelineInput& in, const AtlasGrid& atlas,
                                   const PipelineConfig& cfg = {}) {
  const auto ref = in.sequences.find(Sequence::T1ce);
  if (ref == in.sequences.end())
    throw Error(ErrorCode::MissingReferenceSequence, "t1ce is required as registration reference");
  PipelineOutput out;
  for (Sequence s : kAllSequences)
    if (!in.sequences.count(s))
      out.warnings.push_back("sequence " + std::string(sequence_name(s)) + " not provided");

  const VoxelGrid& t1ce = ref->second;
  if (cfg.skip_registration) {
    for (const auto& [s, g] : in.sequences) out.to_atlas[s] = AffineTransform::identity();
  } else {
    RegistrationResult r = register_affine(t1ce, atlas.reference(), cfg.registration);
    if (!r.improved) out.warnings.push_back("t1ce -> atlas registration did not improve the metric");
    out.to_atlas[Sequence::T1ce] = r.transform;
    out.registrations[Sequence::T1ce] = std::move(r);
    for (const auto& [s, g] : in.sequences) {
      if (s == Sequence::T1ce) continue;
      RegistrationConfig intra = cfg.registration;
      intra.dof = cfg.intra_subject_dof;
      RegistrationResult rs = register_affine(g, t1ce, intra);
      out.to_atlas[s] = compose(out.to_atlas[Sequence::T1ce], rs.transform);
      out.registrations[s] = std::move(rs);
    }
  }

  for (const auto& [s, g] : in.sequences)
    out.resampled[s] = resample_to_atlas(g, out.to_atlas[s], atlas, Interp::Trilinear);

  if (in.external_mask) {
    if (in.external_mask->geometry.dims != atlas.geometry().dims)
      throw Error(ErrorCode::GeometryMismatch, "external mask must be on the atlas grid");
    out.mask = {*in.external_mask, MaskProvenance::External};
    for (auto& v : out.mask.mask.data) v = v ? 1 : 0;
  } else {
    const auto t1 = out.resampled.find(Sequence::T1);
    out.mask = skull_strip_fallback(t1 != out.resampled.end() ? t1->second : out.resampled.at(Sequence::T1ce));
  }

  for (const auto& [s, g] : out.resampled) out.normalized[s] = zscore_normalize(g, out.mask.mask);
  return out;
}

}  // namespace postop
