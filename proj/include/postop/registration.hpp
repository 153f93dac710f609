#pragma once

// Intensity-based affine registration: coarse-to-fine pattern search over
// the 12-parameter affine parameterization, rigid stage first.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "postop/error.hpp"
#include "postop/geometry.hpp"
#include "postop/volume.hpp"

namespace postop {

enum class Similarity { NCC, MSE };
enum class Dof { Rigid, Affine, RigidThenAffine };

struct RegistrationConfig {
  /// Levels of the image pyramid; level l (finest = 0) is downsampled by 2^l,
  /// so the default 3 gives factors 4, 2, 1.
  int pyramid_levels = 3;
  Similarity metric = Similarity::NCC;
  /// Sweeps over the active parameters per level.
  int max_iterations = 200;
  /// Step at the finest level, in mm of displacement; multiplied by the level factor.
  double initial_step = 1.0;
  /// Step multiplier after a sweep with no accepted move.
  double step_decay = 0.5;
  /// A level ends once the step falls below this (times the level factor).
  double min_step = 0.01;
  /// A move is accepted only if it improves the metric by more than this.
  double tolerance = 1e-6;
  Dof dof = Dof::RigidThenAffine;
  /// Upper bound on fixed-image samples per level (regular lattice subsampling).
  std::size_t max_samples = 1u << 19;  // stride 3 on the atlas grid
  /// Gaussian presmoothing of both images (mm). Without it, trilinear sampling
  /// of a noisy moving image biases NCC toward off-grid poses.
  double smoothing_sigma_mm = 1.0;

  void validate() const {
    if (pyramid_levels < 1) throw Error(ErrorCode::InvalidConfig, "pyramid_levels must be >= 1");
    if (max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max_iterations must be >= 1");
    if (!(initial_step > 0)) throw Error(ErrorCode::InvalidConfig, "initial_step must be > 0");
    if (!(step_decay > 0 && step_decay < 1)) throw Error(ErrorCode::InvalidConfig, "step_decay must be in (0,1)");
    if (!(min_step > 0)) throw Error(ErrorCode::InvalidConfig, "min_step must be > 0");
    if (!(tolerance >= 0)) throw Error(ErrorCode::InvalidConfig, "tolerance must be >= 0");
    if (max_samples < 8) throw Error(ErrorCode::InvalidConfig, "max_samples must be >= 8");
    if (!(smoothing_sigma_mm >= 0)) throw Error(ErrorCode::InvalidConfig, "smoothing_sigma_mm must be >= 0");
  }
};

inline std::string similarity_name(Similarity s) { return s == Similarity::NCC ? "ncc" : "mse"; }
inline std::string dof_name(Dof d) {
  switch (d) {
    case Dof::Rigid: return "rigid";
    case Dof::Affine: return "affine";
    case Dof::RigidThenAffine: return "rigid+affine";
  }
  return "?";
}

struct TraceEntry {
  int stage = 0;  // 0 = first stage run
  int level = 0;  // pyramid level, 0 = finest
  double metric = 0;
};

struct RegistrationResult {
  /// Maps moving world -> fixed world.
  AffineTransform transform;
  /// NCC (higher is better) or MSE (lower is better) at full resolution.
  double metric = 0;
  /// False when no move improved the metric anywhere; transform is identity then.
  bool improved = false;
  /// Metric value after every accepted move, preceded by the starting value of each level.
  std::vector<TraceEntry> trace;
  std::size_t evaluations = 0;
};

namespace detail {

/// Block-average downsampling by an integer factor; the new voxel centers sit
/// at the centers of the averaged blocks.
// Separable Gaussian, truncated at 3 sigma, renormalised at the borders.
inline VoxelGrid gaussian_smooth(const VoxelGrid& in, double sigma_mm) {
  if (sigma_mm <= 0) return in;
  VoxelGrid cur = in;
  const auto& d = in.geometry.dims;
  for (int ax = 0; ax < 3; ++ax) {
    const double sig = sigma_mm / in.geometry.spacing[ax];
    const int r = static_cast<int>(std::ceil(3.0 * sig));
    if (r < 1 || d[ax] < 2) continue;
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    for (int o = -r; o <= r; ++o) k[static_cast<std::size_t>(o + r)] = std::exp(-0.5 * o * o / (sig * sig));
    const std::size_t stride = ax == 0 ? 1 : ax == 1 ? d[0] : d[0] * d[1];
    const long n = static_cast<long>(d[ax]);
    VoxelGrid out(in.geometry);
    std::vector<double> line(d[ax]);
    for (std::size_t base = 0; base < cur.data.size(); ++base) {
      // visit each line once, from its first voxel
      const std::size_t pos = (base / stride) % d[ax];
      if (pos != 0) continue;
      for (long t = 0; t < n; ++t) line[static_cast<std::size_t>(t)] = cur.data[base + static_cast<std::size_t>(t) * stride];
      for (long t = 0; t < n; ++t) {
        double acc = 0.0, w = 0.0;
        for (long o = std::max<long>(-r, -t); o <= std::min<long>(r, n - 1 - t); ++o) {
          const double kw = k[static_cast<std::size_t>(o + r)];
          acc += kw * line[static_cast<std::size_t>(t + o)];
          w += kw;
        }
        out.data[base + static_cast<std::size_t>(t) * stride] = acc / w;
      }
    }
    cur = std::move(out);
  }
  return cur;
}

inline VoxelGrid downsample(const VoxelGrid& in, std::size_t f) {
  if (f == 1) return in;
  const auto& d = in.geometry.dims;
  Geometry g = in.geometry;
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = std::max<std::size_t>(1, d[a] / f);
    g.spacing[a] *= static_cast<double>(f);
  }
  Eigen::Matrix4d s = Eigen::Matrix4d::Identity();
  for (int a = 0; a < 3; ++a) {
    const std::size_t fa = d[a] >= f ? f : 1;
    s(a, a) = static_cast<double>(fa);
    s(a, 3) = (static_cast<double>(fa) - 1.0) / 2.0;
    if (fa == 1) g.spacing[a] = in.geometry.spacing[a];
  }
  g.affine = in.geometry.affine * s;
  VoxelGrid out(g);
  std::array<std::size_t, 3> fa{};
  for (int a = 0; a < 3; ++a) fa[a] = d[a] >= f ? f : 1;
  for (std::size_t k = 0; k < g.dims[2]; ++k)
    for (std::size_t j = 0; j < g.dims[1]; ++j)
      for (std::size_t i = 0; i < g.dims[0]; ++i) {
        double s_ = 0.0;
        for (std::size_t c = 0; c < fa[2]; ++c)
          for (std::size_t b = 0; b < fa[1]; ++b)
            for (std::size_t a = 0; a < fa[0]; ++a) s_ += in(i * fa[0] + a, j * fa[1] + b, k * fa[2] + c);
        out(i, j, k) = s_ / static_cast<double>(fa[0] * fa[1] * fa[2]);
      }
  return out;
}

inline double variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size());
}

class LevelObjective {
 public:
  LevelObjective(const VoxelGrid& fixed, const VoxelGrid& moving, Similarity sim, std::size_t max_samples)
      : moving_(moving), sim_(sim) {
    const auto& d = fixed.geometry.dims;
    const double n = static_cast<double>(fixed.size());
    const auto stride = static_cast<std::size_t>(
        std::max(1.0, std::ceil(std::cbrt(n / static_cast<double>(max_samples)))));
    for (std::size_t k = stride / 2; k < d[2]; k += stride)
      for (std::size_t j = stride / 2; j < d[1]; j += stride)
        for (std::size_t i = stride / 2; i < d[0]; i += stride) {
          points_.push_back(fixed.geometry.voxel_to_world(double(i), double(j), double(k)));
          values_.push_back(fixed(i, j, k));
        }
    double m = 0.0;
    for (double v : values_) m += v;
    m /= static_cast<double>(values_.size());
    centered_.resize(values_.size());
    double ss = 0.0;
    for (std::size_t s = 0; s < values_.size(); ++s) {
      centered_[s] = values_[s] - m;
      ss += centered_[s] * centered_[s];
    }
    fixed_norm_ = std::sqrt(ss);
    moving_inv_ = AffineTransform(moving.geometry.affine).inverse().matrix();
  }

  /// Cost to minimise for the fixed-world -> moving-world map `g`.
  double cost(const Eigen::Matrix4d& g) const {
    const Eigen::Matrix4d m = moving_inv_ * g;
    const Eigen::Matrix3d lin = m.topLeftCorner<3, 3>();
    const Eigen::Vector3d off = m.block<3, 1>(0, 3);
    if (sim_ == Similarity::MSE) {
      double ss = 0.0;
      for (std::size_t s = 0; s < points_.size(); ++s) {
        const double mv = trilinear_sample(moving_, Eigen::Vector3d(lin * points_[s] + off));
        const double e = mv - values_[s];
        ss += e * e;
      }
      return ss / static_cast<double>(points_.size());
    }
    double sm = 0.0, smm = 0.0, sfm = 0.0;
    for (std::size_t s = 0; s < points_.size(); ++s) {
      const double mv = trilinear_sample(moving_, Eigen::Vector3d(lin * points_[s] + off));
      sm += mv;
      smm += mv * mv;
      sfm += centered_[s] * mv;
    }
    const double var_m = smm - sm * sm / static_cast<double>(points_.size());
    if (!(var_m > 0.0) || !(fixed_norm_ > 0.0)) return 0.0;
    return -sfm / (fixed_norm_ * std::sqrt(var_m));
  }

 private:
  const VoxelGrid& moving_;
  Similarity sim_;
  std::vector<Eigen::Vector3d> points_;
  std::vector<double> values_, centered_;
  double fixed_norm_ = 0.0;
  Eigen::Matrix4d moving_inv_;
};

inline double metric_from_cost(Similarity s, double c) { return s == Similarity::NCC ? -c : c; }

}  // namespace detail

/// Similarity of `moving` resampled through `transform` (moving -> fixed)
/// against `fixed`, over up to `max_samples` fixed voxels on a regular lattice.
inline double similarity(const VoxelGrid& fixed, const VoxelGrid& moving, const AffineTransform& transform,
                         Similarity sim, std::size_t max_samples = 1u << 20) {
  detail::LevelObjective obj(fixed, moving, sim, max_samples);
  return detail::metric_from_cost(sim, obj.cost(transform.inverse().matrix()));
}

/// Register `moving` onto `fixed`. The optimised map is fixed -> moving,
/// parameterised about the fixed lattice center; the result is its inverse.
inline RegistrationResult register_affine(const VoxelGrid& moving, const VoxelGrid& fixed,
                                          const RegistrationConfig& cfg = {}) {
  cfg.validate();
  if (!(detail::variance(moving.data) > 0.0)) throw Error(ErrorCode::ConstantImage, "moving image is constant");
  if (!(detail::variance(fixed.data) > 0.0)) throw Error(ErrorCode::ConstantImage, "fixed image is constant");

  const auto& fd = fixed.geometry.dims;
  const Eigen::Vector3d center =
      fixed.geometry.voxel_to_world((double(fd[0]) - 1) / 2, (double(fd[1]) - 1) / 2, (double(fd[2]) - 1) / 2);
  const AffineTransform to_center = AffineTransform::translation(center.x(), center.y(), center.z());
  const AffineTransform from_center = to_center.inverse();

  // One parameter unit moves a point at `radius` by about one mm.
  double radius = 0.0;
  for (int a = 0; a < 3; ++a) radius += double(fd[a]) * fixed.geometry.spacing[a] / 2.0;
  radius = std::max(radius / 3.0 / 2.0, 1.0);
  std::array<double, AffineParams::kCount> scale{};
  for (std::size_t i = 0; i < AffineParams::kCount; ++i) scale[i] = i < 3 ? 1.0 : 1.0 / radius;

  const auto map_of = [&](const AffineParams& p) {
    return compose(to_center, compose(AffineTransform::from_params(p), from_center)).matrix();
  };

  std::vector<std::size_t> stage_sizes;
  switch (cfg.dof) {
    case Dof::Rigid: stage_sizes = {6}; break;
    case Dof::Affine: stage_sizes = {12}; break;
    case Dof::RigidThenAffine: stage_sizes = {6, 12}; break;
  }

  std::vector<VoxelGrid> fixed_pyr, moving_pyr;
  {
    const VoxelGrid fs = detail::gaussian_smooth(fixed, cfg.smoothing_sigma_mm);
    const VoxelGrid ms = detail::gaussian_smooth(moving, cfg.smoothing_sigma_mm);
    for (int l = 0; l < cfg.pyramid_levels; ++l) {
      const std::size_t f = std::size_t{1} << l;
      fixed_pyr.push_back(detail::downsample(fs, f));
      moving_pyr.push_back(detail::downsample(ms, f));
    }
  }

  RegistrationResult res;
  AffineParams theta;
  for (std::size_t stage = 0; stage < stage_sizes.size(); ++stage) {
    const std::size_t active = stage_sizes[stage];
    for (int l = cfg.pyramid_levels - 1; l >= 0; --l) {
      const double factor = static_cast<double>(std::size_t{1} << l);
      const detail::LevelObjective obj(fixed_pyr[l], moving_pyr[l], cfg.metric, cfg.max_samples);
      double best = obj.cost(map_of(theta));
      ++res.evaluations;
      res.trace.push_back({int(stage), l, detail::metric_from_cost(cfg.metric, best)});
      double step = cfg.initial_step * factor;
      const double floor_step = cfg.min_step * factor;
      for (int it = 0; it < cfg.max_iterations && step >= floor_step; ++it) {
        bool moved = false;
        for (std::size_t i = 0; i < active; ++i) {
          for (const double dir : {1.0, -1.0}) {
            AffineParams trial = theta;
            trial[i] += dir * step * scale[i];
            const double c = obj.cost(map_of(trial));
            ++res.evaluations;
            if (c < best - cfg.tolerance) {
              best = c;
              theta = trial;
              moved = true;
              res.trace.push_back({int(stage), l, detail::metric_from_cost(cfg.metric, best)});
              break;
            }
          }
        }
        if (!moved) step *= cfg.step_decay;
      }
    }
  }

  // Accepted moves are recorded after each level's starting value.
  const std::size_t starts = stage_sizes.size() * static_cast<std::size_t>(cfg.pyramid_levels);
  if (res.trace.size() == starts) {
    res.transform = AffineTransform::identity();
    res.improved = false;
  } else {
    res.transform = AffineTransform(map_of(theta)).inverse();
    res.improved = true;
  }
  res.metric = similarity(fixed, moving, res.transform, cfg.metric);
  return res;
}

}  // namespace postop
