#pragma once

#include <cmath>

#include "postop/error.hpp"
#include "postop/geometry.hpp"
#include "postop/volume.hpp"

namespace postop {

enum class Interp { Trilinear, Nearest };

/// The fixed reference space every case is brought into: 240x240x155 voxels
/// at 1 mm isotropic, with the reference volume's voxel->world affine.
class AtlasGrid {
 public:
  static constexpr Index3 kDims{240, 240, 155};
  static constexpr Vec3 kSpacing{1.0, 1.0, 1.0};

  explicit AtlasGrid(VoxelGrid reference) : reference_(std::move(reference)) {
    const auto& g = reference_.geometry;
    if (g.dims != kDims)
      throw Error(ErrorCode::GeometryMismatch, "atlas must be 240x240x155, got " + describe(g.dims));
    for (int a = 0; a < 3; ++a)
      if (std::abs(g.spacing[a] - 1.0) > 1e-6)
        throw Error(ErrorCode::GeometryMismatch, "atlas spacing must be 1 mm isotropic");
    g.validate();
  }

  const Geometry& geometry() const { return reference_.geometry; }
  const VoxelGrid& reference() const { return reference_; }

 private:
  VoxelGrid reference_;
};

namespace detail {
// target voxel index -> source voxel index, for source world = t^-1(target world)
inline Eigen::Matrix4d target_to_source_voxel(const Geometry& src, const AffineTransform& t,
                                              const Geometry& target) {
  if (!t.invertible()) throw Error(ErrorCode::SingularTransform, "resampling transform is singular");
  const Eigen::Matrix4d src_inv = AffineTransform(src.affine).inverse().matrix();
  return src_inv * t.inverse().matrix() * target.affine;
}
}  // namespace detail

/// Resample `in` onto `target`. `t` maps input world -> target world; each
/// output voxel takes the input value at the inverse-mapped position.
inline VoxelGrid resample(const VoxelGrid& in, const AffineTransform& t, const Geometry& target,
                          Interp interp = Interp::Trilinear, double outside = 0.0) {
  const Eigen::Matrix4d m = detail::target_to_source_voxel(in.geometry, t, target);
  VoxelGrid out(target);
  const auto& d = target.dims;
  std::size_t idx = 0;
  for (std::size_t k = 0; k < d[2]; ++k)
    for (std::size_t j = 0; j < d[1]; ++j) {
      const Eigen::Vector3d row = m.topLeftCorner<3, 3>() * Eigen::Vector3d(0.0, double(j), double(k)) +
                                  m.block<3, 1>(0, 3);
      const Eigen::Vector3d dx = m.block<3, 1>(0, 0);
      for (std::size_t i = 0; i < d[0]; ++i, ++idx) {
        const Eigen::Vector3d p = row + dx * static_cast<double>(i);
        out.data[idx] = interp == Interp::Nearest ? nearest_sample(in, p, outside)
                                                  : trilinear_sample(in, p, outside);
      }
    }
  return out;
}

/// Label-safe variant: nearest neighbour only, never invents labels.
template <typename T>
Volume<T> resample_nearest(const Volume<T>& in, const AffineTransform& t, const Geometry& target) {
  const Eigen::Matrix4d m = detail::target_to_source_voxel(in.geometry, t, target);
  Volume<T> out(target);
  const auto& d = target.dims;
  std::size_t idx = 0;
  for (std::size_t k = 0; k < d[2]; ++k)
    for (std::size_t j = 0; j < d[1]; ++j) {
      const Eigen::Vector3d row = m.topLeftCorner<3, 3>() * Eigen::Vector3d(0.0, double(j), double(k)) +
                                  m.block<3, 1>(0, 3);
      const Eigen::Vector3d dx = m.block<3, 1>(0, 0);
      for (std::size_t i = 0; i < d[0]; ++i, ++idx)
        out.data[idx] = nearest_sample(in, Eigen::Vector3d(row + dx * static_cast<double>(i)));
    }
  return out;
}

inline VoxelGrid resample_to_atlas(const VoxelGrid& in, const AffineTransform& t, const AtlasGrid& atlas,
                                   Interp interp = Interp::Trilinear) {
  return resample(in, t, atlas.geometry(), interp);
}

inline LabelVolume resample_labels_to_atlas(const LabelVolume& in, const AffineTransform& t,
                                            const AtlasGrid& atlas) {
  return resample_nearest(in, t, atlas.geometry());
}

}  // namespace postop
