#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "postop/error.hpp"

namespace postop {

using Index3 = std::array<std::size_t, 3>;
using Vec3 = std::array<double, 3>;

/// Sampling lattice of a volume: voxel counts, voxel size in mm and the
/// voxel-index -> world-mm transform.
struct Geometry {
  Index3 dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();

  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

  /// Axis-aligned lattice whose geometric center sits at `center_world`.
  static Geometry axis_aligned(Index3 dims, Vec3 spacing, Vec3 center_world = {0, 0, 0}) {
    Geometry g;
    g.dims = dims;
    g.spacing = spacing;
    g.affine.setIdentity();
    for (int a = 0; a < 3; ++a) {
      g.affine(a, a) = spacing[a];
      const double mid = (static_cast<double>(dims[a]) - 1.0) / 2.0;
      g.affine(a, 3) = center_world[a] - spacing[a] * mid;
    }
    return g;
  }

  Eigen::Vector3d voxel_to_world(double i, double j, double k) const {
    return (affine * Eigen::Vector4d(i, j, k, 1.0)).head<3>();
  }

  bool same_lattice(const Geometry& o, double tol = 1e-6) const {
    if (dims != o.dims) return false;
    for (int a = 0; a < 3; ++a)
      if (std::abs(spacing[a] - o.spacing[a]) > tol) return false;
    return (affine - o.affine).cwiseAbs().maxCoeff() <= tol;
  }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (dims[a] < 1) throw Error(ErrorCode::HeaderInconsistent, "dimension < 1");
      if (!(spacing[a] > 0.0)) throw Error(ErrorCode::HeaderInconsistent, "spacing must be > 0");
    }
    if (affine.topLeftCorner<3, 3>().determinant() == 0.0)
      throw Error(ErrorCode::HeaderInconsistent, "affine is singular");
  }
};

inline std::string describe(const Index3& d) {
  std::ostringstream os;
  os << d[0] << "x" << d[1] << "x" << d[2];
  return os.str();
}

/// Dense 3D array with x fastest, then y, then z.
template <typename T>
struct Volume {
  using value_type = T;

  Geometry geometry;
  std::vector<T> data;

  Volume() = default;
  explicit Volume(const Geometry& g, T fill = T{}) : geometry(g), data(g.voxel_count(), fill) {}

  const Index3& dims() const { return geometry.dims; }
  std::size_t size() const { return data.size(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + geometry.dims[0] * (j + geometry.dims[1] * k);
  }
  Index3 coords(std::size_t idx) const {
    const auto nx = geometry.dims[0], ny = geometry.dims[1];
    return {idx % nx, (idx / nx) % ny, idx / (nx * ny)};
  }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) { return data[index(i, j, k)]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data[index(i, j, k)];
  }

  bool operator==(const Volume& o) const {
    return geometry.dims == o.geometry.dims && geometry.spacing == o.geometry.spacing &&
           geometry.affine == o.geometry.affine && data == o.data;
  }
};

/// Image intensities (MR units or z-scores).
using VoxelGrid = Volume<double>;
/// Canonical tissue labels, see `Label`.
using LabelVolume = Volume<std::uint8_t>;
/// Binary {0,1} voxel set.
using Mask = Volume<std::uint8_t>;

enum class Label : std::uint8_t { Background = 0, ET = 1, ED = 2, CAV = 3 };
inline constexpr std::uint8_t kMaxLabel = 3;

template <typename A, typename B>
void require_same_geometry(const Volume<A>& a, const Volume<B>& b, const char* what) {
  if (a.geometry.dims != b.geometry.dims || a.data.size() != b.data.size())
    throw Error(ErrorCode::GeometryMismatch,
                std::string(what) + ": " + describe(a.geometry.dims) + " vs " +
                    describe(b.geometry.dims));
}

template <typename T>
std::size_t count_nonzero(const Volume<T>& v) {
  std::size_t n = 0;
  for (const auto& x : v.data) n += (x != T{}) ? 1 : 0;
  return n;
}

}  // namespace postop
