#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "postop/error.hpp"
#include "postop/volume.hpp"

namespace postop {

/// Optimizer-facing parameterization of an affine transform.
///
///   M = Translate(t) * Rz(rz) * Ry(ry) * Rx(rx) * Shear(xy, xz, yz) * Scale(exp(log_scale))
///
/// with Shear the unit upper-triangular matrix [[1, xy, xz], [0, 1, yz], [0, 0, 1]].
/// Covers every affine map with positive determinant.
struct AffineParams {
  static constexpr std::size_t kCount = 12;
  std::array<double, kCount> v{};

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  // Slot layout.
  static constexpr std::size_t kTx = 0, kTy = 1, kTz = 2;
  static constexpr std::size_t kRx = 3, kRy = 4, kRz = 5;
  static constexpr std::size_t kLogSx = 6, kLogSy = 7, kLogSz = 8;
  static constexpr std::size_t kShXY = 9, kShXZ = 10, kShYZ = 11;

  static AffineParams rigid(double tx, double ty, double tz, double rx, double ry, double rz) {
    AffineParams p;
    p.v = {tx, ty, tz, rx, ry, rz, 0, 0, 0, 0, 0, 0};
    return p;
  }
};

class AffineTransform {
 public:
  AffineTransform() : m_(Eigen::Matrix4d::Identity()) {}
  explicit AffineTransform(const Eigen::Matrix4d& m) : m_(m) {
    m_.row(3) << 0, 0, 0, 1;
  }

  static AffineTransform identity() { return {}; }

  static AffineTransform translation(double x, double y, double z) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 1>(0, 3) << x, y, z;
    return AffineTransform(m);
  }

  static Eigen::Matrix3d rotation_zyx(double rx, double ry, double rz) {
    return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
  }

  static AffineTransform from_params(const AffineParams& p) {
    using P = AffineParams;
    Eigen::Matrix3d shear = Eigen::Matrix3d::Identity();
    shear(0, 1) = p[P::kShXY];
    shear(0, 2) = p[P::kShXZ];
    shear(1, 2) = p[P::kShYZ];
    const Eigen::Vector3d scale(std::exp(p[P::kLogSx]), std::exp(p[P::kLogSy]),
                                std::exp(p[P::kLogSz]));
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() =
        rotation_zyx(p[P::kRx], p[P::kRy], p[P::kRz]) * shear * scale.asDiagonal();
    m.block<3, 1>(0, 3) << p[P::kTx], p[P::kTy], p[P::kTz];
    return AffineTransform(m);
  }

  /// Inverse of `from_params`: a QR split of the linear part into a proper
  /// rotation and an upper-triangular factor with positive diagonal.
  AffineParams to_params() const {
    using P = AffineParams;
    const Eigen::Matrix3d a = linear();
    if (!(a.determinant() > 0.0))
      throw Error(ErrorCode::SingularTransform, "parameterization needs a positive determinant");
    Eigen::HouseholderQR<Eigen::Matrix3d> qr(a);
    Eigen::Matrix3d q = qr.householderQ();
    Eigen::Matrix3d r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < 3; ++i) {
      if (r(i, i) < 0) {
        r.row(i) *= -1.0;
        q.col(i) *= -1.0;
      }
    }
    AffineParams p;
    p[P::kTx] = m_(0, 3);
    p[P::kTy] = m_(1, 3);
    p[P::kTz] = m_(2, 3);
    // q = Rz * Ry * Rx
    p[P::kRy] = -std::asin(std::clamp(q(2, 0), -1.0, 1.0));
    p[P::kRx] = std::atan2(q(2, 1), q(2, 2));
    p[P::kRz] = std::atan2(q(1, 0), q(0, 0));
    p[P::kLogSx] = std::log(r(0, 0));
    p[P::kLogSy] = std::log(r(1, 1));
    p[P::kLogSz] = std::log(r(2, 2));
    p[P::kShXY] = r(0, 1) / r(1, 1);
    p[P::kShXZ] = r(0, 2) / r(2, 2);
    p[P::kShYZ] = r(1, 2) / r(2, 2);
    return p;
  }

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d linear() const { return m_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d offset() const { return m_.block<3, 1>(0, 3); }

  bool invertible() const { return linear().determinant() != 0.0; }

  AffineTransform inverse() const {
    if (!invertible()) throw Error(ErrorCode::SingularTransform, "determinant is zero");
    const Eigen::Matrix3d li = linear().inverse();
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = li;
    m.block<3, 1>(0, 3) = -li * offset();
    return AffineTransform(m);
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return linear() * p + offset(); }

 private:
  Eigen::Matrix4d m_;
};

/// a * b: applies `b` first.
inline AffineTransform compose(const AffineTransform& a, const AffineTransform& b) {
  return AffineTransform(a.matrix() * b.matrix());
}

inline Eigen::Vector3d apply_affine(const AffineTransform& t, const Eigen::Vector3d& p) {
  return t.apply(p);
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// ---- interpolation ----

// Coordinates within this distance of the lattice bounds are snapped onto it,
// so identity resampling does not lose border voxels to rounding.
inline constexpr double kBoundsSlack = 1e-6;

/// Trilinear interpolation at continuous voxel coordinates. Points outside
/// [0, n-1] on any axis return `outside`.
template <typename T>
double trilinear_sample(const Volume<T>& vol, const Eigen::Vector3d& p, double outside = 0.0) {
  const auto& d = vol.geometry.dims;
  std::array<std::size_t, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    double c = p[a];
    const double hi = static_cast<double>(d[a]) - 1.0;
    if (c < -kBoundsSlack || c > hi + kBoundsSlack || !std::isfinite(c)) return outside;
    c = std::clamp(c, 0.0, hi);
    double fl = std::floor(c);
    if (fl >= hi) fl = std::max(hi - 1.0, 0.0);
    i0[a] = static_cast<std::size_t>(fl);
    f[a] = c - fl;
  }
  const std::size_t nx = d[0], nxy = d[0] * d[1];
  const std::size_t sx = d[0] > 1 ? 1 : 0, sy = d[1] > 1 ? nx : 0, sz = d[2] > 1 ? nxy : 0;
  const std::size_t base = i0[0] + nx * i0[1] + nxy * i0[2];
  const auto at = [&](std::size_t off) { return static_cast<double>(vol.data[base + off]); };
  const double c00 = at(0) * (1 - f[0]) + at(sx) * f[0];
  const double c10 = at(sy) * (1 - f[0]) + at(sy + sx) * f[0];
  const double c01 = at(sz) * (1 - f[0]) + at(sz + sx) * f[0];
  const double c11 = at(sz + sy) * (1 - f[0]) + at(sz + sy + sx) * f[0];
  const double c0 = c00 * (1 - f[1]) + c10 * f[1];
  const double c1 = c01 * (1 - f[1]) + c11 * f[1];
  return c0 * (1 - f[2]) + c1 * f[2];
}

/// Value of the voxel whose center is nearest to `p`; exact half-way ties go
/// to the lower index. Outside the lattice returns `outside`.
template <typename T>
T nearest_sample(const Volume<T>& vol, const Eigen::Vector3d& p, T outside = T{}) {
  const auto& d = vol.geometry.dims;
  std::array<std::size_t, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(p[a])) return outside;
    const double r = std::ceil(p[a] - 0.5);
    if (r < 0.0 || r > static_cast<double>(d[a]) - 1.0) return outside;
    idx[a] = static_cast<std::size_t>(r);
  }
  return vol(idx[0], idx[1], idx[2]);
}

}  // namespace postop
