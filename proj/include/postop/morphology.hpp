#pragma once

// Binary-volume tools: 6-connected components, exact Euclidean distance
// transform, ball closing and cavity filling.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "postop/volume.hpp"

namespace postop::morph {

struct Components {
  /// 0 = background, otherwise 1-based component id in scan order.
  std::vector<std::uint32_t> id;
  /// size[c] = voxel count of component c (size[0] unused).
  std::vector<std::size_t> size;
};

template <typename Pred>
Components label_components(const Index3& dims, Pred&& is_fg) {
  const std::size_t nx = dims[0], ny = dims[1], nz = dims[2];
  const std::size_t n = nx * ny * nz;
  Components c;
  c.id.assign(n, 0);
  c.size.assign(1, 0);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (c.id[seed] != 0 || !is_fg(seed)) continue;
    const auto cid = static_cast<std::uint32_t>(c.size.size());
    c.size.push_back(0);
    c.id[seed] = cid;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      ++c.size[cid];
      const std::size_t x = v % nx, y = (v / nx) % ny, z = v / (nx * ny);
      const auto visit = [&](std::size_t w) {
        if (c.id[w] == 0 && is_fg(w)) {
          c.id[w] = cid;
          stack.push_back(w);
        }
      };
      if (x > 0) visit(v - 1);
      if (x + 1 < nx) visit(v + 1);
      if (y > 0) visit(v - nx);
      if (y + 1 < ny) visit(v + nx);
      if (z > 0) visit(v - nx * ny);
      if (z + 1 < nz) visit(v + nx * ny);
    }
  }
  return c;
}

inline Components label_components(const Mask& m) {
  return label_components(m.geometry.dims, [&](std::size_t i) { return m.data[i] != 0; });
}

/// Largest 6-connected component; ties go to the component found first in
/// scan order. Empty input gives an empty mask.
inline Mask largest_component(const Mask& m) {
  const Components c = label_components(m);
  Mask out(m.geometry, 0);
  if (c.size.size() <= 1) return out;
  std::size_t best = 1;
  for (std::size_t k = 2; k < c.size.size(); ++k)
    if (c.size[k] > c.size[best]) best = k;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = c.id[i] == best ? 1 : 0;
  return out;
}

/// Drops components smaller than `min_voxels`.
inline Mask remove_small_components(const Mask& m, std::size_t min_voxels) {
  const Components c = label_components(m);
  Mask out(m.geometry, 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = (c.id[i] != 0 && c.size[c.id[i]] >= min_voxels) ? 1 : 0;
  return out;
}

/// Background components that do not touch the volume border become foreground.
inline Mask fill_cavities(const Mask& m) {
  const Components bg = label_components(m.geometry.dims, [&](std::size_t i) { return m.data[i] == 0; });
  std::vector<std::uint8_t> touches(bg.size.size(), 0);
  const auto& d = m.geometry.dims;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (bg.id[i] == 0) continue;
    const auto [x, y, z] = m.coords(i);
    if (x == 0 || y == 0 || z == 0 || x + 1 == d[0] || y + 1 == d[1] || z + 1 == d[2])
      touches[bg.id[i]] = 1;
  }
  Mask out = m;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (bg.id[i] != 0 && !touches[bg.id[i]]) out.data[i] = 1;
  return out;
}

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line
// with sample spacing `h`: out[q] = min_p f[p] + (h (q - p))^2.
inline void edt_1d(const double* f, double* out, std::size_t n, double h, std::vector<std::size_t>& v,
                   std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  const double h2 = h * h;
  std::size_t k = 0;
  std::size_t first = n;
  for (std::size_t q = 0; q < n; ++q)
    if (f[q] < kInf) {
      first = q;
      break;
    }
  if (first == n) {
    std::fill(out, out + n, kInf);
    return;
  }
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  for (std::size_t q = first + 1; q < n; ++q) {
    if (!(f[q] < kInf)) continue;
    const double fq = f[q] + h2 * static_cast<double>(q) * static_cast<double>(q);
    double s;
    while (true) {
      const double p = static_cast<double>(v[k]);
      const double fp = f[v[k]] + h2 * p * p;
      s = (fq - fp) / (2.0 * h2 * (static_cast<double>(q) - p));
      if (s > z[k]) break;  // z[0] = -inf stops this at k == 0
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double dq = h * (static_cast<double>(q) - static_cast<double>(v[k]));
    out[q] = dq * dq + f[v[k]];
  }
}

}  // namespace detail

/// Squared Euclidean distance (world mm^2, using `spacing`) from every voxel
/// to the nearest voxel where `seed` holds. +inf when there is no seed.
template <typename Pred>
std::vector<double> squared_distance_map(const Index3& dims, const Vec3& spacing, Pred&& seed) {
  const std::size_t nx = dims[0], ny = dims[1], nz = dims[2];
  std::vector<double> d(nx * ny * nz);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = seed(i) ? 0.0 : detail::kInf;
  const std::size_t longest = std::max({nx, ny, nz});
  std::vector<double> line(longest), res(longest), z;
  std::vector<std::size_t> v;
  const std::size_t stride[3] = {1, nx, nx * ny};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = dims[axis];
    if (n == 1) continue;
    const std::size_t s = stride[axis];
    for (std::size_t k = 0; k < nz; ++k)
      for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
          const std::size_t pos[3] = {i, j, k};
          if (pos[axis] != 0) continue;
          const std::size_t base = i + nx * (j + ny * k);
          for (std::size_t q = 0; q < n; ++q) line[q] = d[base + q * s];
          detail::edt_1d(line.data(), res.data(), n, spacing[axis], v, z);
          for (std::size_t q = 0; q < n; ++q) d[base + q * s] = res[q];
        }
  }
  return d;
}

/// Closing with the ball {dx^2 + dy^2 + dz^2 <= r^2} in voxel units. Space
/// beyond the volume border counts as background for the dilation and is
/// ignored by the erosion, so the border itself never erodes.
inline Mask close_ball(const Mask& m, double radius_voxels) {
  const Vec3 unit{1.0, 1.0, 1.0};
  const double r2 = radius_voxels * radius_voxels;
  const auto to_fg = squared_distance_map(m.geometry.dims, unit, [&](std::size_t i) { return m.data[i] != 0; });
  Mask dilated(m.geometry, 0);
  for (std::size_t i = 0; i < m.size(); ++i) dilated.data[i] = to_fg[i] <= r2 ? 1 : 0;
  const auto to_bg =
      squared_distance_map(m.geometry.dims, unit, [&](std::size_t i) { return dilated.data[i] == 0; });
  Mask out(m.geometry, 0);
  for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = to_bg[i] > r2 ? 1 : 0;
  return out;
}

}  // namespace postop::morph
