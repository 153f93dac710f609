#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "postop/postop.hpp"

namespace postop::fixtures {

inline Mask random_mask(const Index3& dims, std::mt19937_64& rng, double p, const Vec3& spacing = {1, 1, 1}) {
  Mask m(Geometry::axis_aligned(dims, spacing), 0);
  std::bernoulli_distribution b(p);
  for (auto& v : m.data) v = b(rng) ? 1 : 0;
  return m;
}

inline LabelVolume random_labels(const Index3& dims, std::mt19937_64& rng) {
  LabelVolume lv(Geometry::axis_aligned(dims, {1, 1, 1}), 0);
  std::uniform_int_distribution<int> d(0, kMaxLabel);
  for (auto& v : lv.data) v = static_cast<std::uint8_t>(d(rng));
  return lv;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("postop-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Small phantom: 64x64x48 grid at 2 mm with one lesion of each kind.
inline phantom::PhantomSpec small_spec() {
  phantom::PhantomSpec s = phantom::default_case_spec();
  s.dims = {64, 64, 48};
  s.spacing = {2.0, 2.0, 2.0};
  s.brain_semi_axes_mm = {50, 56, 40};
  s.skull_gap_mm = 4;
  s.skull_thickness_mm = 4;
  return s;
}

}  // namespace postop::fixtures
