#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace postop;

namespace {

// Brute-force squared distance to the nearest seed, in mm.
std::vector<double> brute_d2(const Mask& seeds) {
  const auto& g = seeds.geometry;
  std::vector<double> out(seeds.size(), std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < seeds.size(); ++a) {
    const auto ca = seeds.coords(a);
    for (std::size_t b = 0; b < seeds.size(); ++b) {
      if (!seeds.data[b]) continue;
      const auto cb = seeds.coords(b);
      double s = 0;
      for (int ax = 0; ax < 3; ++ax) {
        const double d = (double(ca[ax]) - double(cb[ax])) * g.spacing[ax];
        s += d * d;
      }
      out[a] = std::min(out[a], s);
    }
  }
  return out;
}

}  // namespace

TEST(Components, SixConnectivity) {
  Mask m(Geometry::axis_aligned({3, 3, 1}, {1, 1, 1}), 0);
  m(0, 0, 0) = 1;
  m(1, 1, 0) = 1;  // diagonal only: separate component
  m(2, 1, 0) = 1;
  const auto c = morph::label_components(m);
  EXPECT_EQ(c.size.size(), 3u);
  const auto big = morph::largest_component(m);
  EXPECT_EQ(count_nonzero(big), 2u);
  EXPECT_EQ(big(1, 1, 0), 1);
  EXPECT_EQ(count_nonzero(morph::largest_component(Mask(m.geometry, 0))), 0u);
}

TEST(Components, RemoveSmall) {
  Mask m(Geometry::axis_aligned({10, 1, 1}, {1, 1, 1}), 0);
  m.data = {1, 1, 1, 1, 1, 0, 1, 1, 0, 1};
  const auto out = morph::remove_small_components(m, 3);
  EXPECT_EQ(out.data, (std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0, 0, 0, 0, 0}));
}

TEST(FillCavities, EnclosedOnly) {
  Mask m(Geometry::axis_aligned({5, 5, 5}, {1, 1, 1}), 0);
  for (std::size_t k = 1; k < 4; ++k)
    for (std::size_t j = 1; j < 4; ++j)
      for (std::size_t i = 1; i < 4; ++i) m(i, j, k) = 1;
  m(2, 2, 2) = 0;
  const auto filled = morph::fill_cavities(m);
  EXPECT_EQ(filled(2, 2, 2), 1);
  EXPECT_EQ(count_nonzero(filled), 27u);
  // A tunnel to the border keeps the hole open.
  m(2, 2, 3) = 0;
  m(2, 2, 4) = 0;
  EXPECT_EQ(morph::fill_cavities(m)(2, 2, 2), 0);
}

TEST(DistanceMap, MatchesBruteForceAnisotropic) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const auto seeds = fixtures::random_mask({7, 6, 5}, rng, 0.05, {0.7, 1.3, 2.1});
    if (!count_nonzero(seeds)) continue;
    const auto fast = morph::squared_distance_map(seeds.geometry.dims, seeds.geometry.spacing,
                                                  [&](std::size_t i) { return seeds.data[i] != 0; });
    const auto slow = brute_d2(seeds);
    for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], slow[i], 1e-9);
  }
}

TEST(Closing, FillsNarrowGapKeepsBall) {
  // Two slabs separated by a 1-voxel gap are bridged by a radius-2 closing.
  Mask m(Geometry::axis_aligned({12, 12, 12}, {1, 1, 1}), 0);
  for (std::size_t k = 2; k < 10; ++k)
    for (std::size_t j = 2; j < 10; ++j)
      for (std::size_t i = 2; i < 10; ++i)
        if (i != 5) m(i, j, k) = 1;
  const auto closed = morph::close_ball(m, 2.0);
  EXPECT_EQ(closed(5, 5, 5), 1);
  // Closing is extensive.
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.data[i]) EXPECT_EQ(closed.data[i], 1);
}

TEST(Closing, DigitalBallIsClosed) {
  Mask m(Geometry::axis_aligned({21, 21, 21}, {1, 1, 1}), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto c = m.coords(i);
    const double x = double(c[0]) - 10, y = double(c[1]) - 10, z = double(c[2]) - 10;
    m.data[i] = x * x + y * y + z * z <= 36.0 ? 1 : 0;
  }
  EXPECT_EQ(morph::close_ball(m, 2.0), m);
}
