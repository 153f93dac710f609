#include <gtest/gtest.h>

#include "support.hpp"

using namespace postop;

namespace {

// Aligned, brain-masked z-scores straight from the generator (no registration).
SequenceSet zscores(const phantom::PhantomCase& pc) {
  SequenceSet z;
  for (const auto& [q, g] : pc.sequences) z[q] = zscore_normalize(g, pc.brain);
  return z;
}

double dice_of(const LabelVolume& gt, const LabelVolume& pred, Region r) {
  return *dice(extract_mask(gt, r), extract_mask(pred, r));
}

}  // namespace

TEST(Phantom, FullResectionIsGtr) {
  auto s = fixtures::small_spec();
  s.resection_fraction = 1.0;
  const auto pc = phantom::generate_case(s);
  const double v = volume_cm3(extract_mask(pc.gt, Region::ET));
  EXPECT_EQ(v, 0.0);
  EXPECT_EQ(classify_eor(v), EorClass::GTR);
  EXPECT_GT(count_nonzero(extract_mask(pc.gt, Region::CAV)), 0u);
}

TEST(Phantom, SphereRasterizationMatchesOracle) {
  phantom::PhantomSpec s;
  s.dims = {32, 32, 32};
  s.spacing = {1, 1, 1};
  s.brain_semi_axes_mm = {14, 14, 14};
  s.skull_thickness_mm = 0;
  const Vec3 center{0.5, 0.5, 0.5};  // a voxel center on this even-sized lattice
  s.lesions = {{phantom::Shape::Sphere, center, {2.879, 2.879, 2.879}, 1, phantom::default_intensity(1)}};
  const auto pc = phantom::generate_case(s);
  // Independent count of integer offsets inside the radius.
  std::size_t oracle = 0;
  for (int x = -3; x <= 3; ++x)
    for (int y = -3; y <= 3; ++y)
      for (int z = -3; z <= 3; ++z) oracle += x * x + y * y + z * z <= 2.879 * 2.879;
  const std::size_t got = count_nonzero(extract_mask(pc.gt, Region::ET));
  EXPECT_EQ(got, oracle);
  EXPECT_EQ(got, 93u);
  EXPECT_EQ(classify_eor(volume_cm3(got, s.spacing)), EorClass::GTR);
}

TEST(Phantom, DeterministicAndSeedSensitive) {
  const auto s = fixtures::small_spec();
  const auto a = phantom::generate_case(s);
  const auto b = phantom::generate_case(s);
  for (Sequence q : kAllSequences) EXPECT_TRUE(a.sequences.at(q).data == b.sequences.at(q).data);
  EXPECT_EQ(a.gt, b.gt);
  auto s2 = s;
  s2.seed = s.seed + 1;
  const auto c = phantom::generate_case(s2);
  EXPECT_FALSE(a.sequences.at(Sequence::T1).data == c.sequences.at(Sequence::T1).data);
  EXPECT_EQ(a.gt, c.gt);
}

TEST(Phantom, InvalidSpecs) {
  auto s = fixtures::small_spec();
  s.lesions[0].center_mm = {45, 0, 0};
  EXPECT_THROW(phantom::generate_case(s), Error);
  s = fixtures::small_spec();
  s.resection_fraction = 1.5;
  try {
    s.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidSpec);
  }
  s = fixtures::small_spec();
  s.lesions[0].label = 4;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Phantom, JsonRoundTrip) {
  auto s = fixtures::small_spec();
  s.misalignment[2] = AffineTransform::from_params(AffineParams::rigid(1, 2, 3, 0.1, 0, 0));
  const auto back = phantom::spec_from_json(phantom::to_json(s));
  EXPECT_EQ(phantom::to_json(back), phantom::to_json(s));
  EXPECT_THROW(phantom::spec_from_json(nlohmann::json{{"lesions", {{{"shape", "cube"}}}}}), Error);
}

TEST(Cohort, ExactGtrCountAndPerCaseSeeds) {
  const auto plan = phantom::plan_cohort(20, phantom::default_case_spec(), {}, 77);
  ASSERT_EQ(plan.size(), 20u);
  std::size_t gtr = 0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    gtr += plan[i].gt_gtr;
    EXPECT_EQ(plan[i].seed, 77u ^ i);
    EXPECT_EQ(plan[i].spec.resection_fraction == 1.0, plan[i].gt_gtr);
  }
  EXPECT_EQ(gtr, 10u);
  // Planning is a pure function of its inputs.
  const auto again = phantom::plan_cohort(20, phantom::default_case_spec(), {}, 77);
  for (std::size_t i = 0; i < plan.size(); ++i)
    EXPECT_EQ(phantom::to_json(plan[i].spec), phantom::to_json(again[i].spec));
}

TEST(Baseline, NoiselessPhantom) {
  auto s = fixtures::small_spec();
  s.noise_sigma = {0, 0, 0, 0};
  const auto pc = phantom::generate_case(s);
  const auto seg = phantom::baseline_segment(zscores(pc), pc.brain);
  for (Region r : {Region::ET, Region::ED, Region::CAV}) EXPECT_GT(dice_of(pc.gt, seg, r), 0.99) << region_name(r);
}

TEST(Baseline, NoisyPhantom) {
  const auto pc = phantom::generate_case(phantom::default_case_spec());
  const auto seg = phantom::baseline_segment(zscores(pc), pc.brain);
  for (Region r : {Region::ET, Region::ED, Region::CAV}) EXPECT_GT(dice_of(pc.gt, seg, r), 0.90) << region_name(r);
}

TEST(Baseline, FullyResectedPredictsGtr) {
  auto s = fixtures::small_spec();
  s.resection_fraction = 1.0;
  const auto pc = phantom::generate_case(s);
  const auto seg = phantom::baseline_segment(zscores(pc), pc.brain);
  EXPECT_EQ(classify_eor(volume_cm3(extract_mask(seg, Region::ET))), EorClass::GTR);
}

TEST(Baseline, ThresholdMonotoneAndDeterministic) {
  const auto pc = phantom::generate_case(fixtures::small_spec());
  const auto z = zscores(pc);
  phantom::BaselineConfig cfg;
  const auto base = phantom::baseline_segment(z, pc.brain, cfg);
  EXPECT_EQ(phantom::baseline_segment(z, pc.brain, cfg), base);
  for (double t1 : {2.0, 2.5, 3.0, 4.0, 6.0}) {
    phantom::BaselineConfig lo = cfg, hi = cfg;
    lo.et_t1ce_min = t1;
    hi.et_t1ce_min = t1 + 0.5;
    const auto a = extract_mask(phantom::baseline_segment(z, pc.brain, lo), Region::ET);
    const auto b = extract_mask(phantom::baseline_segment(z, pc.brain, hi), Region::ET);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (b.data[i]) ASSERT_TRUE(a.data[i]);
  }
}

TEST(Baseline, RejectsUnnormalizedInput) {
  const auto pc = phantom::generate_case(fixtures::small_spec());
  try {
    phantom::baseline_segment(pc.sequences, pc.brain);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotNormalized);
  }
}
