#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "support.hpp"

using namespace postop;
using namespace postop::cohort;

namespace {

MetricRow make_row(const std::string& id, const std::string& model, Region r, double gt_cm3, double pred_cm3,
                   std::optional<double> dice, const std::string& timepoint = "EPS", const std::string& center = "A") {
  MetricRow row;
  row.case_id = id;
  row.center = center;
  row.timepoint = timepoint;
  row.model = model;
  row.record.region = r;
  row.record.dice = dice;
  if (dice) {
    row.record.jaccard = *dice / (2 - *dice);
    row.record.vsi = 1.0;
  }
  row.record.gt_volume_cm3 = gt_cm3;
  row.record.pred_volume_cm3 = pred_cm3;
  return row;
}

// 36 cases: the first 23 have no residual enhancing tumor, the rest 0.5 to 6.5 cm3.
std::vector<MetricRow> fixture36(const std::string& model = "m") {
  std::vector<MetricRow> rows;
  for (int i = 0; i < 36; ++i) {
    const std::string id = "c" + std::to_string(100 + i);
    const bool rt = i >= 23;
    const double gt = rt ? 0.5 * (i - 22) : 0.0;
    const double pred = i == 23 ? 0.05 : rt ? gt * 0.9 : (i % 5 == 0 ? 0.3 : 0.0);
    const std::optional<double> d = rt ? std::optional<double>(0.5 + 0.03 * (i - 23)) : (pred > 0 ? 0.0 : std::optional<double>());
    const std::string tp = i % 3 == 0 ? "LPS" : "EPS";
    const std::string center = i % 2 ? "B" : "A";
    rows.push_back(make_row(id, model, Region::ET, gt, pred, d, tp, center));
    rows.push_back(make_row(id, model, Region::ED, 10 + i, 9 + i, 0.8 + 0.001 * i, tp, center));
    rows.push_back(make_row(id, model, Region::CAV, 5, 5, 0.9, tp, center));
  }
  return rows;
}

LabelVolume tiny_labels(std::initializer_list<std::uint8_t> v) {
  LabelVolume lv(Geometry::axis_aligned({v.size(), 1, 1}, {1, 1, 1}), 0);
  std::copy(v.begin(), v.end(), lv.data.begin());
  return lv;
}

}  // namespace

TEST(Harmonize, IdentityAndDrop) {
  const auto lv = tiny_labels({0, 1, 2, 3, 3});
  EXPECT_EQ(harmonize(lv, LabelScheme::identity()), lv);
  LabelScheme s;
  s.model = "brats";
  s.mapping = {{1, 3}, {2, 2}, {4, 1}, {9, LabelScheme::kDrop}};
  RawLabels raw(Geometry::axis_aligned({5, 1, 1}, {1, 1, 1}), 0);
  raw.data = {0, 4, 1, 2, 9};
  EXPECT_EQ(harmonize(raw, s).data, (std::vector<std::uint8_t>{0, 1, 3, 2, 0}));
}

TEST(Harmonize, UnmappedLabel) {
  LabelScheme s = LabelScheme::identity();
  RawLabels raw(Geometry::axis_aligned({3, 1, 1}, {1, 1, 1}), 0);
  raw.data = {0, 7, 1};
  try {
    harmonize(raw, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnmappedLabel);
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
  s.mapping[2] = 5;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Harmonize, PreservesVoxelCountsUnderPermutation) {
  std::mt19937_64 rng(3);
  const auto lv = fixtures::random_labels({13, 11, 9}, rng);
  LabelScheme s;
  s.mapping = {{10, 1}, {20, 2}, {30, 3}};
  RawLabels raw(lv.geometry, 0);
  for (std::size_t i = 0; i < lv.size(); ++i) raw.data[i] = lv.data[i] * 10;
  const auto out = harmonize(raw, s);
  EXPECT_EQ(out, lv);
  VoxelGrid g = nifti::to_grid(lv);
  g.data[0] = 1.4;
  EXPECT_THROW(to_raw_labels(g), Error);
}

TEST(Harmonize, AbsentRegionMarksRowsNotApplicable) {
  LabelScheme s = LabelScheme::identity("nocav");
  s.absent = {Region::CAV};
  const auto gt = tiny_labels({0, 1, 2, 3});
  const auto pred = tiny_labels({0, 1, 2, 0});
  CaseEntry c;
  c.case_id = "x";
  const auto rows = evaluate_pair(c, "nocav", gt, pred, s, {});
  ASSERT_EQ(rows.size(), kAllRegions.size());
  for (const auto& r : rows) EXPECT_EQ(r.applicable, r.record.region != Region::CAV);
}

TEST(Manifest, JsonRoundTripAndErrors) {
  const nlohmann::json j = nlohmann::json::parse(R"({
    "schemes": {"b": {"mapping": {"1": 3, "4": 1, "2": 2, "5": "drop"}, "absent": ["CAV"]}},
    "cases": [
      {"case_id": "p1", "center": "X", "timepoint": "LPS", "gt": "gt/p1.nii.gz",
       "predictions": {"a": "a/p1.nii.gz", "b": "/abs/p1.nii"}}
    ]})");
  const auto m = manifest_from_json(j, "/data");
  ASSERT_EQ(m.cases.size(), 1u);
  EXPECT_EQ(m.cases[0].gt, std::filesystem::path("/data/gt/p1.nii.gz"));
  EXPECT_EQ(m.cases[0].predictions.at("b"), std::filesystem::path("/abs/p1.nii"));
  EXPECT_EQ(m.scheme_for("b").mapping.at(5), LabelScheme::kDrop);
  EXPECT_FALSE(m.scheme_for("b").applicable(Region::CAV));
  EXPECT_TRUE(m.scheme_for("a").applicable(Region::CAV));
  EXPECT_EQ(m.models(), (std::vector<std::string>{"a", "b"}));
  const auto back = manifest_from_json(manifest_to_json(m, "/data"), "/data");
  EXPECT_EQ(manifest_to_json(back, "/data"), manifest_to_json(m, "/data"));

  auto dup = j;
  dup["cases"].push_back(j["cases"][0]);
  EXPECT_THROW(manifest_from_json(dup), Error);
  auto tp = j;
  tp["cases"][0]["timepoint"] = "someday";
  EXPECT_THROW(manifest_from_json(tp), Error);
  auto badmap = j;
  badmap["schemes"]["b"]["mapping"]["7"] = "keep";
  EXPECT_THROW(manifest_from_json(badmap), Error);
}

TEST(MetricsCsv, RoundTripIsExact) {
  auto rows = fixture36();
  rows[0].case_id = "needs,\"quotes\"";
  rows[1].record.hausdorff95 = 1.0 / 3.0;
  rows[2].applicable = false;
  std::stringstream ss;
  write_metrics_csv(ss, rows);
  const auto back = read_metrics_csv(ss);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].case_id, rows[i].case_id);
    EXPECT_EQ(back[i].timepoint, rows[i].timepoint);
    EXPECT_EQ(back[i].applicable, rows[i].applicable);
    EXPECT_EQ(back[i].record.region, rows[i].record.region);
    EXPECT_EQ(back[i].record.dice, rows[i].record.dice);
    EXPECT_EQ(back[i].record.jaccard, rows[i].record.jaccard);
    EXPECT_EQ(back[i].record.hausdorff95, rows[i].record.hausdorff95);
    EXPECT_EQ(back[i].record.gt_volume_cm3, rows[i].record.gt_volume_cm3);
  }
  std::stringstream bad("case_id,center\nx,y\n");
  EXPECT_THROW(read_metrics_csv(bad), Error);
}

TEST(Summary, ReproducibleFromCsv) {
  const auto rows = fixture36();
  std::stringstream ss;
  write_metrics_csv(ss, rows);
  EXPECT_EQ(report::to_csv(summarize(read_metrics_csv(ss))), report::to_csv(summarize(rows)));
  EXPECT_EQ(report::to_markdown(summarize(rows)), report::to_markdown(summarize(rows)));
}

TEST(Summary, SubgroupCounts) {
  const auto s = summarize(fixture36());
  const auto* all = s.find("m", "All", Region::ET, Metric::Dice, Subgroup::All);
  const auto* pos = s.find("m", "All", Region::ET, Metric::Dice, Subgroup::Positive);
  const auto* tp = s.find("m", "All", Region::ET, Metric::Dice, Subgroup::TruePositive);
  ASSERT_TRUE(all && pos && tp);
  EXPECT_EQ(all->n_cases, 36u);
  EXPECT_EQ(pos->n_cases, 13u);
  // The smallest residual is predicted at 0.05 cm3, below the threshold.
  EXPECT_EQ(tp->n_cases, 12u);
  // GTR cases with both masks empty are excluded from the ET mean.
  std::size_t empty = 0;
  for (int i = 0; i < 23; ++i) empty += i % 5 != 0;
  EXPECT_EQ(all->n_excluded, empty);
  EXPECT_EQ(all->mean_ci->n, 36u - empty);
  const auto& v = s.volumes.front();
  EXPECT_EQ(v.center, "All centers");
  EXPECT_EQ(v.n, 36u);
  EXPECT_EQ(v.gtr, 23u);
  EXPECT_EQ(v.rt, 13u);
  EXPECT_EQ(s.volumes.size(), 3u);
  const auto* cb = s.find_classification("m", "All");
  ASSERT_TRUE(cb && cb->metrics);
  EXPECT_EQ(cb->metrics->confusion[1][1], 12u);
  EXPECT_EQ(cb->metrics->confusion[1][0], 1u);
  EXPECT_EQ(cb->metrics->confusion[0][1], 5u);
  EXPECT_EQ(cb->metrics->n, 36u);
}

TEST(Summary, MeanMatchesDirectComputation) {
  SummaryConfig cfg;
  cfg.ci.method = stats::CiMethod::T;
  const auto rows = fixture36();
  const auto s = summarize(rows, cfg);
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.record.region == Region::ED) v.push_back(*r.record.dice);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  const auto* c = s.find("m", "All", Region::ED, Metric::Dice, Subgroup::All);
  ASSERT_TRUE(c && c->mean_ci);
  EXPECT_NEAR(c->mean_ci->mean, mean, 1e-12);
  EXPECT_LT(c->mean_ci->lo, mean);
  EXPECT_GT(c->mean_ci->hi, mean);
}

TEST(Summary, TimepointFilterCommutesWithSelection) {
  const auto rows = fixture36();
  std::vector<MetricRow> lps;
  for (const auto& r : rows)
    if (r.timepoint == "LPS") lps.push_back(r);
  const auto full = summarize(rows);
  const auto sub = summarize(lps);
  for (Subgroup g : kAllSubgroups)
    for (Region r : {Region::ET, Region::ED, Region::CAV})
      for (Metric m : kAllMetrics) {
        const auto* a = full.find("m", "LPS", r, m, g);
        const auto* b = sub.find("m", "All", r, m, g);
        ASSERT_TRUE(a && b);
        EXPECT_EQ(a->n_cases, b->n_cases);
        ASSERT_EQ(a->mean_ci.has_value(), b->mean_ci.has_value());
        if (a->mean_ci) {
          EXPECT_EQ(a->mean_ci->mean, b->mean_ci->mean);
          EXPECT_EQ(a->mean_ci->lo, b->mean_ci->lo);
          EXPECT_EQ(a->mean_ci->hi, b->mean_ci->hi);
        }
      }
}

TEST(Quartiles, EdgesAndTies) {
  const auto q = quartile_groups({{2, 0.1}, {2, 0.2}, {2, 0.3}, {2, 0.4}});
  EXPECT_EQ(q.edges, (std::array<double, 3>{2, 2, 2}));
  EXPECT_EQ(q.bins[0].dice.size(), 4u);
  EXPECT_TRUE(q.bins[3].dice.empty());
  EXPECT_FALSE(q.bins[3].mean.has_value());

  // Volumes 1..8: edges 2.75, 4.5, 6.25.
  std::vector<std::pair<double, double>> vd;
  for (int i = 1; i <= 8; ++i) vd.emplace_back(i, 0.1 * i);
  const auto b = quartile_groups(vd);
  EXPECT_DOUBLE_EQ(b.edges[0], 2.75);
  EXPECT_DOUBLE_EQ(b.edges[1], 4.5);
  EXPECT_DOUBLE_EQ(b.edges[2], 6.25);
  for (const auto& bin : b.bins) EXPECT_EQ(bin.dice.size(), 2u);
  for (int k = 0; k < 3; ++k) EXPECT_LT(*b.bins[k].mean, *b.bins[k + 1].mean);

  const auto edge = quartile_groups({{1, 0}, {2, 0}, {3, 0}, {4, 0}, {2.5, 0}});
  EXPECT_DOUBLE_EQ(edge.edges[1], 2.5);
  EXPECT_EQ(edge.bins[1].dice.size(), 1u);  // 2.5 sits on Q2: lower bin

  try {
    quartile_groups({{1, 0}, {2, 0}, {3, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewCases);
  }
}

TEST(Report, NotApplicableCellsAreBlank) {
  auto rows = fixture36("full");
  for (auto r : fixture36("nocav")) {
    r.applicable = r.record.region != Region::CAV;
    rows.push_back(r);
  }
  const auto s = summarize(rows);
  const auto* c = s.find("nocav", "All", Region::CAV, Metric::Dice, Subgroup::All);
  ASSERT_TRUE(c);
  EXPECT_FALSE(c->applicable);
  const std::string md = report::to_markdown(s);
  std::istringstream in(md);
  std::string line;
  bool seen = false;
  while (std::getline(in, line))
    if (line.rfind("| CAV Dice |", 0) == 0) {
      seen = true;
      EXPECT_NE(line.find("0.900 (0.900-0.900)"), std::string::npos);
      EXPECT_EQ(line.substr(line.size() - 4), "|  |");
    }
  EXPECT_TRUE(seen);
  const auto j = report::to_json(s);
  EXPECT_TRUE(j.contains("cells"));
}

TEST(Evaluate, ManifestOnDiskWithFailures) {
  fixtures::TempDir dir("cohort");
  std::mt19937_64 rng(9);
  Manifest m;
  for (int i = 0; i < 4; ++i) {
    CaseEntry c;
    c.case_id = "k" + std::to_string(i);
    c.center = i < 2 ? "A" : "B";
    c.gt = dir / (c.case_id + "_gt.nii.gz");
    const auto gt = fixtures::random_labels({12, 10, 8}, rng);
    nifti::write_label_file(c.gt, gt);
    c.predictions["same"] = c.gt;
    c.predictions["other"] = dir / (c.case_id + "_other.nii.gz");
    if (i != 2) nifti::write_label_file(c.predictions["other"], fixtures::random_labels({12, 10, 8}, rng));
    m.cases.push_back(c);
  }
  EvaluateConfig cfg;
  const auto r1 = evaluate_manifest(m, cfg);
  ASSERT_EQ(r1.failures.size(), 1u);
  EXPECT_EQ(r1.failures[0].case_id, "k2");
  EXPECT_EQ(r1.failures[0].model, "other");
  EXPECT_EQ(r1.rows.size(), (4u + 3u) * kAllRegions.size());
  for (const auto& r : r1.rows)
    if (r.model == "same") EXPECT_EQ(r.record.dice, 1.0);
  cfg.jobs = 3;
  const auto r3 = evaluate_manifest(m, cfg);
  std::stringstream a, b;
  write_metrics_csv(a, r1.rows);
  write_metrics_csv(b, r3.rows);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Summary, EmptyDicePolicyMovesOnlyAllSubjects) {
  // 6 GTR cases with no ET anywhere, 3 RT cases with an offset ET prediction.
  const Geometry g = Geometry::axis_aligned({12, 12, 12}, {1, 1, 1});
  const auto cube = [&](std::size_t x0) {
    LabelVolume v(g, 0);
    for (std::size_t k = 2; k < 8; ++k)
      for (std::size_t j = 2; j < 8; ++j)
        for (std::size_t i = x0; i < x0 + 6; ++i) v(i, j, k) = 1;
    return v;
  };
  std::vector<MetricRow> undef, one;
  for (int i = 0; i < 9; ++i) {
    CaseEntry c;
    c.case_id = "p" + std::to_string(i);
    c.center = "A";
    const bool rt = i >= 6;
    const LabelVolume gt = rt ? cube(2) : LabelVolume(g, 0);
    const LabelVolume pred = rt ? cube(2 + static_cast<std::size_t>(i - 5)) : LabelVolume(g, 0);
    EvaluateConfig cfg;
    cfg.with_hausdorff = false;
    for (auto& r : evaluate_pair(c, "m", gt, pred, LabelScheme::identity("m"), cfg)) undef.push_back(r);
    cfg.empty_policy = EmptyPolicy::One;
    for (auto& r : evaluate_pair(c, "m", gt, pred, LabelScheme::identity("m"), cfg)) one.push_back(r);
  }
  SummaryConfig sc;
  sc.ci.method = stats::CiMethod::T;
  const auto a = summarize(undef, sc), b = summarize(one, sc);
  const auto* all_a = a.find("m", "All", Region::ET, Metric::Dice, Subgroup::All);
  const auto* all_b = b.find("m", "All", Region::ET, Metric::Dice, Subgroup::All);
  ASSERT_TRUE(all_a && all_b && all_a->mean_ci && all_b->mean_ci);
  EXPECT_EQ(all_a->n_excluded, 6u);
  EXPECT_EQ(all_b->n_excluded, 0u);
  // Offsets 1, 2, 3 voxels along x on a 6-voxel cube: Dice 5/6, 4/6, 3/6.
  EXPECT_NEAR(all_a->mean_ci->mean, (5.0 + 4.0 + 3.0) / 18.0, 1e-12);
  EXPECT_NEAR(all_b->mean_ci->mean, (6.0 + 2.0) / 9.0, 1e-12);
  const auto* pos_a = a.find("m", "All", Region::ET, Metric::Dice, Subgroup::Positive);
  const auto* pos_b = b.find("m", "All", Region::ET, Metric::Dice, Subgroup::Positive);
  ASSERT_TRUE(pos_a && pos_b && pos_a->mean_ci && pos_b->mean_ci);
  EXPECT_EQ(pos_a->mean_ci->mean, pos_b->mean_ci->mean);
  EXPECT_EQ(pos_a->mean_ci->lo, pos_b->mean_ci->lo);
  EXPECT_EQ(pos_a->mean_ci->hi, pos_b->mean_ci->hi);
}
