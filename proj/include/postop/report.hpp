#pragma once

// Renderers for CohortSummary: Markdown tables laid out like the clinical
// report (rows = label x metric x subgroup, columns = models), plus JSON and a
// flat CSV.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "postop/cohort.hpp"

namespace postop::report {

namespace detail {

inline std::string num(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

inline std::string mean_ci_text(const cohort::Cell* c) {
  if (!c || !c->applicable || !c->mean_ci) return "";
  const auto& m = *c->mean_ci;
  return num(m.mean) + " (" + num(m.lo) + "-" + num(m.hi) + ")";
}

inline std::string median_iqr_text(const stats::MedianIqr& m, int prec = 2) {
  return num(m.median, prec) + " (" + num(m.q1, prec) + "-" + num(m.q3, prec) + ")";
}

inline std::string subgroup_title(Subgroup g) {
  switch (g) {
    case Subgroup::All: return "All subjects";
    case Subgroup::Positive: return "Positive subjects";
    case Subgroup::TruePositive: return "True Positive subjects";
  }
  return "?";
}

inline std::string metric_title(cohort::Metric m) {
  return m == cohort::Metric::Jaccard ? "Jaccard" : std::string(cohort::metric_name(m));
}

inline void header_row(std::ostream& os, const std::string& first, const std::vector<std::string>& models) {
  os << "| " << first << " |";
  for (const auto& m : models) os << " " << m << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < models.size(); ++i) os << "---|";
  os << "\n";
}

}  // namespace detail

/// One overlap table (All / EPS / LPS). ET/ED/CAV for all subjects, ET only
/// for the Positive and True Positive subgroups, then the GTR vs RT block.
inline void render_overlap_table(std::ostream& os, const cohort::CohortSummary& s, const std::string& table) {
  const auto& models = s.models;
  detail::header_row(os, "Metric", models);
  for (Subgroup g : kAllSubgroups) {
    const std::vector<Region> regions =
        g == Subgroup::All ? std::vector<Region>{Region::ET, Region::ED, Region::CAV} : std::vector<Region>{Region::ET};
    // n is per model since subgroups depend on each model's prediction.
    os << "| **" << detail::subgroup_title(g) << "** (n) |";
    for (const auto& m : models) {
      const auto* c = s.find(m, table, Region::ET, cohort::Metric::Dice, g);
      os << " " << (c ? std::to_string(c->n_cases) : "") << " |";
    }
    os << "\n";
    for (Region r : regions)
      for (cohort::Metric metric : cohort::kOverlapMetrics) {
        os << "| " << region_name(r) << " " << detail::metric_title(metric) << " |";
        for (const auto& m : models) os << " " << detail::mean_ci_text(s.find(m, table, r, metric, g)) << " |";
        os << "\n";
      }
  }
  os << "| **Gross Total resection versus Residual Tumor classification** |";
  for (std::size_t i = 0; i < models.size(); ++i) os << " |";
  os << "\n";
  const std::array<std::pair<const char*, double ClassificationMetrics::*>, 4> rows{{
      {"Precision", &ClassificationMetrics::precision},
      {"Recall", &ClassificationMetrics::recall},
      {"F1 Score", &ClassificationMetrics::f1},
      {"Accuracy", &ClassificationMetrics::accuracy},
  }};
  for (const auto& [label, field] : rows) {
    os << "| " << label << " |";
    for (const auto& m : models) {
      const auto* cb = s.find_classification(m, table);
      os << " " << (cb && cb->metrics ? detail::num((*cb->metrics).*field) : "") << " |";
    }
    os << "\n";
  }
  // Undefined values excluded from a mean are listed rather than hidden.
  bool any_excluded = false;
  for (const auto& c : s.cells)
    if (c.table == table && c.n_excluded > 0 && c.applicable) any_excluded = true;
  if (any_excluded) {
    os << "\nExcluded undefined values (both masks empty):";
    for (const auto& c : s.cells)
      if (c.table == table && c.n_excluded > 0 && c.applicable && c.metric == cohort::Metric::Dice &&
          (c.subgroup == Subgroup::All || c.region == Region::ET) &&
          (c.region == Region::ET || c.region == Region::ED || c.region == Region::CAV))
        os << " " << c.model << "/" << detail::subgroup_title(c.subgroup) << "/" << region_name(c.region) << " "
           << c.n_excluded << " of " << c.n_cases << ";";
    os << "\n";
  }
}

inline void render_volume_table(std::ostream& os, const cohort::CohortSummary& s) {
  os << "| Center | n | GTR | RT | ET volume, cm3 | ED volume, cm3 | CAV volume, cm3 |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (const auto& v : s.volumes) {
    os << "| " << v.center << " | " << v.n << " | " << v.gtr << " | " << v.rt << " |";
    for (Region r : {Region::ET, Region::ED, Region::CAV}) {
      const auto it = v.volumes.find(r);
      os << " " << (it == v.volumes.end() ? "" : detail::median_iqr_text(it->second)) << " |";
    }
    os << "\n";
  }
}

inline void render_brats_table(std::ostream& os, const cohort::CohortSummary& s) {
  for (const auto& b : s.brats) {
    os << "#### " << b.model << "\n\n| Metric | ET | WT | TC |\n|---|---|---|---|\n";
    for (cohort::Metric metric : {cohort::Metric::Dice, cohort::Metric::Sensitivity, cohort::Metric::Specificity,
                                  cohort::Metric::Hausdorff95})
      for (const char* stat : {"Mean", "StdDev", "Median", "25quantile", "75quantile"}) {
        os << "| " << cohort::metric_name(metric) << " " << stat << " |";
        for (Region r : kBratsRegions) {
          const auto it = b.values.find({metric, r});
          std::string cell;
          if (it != b.values.end()) {
            const auto& d = it->second;
            const std::string st = stat;
            const double v = st == "Mean"     ? d.mean
                             : st == "StdDev" ? d.sd
                             : st == "Median" ? d.median
                             : st == "25quantile" ? d.q1
                                                  : d.q3;
            cell = detail::num(v);
          }
          os << " " << cell << " |";
        }
        os << "\n";
      }
    os << "\n";
  }
}

inline void render_quartiles(std::ostream& os, const cohort::CohortSummary& s) {
  for (const auto& q : s.quartiles) {
    os << "#### " << q.model << "\n\n";
    if (!q.error.empty()) {
      os << "Not available: " << q.error << "\n\n";
      continue;
    }
    os << "| Quartile | ET volume range, cm3 | n | Mean Dice | Median Dice |\n|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& b = q.bins[i];
      os << "| Q" << i + 1 << " | " << (i == 0 ? "[" : "(") << detail::num(b.lower, 4) << ", "
         << detail::num(b.upper, 4) << "] | " << b.dice.size() << " | " << (b.mean ? detail::num(*b.mean) : "")
         << " | " << (b.median ? detail::num(*b.median) : "") << " |\n";
    }
    os << "\n";
  }
}

/// Stand-alone classification block with confusion counts, one column per model.
inline void render_classification(std::ostream& os, const std::map<std::string, ClassificationMetrics>& by_model) {
  std::vector<std::string> models;
  for (const auto& [m, c] : by_model) models.push_back(m);
  detail::header_row(os, "Gross Total resection versus Residual Tumor classification", models);
  const std::array<std::pair<const char*, double ClassificationMetrics::*>, 4> rows{{
      {"Precision", &ClassificationMetrics::precision},
      {"Recall", &ClassificationMetrics::recall},
      {"F1 Score", &ClassificationMetrics::f1},
      {"Accuracy", &ClassificationMetrics::accuracy},
  }};
  for (const auto& [label, field] : rows) {
    os << "| " << label << " |";
    for (const auto& [m, c] : by_model) os << " " << detail::num(c.*field) << " |";
    os << "\n";
  }
  const std::array<std::pair<const char*, std::pair<int, int>>, 4> cells{{
      {"GT GTR / predicted GTR", {0, 0}},
      {"GT GTR / predicted RT", {0, 1}},
      {"GT RT / predicted GTR", {1, 0}},
      {"GT RT / predicted RT", {1, 1}},
  }};
  for (const auto& [label, rc] : cells) {
    os << "| " << label << " |";
    for (const auto& [m, c] : by_model) os << " " << c.confusion[rc.first][rc.second] << " |";
    os << "\n";
  }
}

inline nlohmann::json classification_json(const ClassificationMetrics& c) {
  const auto cls = [](const ClassScores& s) {
    return nlohmann::json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  };
  return {{"precision", c.precision},
          {"recall", c.recall},
          {"f1", c.f1},
          {"accuracy", c.accuracy},
          {"micro_precision", c.micro_precision},
          {"micro_recall", c.micro_recall},
          {"micro_f1", c.micro_f1},
          {"GTR", cls(c.gtr)},
          {"RT", cls(c.rt)},
          {"confusion", c.confusion},
          {"n", c.n},
          {"degenerate", c.degenerate}};
}

inline std::string to_markdown(const cohort::CohortSummary& s) {
  std::ostringstream os;
  os << "# Cohort evaluation\n\n";
  os << "Cells show mean (95% CI). Blank cells are not applicable to that model.\n\n";
  os << "## Ground truth volumes, median (IQR)\n\n";
  render_volume_table(os, s);
  for (const auto& f : {std::pair<const char*, const char*>{"All", "All scans"},
                        {"EPS", "Early postoperative scans"},
                        {"LPS", "Late postoperative scans"}}) {
    bool present = false;
    for (const auto& c : s.cells)
      if (c.table == f.first && c.n_cases > 0) present = true;
    if (!present) continue;
    os << "\n## " << f.second << "\n\n";
    render_overlap_table(os, s, f.first);
  }
  os << "\n## BraTS-style metrics\n\n";
  render_brats_table(os, s);
  os << "## Enhancing tumor Dice by ground truth volume quartile (positive subjects)\n\n";
  render_quartiles(os, s);
  if (!s.warnings.empty()) {
    os << "## Warnings\n\n";
    for (const auto& w : s.warnings) os << "- " << w << "\n";
  }
  return os.str();
}

inline nlohmann::json to_json(const cohort::CohortSummary& s) {
  using nlohmann::json;
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["models"] = s.models;
  j["cells"] = json::array();
  for (const auto& c : s.cells) {
    json cj{{"model", c.model},
            {"table", c.table},
            {"region", region_name(c.region)},
            {"metric", cohort::metric_name(c.metric)},
            {"subgroup", subgroup_name(c.subgroup)},
            {"applicable", c.applicable},
            {"n_cases", c.n_cases},
            {"n_excluded", c.n_excluded}};
    if (c.mean_ci) {
      cj["n"] = c.mean_ci->n;
      cj["mean"] = c.mean_ci->mean;
      cj["ci_low"] = c.mean_ci->lo;
      cj["ci_high"] = c.mean_ci->hi;
    } else {
      cj["n"] = 0;
      cj["mean"] = cj["ci_low"] = cj["ci_high"] = nullptr;
    }
    if (c.median_iqr) {
      cj["median"] = c.median_iqr->median;
      cj["q1"] = c.median_iqr->q1;
      cj["q3"] = c.median_iqr->q3;
    } else {
      cj["median"] = cj["q1"] = cj["q3"] = nullptr;
    }
    j["cells"].push_back(cj);
  }
  j["classification"] = json::array();
  for (const auto& cb : s.classification) {
    json cj{{"model", cb.model}, {"table", cb.table}};
    if (cb.metrics) {
      const auto& m = *cb.metrics;
      cj["n"] = m.n;
      cj["precision"] = m.precision;
      cj["recall"] = m.recall;
      cj["f1"] = m.f1;
      cj["accuracy"] = m.accuracy;
      cj["micro_precision"] = m.micro_precision;
      cj["micro_recall"] = m.micro_recall;
      cj["micro_f1"] = m.micro_f1;
      cj["degenerate"] = m.degenerate;
      for (const auto& [name, cls] : {std::pair<const char*, const ClassScores*>{"GTR", &m.gtr}, {"RT", &m.rt}})
        cj["per_class"][name] = {{"precision", cls->precision}, {"recall", cls->recall}, {"f1", cls->f1},
                                 {"support", cls->support}};
      cj["confusion"] = {{"gt_GTR", {{"pred_GTR", m.confusion[0][0]}, {"pred_RT", m.confusion[0][1]}}},
                         {"gt_RT", {{"pred_GTR", m.confusion[1][0]}, {"pred_RT", m.confusion[1][1]}}}};
    }
    j["classification"].push_back(cj);
  }
  j["quartiles"] = json::array();
  for (const auto& q : s.quartiles) {
    json qj{{"model", q.model}};
    if (!q.error.empty()) {
      qj["error"] = q.error;
    } else {
      qj["edges"] = q.edges;
      for (const auto& b : q.bins)
        qj["bins"].push_back({{"lower", b.lower}, {"upper", b.upper}, {"dice", b.dice}, {"mean", opt(b.mean)},
                              {"median", opt(b.median)}});
    }
    j["quartiles"].push_back(qj);
  }
  j["volumes"] = json::array();
  for (const auto& v : s.volumes) {
    json vj{{"center", v.center}, {"n", v.n}, {"gtr", v.gtr}, {"rt", v.rt}};
    for (const auto& [r, m] : v.volumes)
      vj[std::string(region_name(r))] = {{"median", m.median}, {"q1", m.q1}, {"q3", m.q3}};
    j["volumes"].push_back(vj);
  }
  j["brats"] = json::array();
  for (const auto& b : s.brats) {
    json bj{{"model", b.model}};
    for (const auto& [key, d] : b.values)
      bj["values"][std::string(cohort::metric_name(key.first))][std::string(region_name(key.second))] = {
          {"mean", d.mean}, {"sd", d.sd}, {"median", d.median}, {"q1", d.q1}, {"q3", d.q3}, {"n", d.n}};
    j["brats"].push_back(bj);
  }
  j["warnings"] = s.warnings;
  return j;
}

/// Flat summary CSV, one line per cell. Not-applicable or empty cells leave the
/// numeric fields blank.
inline std::string to_csv(const cohort::CohortSummary& s) {
  std::ostringstream os;
  os << "model,table,subgroup,region,metric,applicable,n_cases,n,n_excluded,mean,ci_low,ci_high,median,q1,q3\n";
  const auto f = [](double v) { return cohort::detail::fmt_exact(v); };
  for (const auto& c : s.cells) {
    os << cohort::detail::csv_field(c.model) << "," << c.table << "," << subgroup_name(c.subgroup) << ","
       << region_name(c.region) << "," << cohort::metric_name(c.metric) << "," << (c.applicable ? 1 : 0) << ","
       << c.n_cases << "," << (c.mean_ci ? c.mean_ci->n : 0) << "," << c.n_excluded << ",";
    if (c.mean_ci) os << f(c.mean_ci->mean) << "," << f(c.mean_ci->lo) << "," << f(c.mean_ci->hi) << ",";
    else os << ",,,";
    if (c.median_iqr) os << f(c.median_iqr->median) << "," << f(c.median_iqr->q1) << "," << f(c.median_iqr->q3);
    else os << ",,";
    os << "\n";
  }
  return os.str();
}

}  // namespace postop::report
