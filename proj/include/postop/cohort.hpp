#pragma once

// Cohort assembly: model label schemes, the case manifest, per-case metric
// rows (the CSV cache) and aggregate summaries.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "postop/eor.hpp"
#include "postop/error.hpp"
#include "postop/metrics.hpp"
#include "postop/nifti.hpp"
#include "postop/stats.hpp"
#include "postop/volume.hpp"

namespace postop::cohort {

// ---- label harmonization ----

using RawLabels = Volume<std::int32_t>;

/// Maps a model's output labels onto the canonical {0,1,2,3} scheme.
struct LabelScheme {
  static constexpr int kDrop = -1;

  std::string model;
  /// source label -> canonical label, or kDrop (becomes background).
  std::map<int, int> mapping;
  /// Canonical labels this model never produces; their cells are not applicable.
  std::set<Region> absent;

  static LabelScheme identity(std::string model = "identity") {
    LabelScheme s;
    s.model = std::move(model);
    for (int l = 0; l <= kMaxLabel; ++l) s.mapping[l] = l;
    return s;
  }

  void validate() const {
    for (const auto& [src, dst] : mapping)
      if (dst != kDrop && (dst < 0 || dst > kMaxLabel))
        throw Error(ErrorCode::InvalidConfig,
                    "scheme " + model + " maps " + std::to_string(src) + " to invalid label " + std::to_string(dst));
  }

  bool applicable(Region r) const { return !absent.count(r); }
};

inline RawLabels to_raw_labels(const VoxelGrid& g) {
  RawLabels out(g.geometry, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g.data[i];
    const double r = std::nearbyint(v);
    if (!std::isfinite(v) || std::abs(v - r) > nifti::kLabelTolerance)
      throw Error(ErrorCode::NonIntegerLabels, "voxel " + std::to_string(i) + " = " + std::to_string(v));
    out.data[i] = static_cast<std::int32_t>(r);
  }
  return out;
}

inline RawLabels to_raw_labels(const LabelVolume& lv) {
  RawLabels out(lv.geometry, 0);
  std::copy(lv.data.begin(), lv.data.end(), out.data.begin());
  return out;
}

inline LabelVolume harmonize(const RawLabels& pred, const LabelScheme& scheme) {
  scheme.validate();
  LabelVolume out(pred.geometry, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto it = scheme.mapping.find(pred.data[i]);
    if (it == scheme.mapping.end()) {
      if (pred.data[i] == 0) continue;  // background needs no entry
      throw Error(ErrorCode::UnmappedLabel, std::to_string(pred.data[i]));
    }
    out.data[i] = it->second == LabelScheme::kDrop ? 0 : static_cast<std::uint8_t>(it->second);
  }
  return out;
}

inline LabelVolume harmonize(const LabelVolume& pred, const LabelScheme& scheme) {
  return harmonize(to_raw_labels(pred), scheme);
}

// ---- manifest ----

struct CaseEntry {
  std::string case_id;
  std::string center;
  /// preop, EPS (within 72 h of surgery), LPS or followup.
  std::string timepoint = "EPS";
  std::filesystem::path gt;
  std::map<std::string, std::filesystem::path> predictions;
  std::map<std::string, std::filesystem::path> sequences;
};

struct Manifest {
  std::map<std::string, LabelScheme> schemes;
  std::vector<CaseEntry> cases;

  const LabelScheme& scheme_for(const std::string& model) const {
    static const LabelScheme kIdentity = LabelScheme::identity();
    const auto it = schemes.find(model);
    return it == schemes.end() ? kIdentity : it->second;
  }

  /// Models in first-appearance order.
  std::vector<std::string> models() const {
    std::vector<std::string> out;
    for (const auto& c : cases)
      for (const auto& [m, p] : c.predictions)
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    return out;
  }
};

inline const std::set<std::string>& known_timepoints() {
  static const std::set<std::string> k{"preop", "EPS", "LPS", "followup"};
  return k;
}

/// Manifest JSON:
///   { "schemes": { "<model>": { "mapping": {"1": 1, "4": -1}, "absent": ["CAV"] } },
///     "cases": [ { "case_id", "center", "timepoint", "gt",
///                  "predictions": {"<model>": path}, "sequences": {"t1ce": path} } ] }
/// Relative paths resolve against `base_dir`.
inline Manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  Manifest m;
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  try {
    if (j.contains("schemes")) {
      for (const auto& [model, sj] : j["schemes"].items()) {
        LabelScheme s;
        s.model = model;
        for (const auto& [src, dst] : sj.at("mapping").items()) {
          if (dst.is_string()) {
            if (dst.get<std::string>() != "drop")
              throw Error(ErrorCode::InvalidConfig, "mapping target must be 0..3 or \"drop\"");
            s.mapping[std::stoi(src)] = LabelScheme::kDrop;
          } else {
            s.mapping[std::stoi(src)] = dst.get<int>();
          }
        }
        if (sj.contains("absent"))
          for (const auto& a : sj["absent"]) s.absent.insert(parse_region(a.get<std::string>()));
        s.validate();
        m.schemes[model] = std::move(s);
      }
    }
    std::set<std::string> ids;
    for (const auto& cj : j.at("cases")) {
      CaseEntry c;
      c.case_id = cj.at("case_id").get<std::string>();
      if (!ids.insert(c.case_id).second) throw Error(ErrorCode::InvalidConfig, "duplicate case_id " + c.case_id);
      c.center = cj.value("center", "");
      c.timepoint = cj.value("timepoint", "EPS");
      if (!known_timepoints().count(c.timepoint))
        throw Error(ErrorCode::InvalidConfig, "unknown timepoint " + c.timepoint);
      if (cj.contains("gt")) c.gt = resolve(cj["gt"].get<std::string>());
      if (cj.contains("predictions"))
        for (const auto& [model, p] : cj["predictions"].items()) c.predictions[model] = resolve(p.get<std::string>());
      if (cj.contains("sequences"))
        for (const auto& [seq, p] : cj["sequences"].items()) c.sequences[seq] = resolve(p.get<std::string>());
      m.cases.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("manifest: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::InvalidConfig, "manifest: scheme source labels must be integers");
  }
  return m;
}

inline nlohmann::json manifest_to_json(const Manifest& m, const std::filesystem::path& base_dir = {}) {
  const auto rel = [&](const std::filesystem::path& p) {
    return base_dir.empty() ? p.generic_string() : p.lexically_relative(base_dir).generic_string();
  };
  nlohmann::json j;
  j["schemes"] = nlohmann::json::object();
  for (const auto& [model, s] : m.schemes) {
    nlohmann::json sj;
    sj["mapping"] = nlohmann::json::object();
    for (const auto& [src, dst] : s.mapping) {
      if (dst == LabelScheme::kDrop) sj["mapping"][std::to_string(src)] = "drop";
      else sj["mapping"][std::to_string(src)] = dst;
    }
    sj["absent"] = nlohmann::json::array();
    for (Region r : s.absent) sj["absent"].push_back(std::string(region_name(r)));
    j["schemes"][model] = sj;
  }
  j["cases"] = nlohmann::json::array();
  for (const auto& c : m.cases) {
    nlohmann::json cj{{"case_id", c.case_id}, {"center", c.center}, {"timepoint", c.timepoint}};
    if (!c.gt.empty()) cj["gt"] = rel(c.gt);
    cj["predictions"] = nlohmann::json::object();
    for (const auto& [model, p] : c.predictions) cj["predictions"][model] = rel(p);
    if (!c.sequences.empty()) {
      cj["sequences"] = nlohmann::json::object();
      for (const auto& [s, p] : c.sequences) cj["sequences"][s] = rel(p);
    }
    j["cases"].push_back(cj);
  }
  return j;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("manifest: ") + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << manifest_to_json(m, path.parent_path()).dump(2) << "\n";
}

// ---- per-case rows ----

/// One row of the metrics cache: (case, model, region).
struct MetricRow {
  std::string case_id, center, timepoint, model;
  MetricRecord record;
  bool applicable = true;
};

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> k{"case_id",     "center",      "timepoint",     "model",
                                          "region",      "applicable",  "dice",          "jaccard",
                                          "vsi",         "sensitivity", "specificity",   "hausdorff95",
                                          "gt_volume_cm3", "pred_volume_cm3"};
  return k;
}

namespace detail {

inline std::string fmt_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_exact(*v) : ""; }

inline std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace detail

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : rows) {
    const auto& m = r.record;
    os << detail::csv_field(r.case_id) << "," << detail::csv_field(r.center) << "," << r.timepoint << ","
       << detail::csv_field(r.model) << "," << region_name(m.region) << "," << (r.applicable ? 1 : 0) << ","
       << detail::fmt_opt(m.dice) << "," << detail::fmt_opt(m.jaccard) << "," << detail::fmt_opt(m.vsi) << ","
       << detail::fmt_opt(m.sensitivity) << "," << detail::fmt_opt(m.specificity) << ","
       << detail::fmt_opt(m.hausdorff95) << "," << detail::fmt_exact(m.gt_volume_cm3) << ","
       << detail::fmt_exact(m.pred_volume_cm3) << "\n";
  }
}

inline std::vector<MetricRow> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::InvalidConfig, "metrics CSV is empty");
  if (detail::split_csv_line(line) != csv_columns())
    throw Error(ErrorCode::InvalidConfig, "metrics CSV header does not match the expected columns");
  std::vector<MetricRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != csv_columns().size())
      throw Error(ErrorCode::InvalidConfig, "metrics CSV line " + std::to_string(lineno) + " has wrong field count");
    try {
      MetricRow r;
      r.case_id = f[0];
      r.center = f[1];
      r.timepoint = f[2];
      r.model = f[3];
      r.record.region = parse_region(f[4]);
      r.applicable = f[5] == "1";
      r.record.dice = detail::parse_opt(f[6]);
      r.record.jaccard = detail::parse_opt(f[7]);
      r.record.vsi = detail::parse_opt(f[8]);
      r.record.sensitivity = detail::parse_opt(f[9]);
      r.record.specificity = detail::parse_opt(f[10]);
      r.record.hausdorff95 = detail::parse_opt(f[11]);
      r.record.gt_volume_cm3 = std::stod(f[12]);
      r.record.pred_volume_cm3 = std::stod(f[13]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidConfig, "metrics CSV line " + std::to_string(lineno) + " is malformed");
    }
  }
  return rows;
}

// ---- cohort evaluation ----

struct EvaluateConfig {
  EmptyPolicy empty_policy = EmptyPolicy::Undefined;
  bool with_hausdorff = true;
  unsigned jobs = 1;
};

struct Failure {
  std::string case_id, model, error;
};

struct EvaluationResult {
  /// Manifest order: cases, then models in case order, then regions.
  std::vector<MetricRow> rows;
  std::vector<Failure> failures;
};

/// Metric rows for one (case, model) pair; `gt` and `pred` are canonical.
inline std::vector<MetricRow> evaluate_pair(const CaseEntry& c, const std::string& model, const LabelVolume& gt,
                                            const LabelVolume& pred, const LabelScheme& scheme,
                                            const EvaluateConfig& cfg) {
  EvaluateOptions opt{cfg.empty_policy, cfg.with_hausdorff};
  std::vector<MetricRow> out;
  for (Region r : kAllRegions) {
    MetricRow row;
    row.case_id = c.case_id;
    row.center = c.center;
    row.timepoint = c.timepoint;
    row.model = model;
    row.record = evaluate_region(gt, pred, r, opt);
    row.applicable = scheme.applicable(r);
    out.push_back(std::move(row));
  }
  return out;
}

/// Evaluates every (case, model) in the manifest. A case whose files fail to
/// load is reported under `failures`; the rest are still evaluated.
inline EvaluationResult evaluate_manifest(const Manifest& m, const EvaluateConfig& cfg = {}) {
  struct Slot {
    std::vector<MetricRow> rows;
    std::vector<Failure> failures;
  };
  std::vector<Slot> slots(m.cases.size());
  const auto work = [&](std::size_t ci) {
    const CaseEntry& c = m.cases[ci];
    Slot& s = slots[ci];
    LabelVolume gt;
    try {
      if (c.gt.empty()) throw Error(ErrorCode::InvalidConfig, "no ground truth path");
      gt = nifti::read_label_file(c.gt);
    } catch (const std::exception& e) {
      s.failures.push_back({c.case_id, "", e.what()});
      return;
    }
    for (const auto& [model, path] : c.predictions) {
      try {
        const LabelScheme& scheme = m.scheme_for(model);
        const LabelVolume pred = harmonize(to_raw_labels(nifti::read_file_grid(path)), scheme);
        auto rows = evaluate_pair(c, model, gt, pred, scheme, cfg);
        s.rows.insert(s.rows.end(), rows.begin(), rows.end());
      } catch (const std::exception& e) {
        s.failures.push_back({c.case_id, model, e.what()});
      }
    }
  };
  const unsigned jobs = std::max(1u, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < slots.size(); ++i) work(i);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        while (true) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next >= slots.size()) return;
            i = next++;
          }
          work(i);
        }
      });
    for (auto& t : pool) t.join();
  }
  EvaluationResult res;
  for (auto& s : slots) {
    res.rows.insert(res.rows.end(), s.rows.begin(), s.rows.end());
    res.failures.insert(res.failures.end(), s.failures.begin(), s.failures.end());
  }
  return res;
}

// ---- aggregation ----

enum class Metric { Dice, Jaccard, Vsi, Sensitivity, Specificity, Hausdorff95 };

inline constexpr std::array<Metric, 3> kOverlapMetrics{Metric::Dice, Metric::Jaccard, Metric::Vsi};
inline constexpr std::array<Metric, 6> kAllMetrics{Metric::Dice,        Metric::Jaccard,     Metric::Vsi,
                                                   Metric::Sensitivity, Metric::Specificity, Metric::Hausdorff95};

constexpr std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::Dice: return "Dice";
    case Metric::Jaccard: return "JSC";
    case Metric::Vsi: return "VSI";
    case Metric::Sensitivity: return "Sensitivity";
    case Metric::Specificity: return "Specificity";
    case Metric::Hausdorff95: return "Hausdorff95";
  }
  return "?";
}

inline std::optional<double> metric_value(const MetricRecord& r, Metric m) {
  switch (m) {
    case Metric::Dice: return r.dice;
    case Metric::Jaccard: return r.jaccard;
    case Metric::Vsi: return r.vsi;
    case Metric::Sensitivity: return r.sensitivity;
    case Metric::Specificity: return r.specificity;
    case Metric::Hausdorff95: return r.hausdorff95;
  }
  return std::nullopt;
}

/// Timepoint filter for a report table: "" keeps every case.
struct TableFilter {
  std::string name;       // "All", "EPS", "LPS"
  std::string timepoint;  // "" = no filter
  bool keep(const MetricRow& r) const { return timepoint.empty() || r.timepoint == timepoint; }
};

inline std::vector<TableFilter> default_filters() { return {{"All", ""}, {"EPS", "EPS"}, {"LPS", "LPS"}}; }

struct SummaryConfig {
  stats::CiOptions ci;
  EorConfig eor;
  std::vector<TableFilter> filters = default_filters();
  /// Empty = every model present in the rows.
  std::vector<std::string> models;
};

struct Cell {
  std::string model, table;
  Region region = Region::ET;
  Metric metric = Metric::Dice;
  Subgroup subgroup = Subgroup::All;
  bool applicable = true;
  /// Cases in the subgroup.
  std::size_t n_cases = 0;
  /// Undefined values excluded from n.
  std::size_t n_excluded = 0;
  std::optional<stats::MeanCi> mean_ci;
  std::optional<stats::MedianIqr> median_iqr;
};

struct ClassificationBlock {
  std::string model, table;
  std::optional<ClassificationMetrics> metrics;
};

struct QuartileBin {
  double lower = 0, upper = 0;  // (lower, upper]; first bin includes its lower edge
  std::vector<double> dice;
  std::optional<double> mean, median;
};

struct QuartileBlock {
  std::string model;
  std::array<double, 3> edges{};
  std::array<QuartileBin, 4> bins{};
  std::string error;  // set when the block could not be built
};

struct VolumeRow {
  std::string center;  // "All centers" for the pooled row
  std::size_t n = 0, gtr = 0, rt = 0;
  std::map<Region, stats::MedianIqr> volumes;  // ET, ED, CAV over cases with nonzero volume
};

struct BratsBlock {
  std::string model;
  std::map<std::pair<Metric, Region>, stats::Describe> values;
};

struct CohortSummary {
  std::vector<std::string> models;
  std::vector<Cell> cells;
  std::vector<ClassificationBlock> classification;
  std::vector<QuartileBlock> quartiles;
  std::vector<VolumeRow> volumes;
  std::vector<BratsBlock> brats;
  std::vector<std::string> warnings;

  const Cell* find(const std::string& model, const std::string& table, Region r, Metric m, Subgroup s) const {
    for (const auto& c : cells)
      if (c.model == model && c.table == table && c.region == r && c.metric == m && c.subgroup == s) return &c;
    return nullptr;
  }
  const ClassificationBlock* find_classification(const std::string& model, const std::string& table) const {
    for (const auto& c : classification)
      if (c.model == model && c.table == table) return &c;
    return nullptr;
  }
};

/// Per (case, model): ground-truth and predicted EOR classes from the ET rows.
struct CaseClasses {
  std::string case_id, center, timepoint;
  EorClass gt = EorClass::GTR, pred = EorClass::GTR;
  double gt_et_cm3 = 0, pred_et_cm3 = 0;
  SubgroupSet subgroups;
};

inline std::map<std::pair<std::string, std::string>, CaseClasses> case_classes(const std::vector<MetricRow>& rows,
                                                                               const EorConfig& eor) {
  std::map<std::pair<std::string, std::string>, CaseClasses> out;
  for (const auto& r : rows) {
    if (r.record.region != Region::ET) continue;
    CaseClasses c;
    c.case_id = r.case_id;
    c.center = r.center;
    c.timepoint = r.timepoint;
    c.gt_et_cm3 = r.record.gt_volume_cm3;
    c.pred_et_cm3 = r.record.pred_volume_cm3;
    c.gt = classify_eor(c.gt_et_cm3, eor);
    c.pred = classify_eor(c.pred_et_cm3, eor);
    c.subgroups = assign_subgroups(c.gt, classify_predicted(c.pred_et_cm3, eor));
    out[{r.case_id, r.model}] = c;
  }
  return out;
}

/// Bins Positive-case Dice values by ground-truth ET volume quartiles.
/// Edges are the linear-interpolation Q1/Q2/Q3; a value equal to an edge goes
/// to the lower bin.
inline QuartileBlock quartile_groups(const std::vector<std::pair<double, double>>& volume_dice) {
  if (volume_dice.size() < 4)
    throw Error(ErrorCode::TooFewCases, "quartile grouping needs >= 4 positive cases, got " +
                                            std::to_string(volume_dice.size()));
  std::vector<double> vols;
  for (const auto& [v, d] : volume_dice) vols.push_back(v);
  std::sort(vols.begin(), vols.end());
  QuartileBlock b;
  b.edges = {percentile_sorted(vols, 0.25), percentile_sorted(vols, 0.5), percentile_sorted(vols, 0.75)};
  const double lo = vols.front(), hi = vols.back();
  b.bins[0].lower = lo;
  b.bins[0].upper = b.edges[0];
  b.bins[1].lower = b.edges[0];
  b.bins[1].upper = b.edges[1];
  b.bins[2].lower = b.edges[1];
  b.bins[2].upper = b.edges[2];
  b.bins[3].lower = b.edges[2];
  b.bins[3].upper = hi;
  for (const auto& [v, d] : volume_dice) {
    std::size_t k = 3;
    for (std::size_t e = 0; e < 3; ++e)
      if (v <= b.edges[e]) {
        k = e;
        break;
      }
    b.bins[k].dice.push_back(d);
  }
  for (auto& bin : b.bins) {
    if (bin.dice.empty()) continue;
    bin.mean = stats::mean(bin.dice);
    bin.median = stats::median_iqr(bin.dice).median;
  }
  return b;
}

inline CohortSummary summarize(const std::vector<MetricRow>& rows, const SummaryConfig& cfg = {}) {
  cfg.eor.validate();
  CohortSummary s;
  if (!cfg.models.empty()) {
    s.models = cfg.models;
  } else {
    for (const auto& r : rows)
      if (std::find(s.models.begin(), s.models.end(), r.model) == s.models.end()) s.models.push_back(r.model);
  }
  const auto classes = case_classes(rows, cfg.eor);
  const auto in_subgroup = [&](const MetricRow& r, Subgroup g) {
    const auto it = classes.find({r.case_id, r.model});
    return it != classes.end() && it->second.subgroups.contains(g);
  };

  for (const auto& model : s.models) {
    for (const auto& table : cfg.filters) {
      for (Subgroup g : kAllSubgroups)
        for (Region region : kAllRegions)
          for (Metric metric : kAllMetrics) {
            Cell c;
            c.model = model;
            c.table = table.name;
            c.region = region;
            c.metric = metric;
            c.subgroup = g;
            std::vector<double> values;
            bool applicable = true;
            for (const auto& r : rows) {
              if (r.model != model || r.record.region != region || !table.keep(r) || !in_subgroup(r, g)) continue;
              applicable = applicable && r.applicable;
              ++c.n_cases;
              const auto v = metric_value(r.record, metric);
              if (v) values.push_back(*v);
              else ++c.n_excluded;
            }
            c.applicable = applicable;
            if (applicable && !values.empty()) {
              c.mean_ci = stats::mean_ci(values, cfg.ci);
              c.median_iqr = stats::median_iqr(values);
            }
            s.cells.push_back(std::move(c));
          }

      ClassificationBlock cb;
      cb.model = model;
      cb.table = table.name;
      std::vector<std::pair<EorClass, EorClass>> pairs;
      for (const auto& [key, cc] : classes)
        if (key.second == model && (table.timepoint.empty() || cc.timepoint == table.timepoint))
          pairs.emplace_back(cc.gt, cc.pred);
      // map order is by case id; classification metrics are order-free.
      if (!pairs.empty()) {
        cb.metrics = classification_metrics(pairs);
        if (cb.metrics->degenerate)
          s.warnings.push_back("classification for " + model + " / " + table.name +
                               ": a class has an empty denominator and contributes 0");
      }
      s.classification.push_back(std::move(cb));
    }

    // Volume quartiles over Positive cases of the whole cohort.
    std::vector<std::pair<double, double>> vd;
    for (const auto& r : rows) {
      if (r.model != model || r.record.region != Region::ET || !r.record.dice) continue;
      if (!in_subgroup(r, Subgroup::Positive)) continue;
      vd.emplace_back(r.record.gt_volume_cm3, *r.record.dice);
    }
    try {
      QuartileBlock qb = quartile_groups(vd);
      qb.model = model;
      s.quartiles.push_back(std::move(qb));
    } catch (const Error& e) {
      QuartileBlock qb;
      qb.model = model;
      qb.error = e.what();
      s.quartiles.push_back(std::move(qb));
    }

    BratsBlock bb;
    bb.model = model;
    for (Metric metric : {Metric::Dice, Metric::Sensitivity, Metric::Specificity, Metric::Hausdorff95})
      for (Region region : kBratsRegions) {
        std::vector<double> values;
        for (const auto& r : rows)
          if (r.model == model && r.record.region == region && r.applicable)
            if (const auto v = metric_value(r.record, metric)) values.push_back(*v);
        if (!values.empty()) bb.values[{metric, region}] = stats::describe(values);
      }
    s.brats.push_back(std::move(bb));
  }

  // Ground-truth volume table: one row per center plus the pooled row, taken
  // from the first model's rows (ground truth is shared by every model).
  if (!s.models.empty()) {
    const std::string& first = s.models.front();
    std::vector<std::string> centers;
    for (const auto& r : rows)
      if (r.model == first && std::find(centers.begin(), centers.end(), r.center) == centers.end())
        centers.push_back(r.center);
    const auto volume_row = [&](const std::string& label, const std::function<bool(const MetricRow&)>& keep) {
      VolumeRow vr;
      vr.center = label;
      std::map<Region, std::vector<double>> vols;
      for (const auto& r : rows) {
        if (r.model != first || !keep(r)) continue;
        if (r.record.region == Region::ET) {
          ++vr.n;
          (classify_eor(r.record.gt_volume_cm3, cfg.eor) == EorClass::GTR ? vr.gtr : vr.rt)++;
        }
        if ((r.record.region == Region::ET || r.record.region == Region::ED || r.record.region == Region::CAV) &&
            r.record.gt_volume_cm3 > 0)
          vols[r.record.region].push_back(r.record.gt_volume_cm3);
      }
      for (const auto& [region, v] : vols) vr.volumes[region] = stats::median_iqr(v);
      return vr;
    };
    s.volumes.push_back(volume_row("All centers", [](const MetricRow&) { return true; }));
    for (const auto& c : centers) s.volumes.push_back(volume_row(c, [&](const MetricRow& r) { return r.center == c; }));
  }
  return s;
}

}  // namespace postop::cohort
