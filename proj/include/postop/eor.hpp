#pragma once

// Extent-of-resection classification (gross total resection vs residual
// tumor) and the derived cohort subgroups.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "postop/error.hpp"

namespace postop {

enum class EorClass { GTR, RT };

constexpr std::string_view eor_name(EorClass c) { return c == EorClass::GTR ? "GTR" : "RT"; }

inline EorClass parse_eor(std::string_view s) {
  if (s == "GTR") return EorClass::GTR;
  if (s == "RT") return EorClass::RT;
  throw Error(ErrorCode::InvalidConfig, "unknown EOR class '" + std::string(s) + "'");
}

/// How the predicted segmentation is judged to contain residual tumor when
/// deciding the True-Positive subgroup.
enum class PredictedRtRule { Threshold, Nonzero };

struct EorConfig {
  double threshold_cm3 = 0.1;
  PredictedRtRule predicted_rule = PredictedRtRule::Threshold;

  void validate() const {
    if (!(threshold_cm3 > 0.0)) throw Error(ErrorCode::InvalidConfig, "threshold_cm3 must be > 0");
  }
};

/// GTR iff the residual enhancing volume is strictly below the threshold.
inline EorClass classify_eor(double et_volume_cm3, const EorConfig& cfg = {}) {
  cfg.validate();
  if (et_volume_cm3 < 0.0) throw Error(ErrorCode::NegativeVolume, std::to_string(et_volume_cm3));
  return et_volume_cm3 < cfg.threshold_cm3 ? EorClass::GTR : EorClass::RT;
}

/// Class of a predicted volume under the configured True-Positive rule.
inline EorClass classify_predicted(double et_volume_cm3, const EorConfig& cfg = {}) {
  if (cfg.predicted_rule == PredictedRtRule::Nonzero) {
    if (et_volume_cm3 < 0.0) throw Error(ErrorCode::NegativeVolume, std::to_string(et_volume_cm3));
    return et_volume_cm3 > 0.0 ? EorClass::RT : EorClass::GTR;
  }
  return classify_eor(et_volume_cm3, cfg);
}

enum class Subgroup { All, Positive, TruePositive };

inline constexpr std::array<Subgroup, 3> kAllSubgroups{Subgroup::All, Subgroup::Positive,
                                                       Subgroup::TruePositive};

constexpr std::string_view subgroup_name(Subgroup s) {
  switch (s) {
    case Subgroup::All: return "All";
    case Subgroup::Positive: return "Positive";
    case Subgroup::TruePositive: return "TruePositive";
  }
  return "?";
}

struct SubgroupSet {
  bool all = true, positive = false, true_positive = false;

  bool contains(Subgroup s) const {
    switch (s) {
      case Subgroup::All: return all;
      case Subgroup::Positive: return positive;
      case Subgroup::TruePositive: return true_positive;
    }
    return false;
  }
  bool operator==(const SubgroupSet&) const = default;
};

inline SubgroupSet assign_subgroups(EorClass gt, EorClass pred) {
  SubgroupSet s;
  s.positive = gt == EorClass::RT;
  s.true_positive = s.positive && pred == EorClass::RT;
  return s;
}

struct ClassScores {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;  // ground-truth count
};

struct ClassificationMetrics {
  // Macro averages over {GTR, RT}.
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  // Micro averages; all equal accuracy for a single-label two-class problem.
  double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
  ClassScores gtr, rt;
  /// confusion[gt][pred], index 0 = GTR, 1 = RT.
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::size_t n = 0;
  /// Set when a class has an empty precision or recall denominator.
  bool degenerate = false;
};

inline ClassificationMetrics classification_metrics(std::span<const std::pair<EorClass, EorClass>> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no (gt, pred) pairs");
  ClassificationMetrics m;
  const auto idx = [](EorClass c) { return c == EorClass::GTR ? 0 : 1; };
  for (const auto& [g, p] : pairs) ++m.confusion[idx(g)][idx(p)];
  m.n = pairs.size();
  const auto scores = [&](int c) {
    ClassScores s;
    const std::size_t tp = m.confusion[c][c];
    const std::size_t pred_c = m.confusion[0][c] + m.confusion[1][c];
    const std::size_t gt_c = m.confusion[c][0] + m.confusion[c][1];
    s.support = gt_c;
    if (pred_c == 0 || gt_c == 0) m.degenerate = true;
    s.precision = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    s.recall = gt_c ? static_cast<double>(tp) / static_cast<double>(gt_c) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
  };
  m.gtr = scores(0);
  m.rt = scores(1);
  m.precision = (m.gtr.precision + m.rt.precision) / 2;
  m.recall = (m.gtr.recall + m.rt.recall) / 2;
  m.f1 = (m.gtr.f1 + m.rt.f1) / 2;
  const std::size_t correct = m.confusion[0][0] + m.confusion[1][1];
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  m.micro_precision = m.micro_recall = m.micro_f1 = m.accuracy;
  return m;
}

inline ClassificationMetrics classification_metrics(const std::vector<std::pair<EorClass, EorClass>>& pairs) {
  return classification_metrics(std::span<const std::pair<EorClass, EorClass>>(pairs));
}

}  // namespace postop
