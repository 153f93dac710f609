#pragma once

// Batch workflows shared by the command-line tool: preprocessing a case to
// disk, generating a phantom cohort (optionally segmented by the baseline),
// and tabulating extent of resection.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "postop/cohort.hpp"
#include "postop/eor.hpp"
#include "postop/nifti.hpp"
#include "postop/phantom.hpp"
#include "postop/preprocess.hpp"

namespace postop::workflow {

namespace fs = std::filesystem;
using Logger = std::function<void(const std::string&)>;

/// Runs fn(0..n-1) on up to `jobs` threads. Every index runs; the exception of
/// the lowest failing index is rethrown afterwards.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next >= n) return;
            i = next++;
          }
          guarded(i);
        }
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---- transforms ----

inline void write_transform(const fs::path& p, const AffineTransform& t) {
  std::ofstream os(p);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  const auto& m = t.matrix();
  char buf[64];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      os << (c ? " " : "") << buf;
    }
    os << "\n";
  }
}

inline AffineTransform read_transform(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (!(is >> m(r, c))) throw Error(ErrorCode::InvalidConfig, p.string() + ": expected 16 numbers");
  return AffineTransform(m);
}

// ---- preprocessing ----

inline nlohmann::json params_json(const AffineTransform& t) {
  const auto p = t.to_params();
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i < AffineParams::kCount; ++i) j.push_back(p[i]);
  return j;
}

inline nlohmann::json pipeline_report(const PipelineOutput& out) {
  nlohmann::json j;
  j["mask"] = {{"provenance", out.mask.provenance == MaskProvenance::External ? "external" : "fallback"},
               {"voxels", count_nonzero(out.mask.mask)}};
  for (const auto& [s, g] : out.normalized) {
    const auto m = masked_moments(g, out.mask.mask);
    nlohmann::json sj{{"masked_mean", m.mean}, {"masked_sd", m.sd}, {"to_atlas", params_json(out.to_atlas.at(s))}};
    if (const auto it = out.registrations.find(s); it != out.registrations.end())
      sj["registration"] = {{"metric", it->second.metric},
                            {"improved", it->second.improved},
                            {"evaluations", it->second.evaluations}};
    j["sequences"][std::string(sequence_name(s))] = sj;
  }
  j["warnings"] = out.warnings;
  return j;
}

inline void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream os(p);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  os << j.dump(2) << "\n";
}

/// Writes <seq>.nii.gz (float32), brain_mask.nii.gz, transforms/<seq>_to_atlas.txt
/// and preprocess.json under `dir`.
inline void write_pipeline_outputs(const fs::path& dir, const PipelineOutput& out) {
  fs::create_directories(dir / "transforms");
  for (const auto& [s, g] : out.normalized) {
    const std::string name(sequence_name(s));
    nifti::write_grid_file(dir / (name + ".nii.gz"), g, nifti::kFloat32);
    write_transform(dir / "transforms" / (name + "_to_atlas.txt"), out.to_atlas.at(s));
  }
  nifti::write_label_file(dir / "brain_mask.nii.gz", out.mask.mask);
  write_json(dir / "preprocess.json", pipeline_report(out));
}

/// Looks for <seq>.nii.gz or <seq>.nii in a case directory.
inline std::map<Sequence, fs::path> find_case_sequences(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  std::map<Sequence, fs::path> out;
  for (Sequence s : kAllSequences)
    for (const char* ext : {".nii.gz", ".nii"}) {
      const fs::path p = dir / (std::string(sequence_name(s)) + ext);
      if (fs::exists(p)) {
        out[s] = p;
        break;
      }
    }
  return out;
}

// ---- phantom cohorts ----

enum class BaselineMode {
  /// Full preprocessing to the atlas grid, then segmentation.
  Pipeline,
  /// Skull strip and z-score on the native grid; needs unmisaligned sequences.
  Native,
};

inline PipelineConfig phantom_pipeline_config() {
  PipelineConfig c;
  // Phantom sequences differ from the atlas by rigid motion only, and a
  // 12-parameter fit is not identifiable there.
  c.registration.dof = Dof::Rigid;
  return c;
}

struct PhantomRunConfig {
  phantom::CohortSpec cohort;
  bool write_sequences = true;
  bool baseline = false;
  BaselineMode mode = BaselineMode::Pipeline;
  PipelineConfig pipeline = phantom_pipeline_config();
  phantom::BaselineConfig segmenter;
  unsigned jobs = 1;
  Logger log;
};

struct PhantomCaseReport {
  phantom::CohortCaseInfo info;
  double gt_et_cm3 = 0;
  std::optional<double> pred_et_cm3;
  /// Grid the baseline segmented on.
  Geometry segmentation_grid;
  std::map<Sequence, MaskedMoments> moments;
  std::vector<std::string> warnings;
};

struct PhantomRunResult {
  cohort::Manifest manifest;
  std::vector<PhantomCaseReport> cases;
};

inline constexpr const char* kBaselineModel = "baseline";

inline nlohmann::json plan_json(const std::vector<PhantomCaseReport>& cases) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cases) {
    nlohmann::json cj{{"case_id", c.info.case_id},
                      {"center", c.info.center},
                      {"timepoint", c.info.timepoint},
                      {"gt_class", c.info.gt_gtr ? "GTR" : "RT"},
                      {"gt_et_cm3", c.gt_et_cm3},
                      {"seed", c.info.seed},
                      {"spec", phantom::to_json(c.info.spec)}};
    if (c.pred_et_cm3) cj["pred_et_cm3"] = *c.pred_et_cm3;
    j.push_back(cj);
  }
  return j;
}

/// Layout under `out`:
///   atlas.nii.gz                         (pipeline mode or when writing sequences)
///   cases/<id>/{t1,t1ce,t2,flair}.nii.gz (when writing sequences)
///   cases/<id>/gt.nii.gz
///   cases/<id>/preprocess.json           (baseline, pipeline mode)
///   predictions/baseline/<id>.nii.gz     (baseline)
///   cohort.json, manifest.json
inline PhantomRunResult run_phantom_cohort(const PhantomRunConfig& cfg, const fs::path& out) {
  const auto& cs = cfg.cohort;
  const auto plan = phantom::plan_cohort(cs.n, cs.base, cs.variation, cs.seed);
  if (cfg.baseline && cfg.mode == BaselineMode::Native &&
      (cs.variation.max_translation_mm != 0 || cs.variation.max_rotation_deg != 0))
    throw Error(ErrorCode::InvalidConfig, "native baseline needs max_translation_mm = max_rotation_deg = 0");
  if (cfg.baseline && cfg.mode == BaselineMode::Pipeline) cfg.pipeline.registration.validate();

  fs::create_directories(out / "cases");
  std::optional<AtlasGrid> atlas;
  const bool pipeline = cfg.baseline && cfg.mode == BaselineMode::Pipeline;
  if (pipeline || cfg.write_sequences) {
    auto vol = phantom::synthetic_atlas_volume(cs.base);
    nifti::write_grid_file(out / "atlas.nii.gz", vol, nifti::kFloat32);
    if (pipeline) atlas.emplace(std::move(vol));
  }
  if (cfg.baseline) fs::create_directories(out / "predictions" / kBaselineModel);

  PhantomRunResult res;
  res.cases.resize(plan.size());
  parallel_for(plan.size(), cfg.jobs, [&](std::size_t i) {
    const auto& info = plan[i];
    PhantomCaseReport& rep = res.cases[i];
    rep.info = info;
    const auto pc = phantom::generate_case(info.spec);
    const fs::path dir = out / "cases" / info.case_id;
    fs::create_directories(dir);
    if (cfg.write_sequences)
      for (const auto& [s, g] : pc.sequences)
        nifti::write_grid_file(dir / (std::string(sequence_name(s)) + ".nii.gz"), g, nifti::kFloat32);
    nifti::write_label_file(dir / "gt.nii.gz", pc.gt);
    rep.gt_et_cm3 = volume_cm3(extract_mask(pc.gt, Region::ET));

    if (cfg.baseline) {
      SequenceSet z;
      Mask brain;
      if (cfg.mode == BaselineMode::Pipeline) {
        PipelineInput in;
        in.sequences = pc.sequences;
        const auto po = run_pipeline(in, *atlas, cfg.pipeline);
        write_json(dir / "preprocess.json", pipeline_report(po));
        z = po.normalized;
        brain = po.mask.mask;
        rep.warnings = po.warnings;
      } else {
        brain = skull_strip_fallback(pc.sequences.at(Sequence::T1)).mask;
        for (const auto& [s, g] : pc.sequences) z[s] = zscore_normalize(g, brain);
      }
      for (const auto& [s, g] : z) rep.moments[s] = masked_moments(g, brain);
      rep.segmentation_grid = brain.geometry;
      const auto seg = phantom::baseline_segment(z, brain, cfg.segmenter);
      rep.pred_et_cm3 = volume_cm3(extract_mask(seg, Region::ET));
      nifti::write_label_file(out / "predictions" / kBaselineModel / (info.case_id + ".nii.gz"), seg);
    }
    if (cfg.log) cfg.log("generated " + info.case_id);
  });

  auto& m = res.manifest;
  for (const auto& rep : res.cases) {
    cohort::CaseEntry c;
    c.case_id = rep.info.case_id;
    c.center = rep.info.center;
    c.timepoint = rep.info.timepoint;
    const fs::path dir = out / "cases" / c.case_id;
    c.gt = dir / "gt.nii.gz";
    if (cfg.write_sequences)
      for (Sequence s : kAllSequences) {
        const std::string name(sequence_name(s));
        c.sequences[name] = dir / (name + ".nii.gz");
      }
    if (cfg.baseline) c.predictions[kBaselineModel] = out / "predictions" / kBaselineModel / (c.case_id + ".nii.gz");
    m.cases.push_back(std::move(c));
  }
  write_json(out / "cohort.json", plan_json(res.cases));
  cohort::save_manifest(m, out / "manifest.json");
  return res;
}

// ---- extent of resection ----

struct EorRow {
  std::string case_id, center, timepoint, model;
  double gt_et_cm3 = 0, pred_et_cm3 = 0;
  EorClass gt = EorClass::GTR, pred = EorClass::GTR;
};

struct EorTable {
  std::vector<EorRow> rows;
  std::vector<cohort::Failure> failures;
  std::vector<std::string> models;
};

inline void classify_rows(EorTable& t, const EorConfig& eor) {
  for (auto& r : t.rows) {
    r.gt = classify_eor(r.gt_et_cm3, eor);
    r.pred = classify_eor(r.pred_et_cm3, eor);
    if (std::find(t.models.begin(), t.models.end(), r.model) == t.models.end()) t.models.push_back(r.model);
  }
}

/// ET volumes from label files listed in a manifest.
inline EorTable eor_from_manifest(const cohort::Manifest& m, const EorConfig& eor, unsigned jobs = 1) {
  eor.validate();
  struct Slot {
    std::vector<EorRow> rows;
    std::vector<cohort::Failure> failures;
  };
  std::vector<Slot> slots(m.cases.size());
  parallel_for(m.cases.size(), jobs, [&](std::size_t ci) {
    const auto& c = m.cases[ci];
    double gt_cm3 = 0;
    try {
      gt_cm3 = volume_cm3(extract_mask(nifti::read_label_file(c.gt), Region::ET));
    } catch (const Error& e) {
      slots[ci].failures.push_back({c.case_id, "", e.what()});
      return;
    }
    for (const auto& [model, path] : c.predictions) {
      try {
        const auto pred = cohort::harmonize(cohort::to_raw_labels(nifti::read_file_grid(path)), m.scheme_for(model));
        slots[ci].rows.push_back(
            {c.case_id, c.center, c.timepoint, model, gt_cm3, volume_cm3(extract_mask(pred, Region::ET))});
      } catch (const Error& e) {
        slots[ci].failures.push_back({c.case_id, model, e.what()});
      }
    }
  });
  EorTable t;
  for (auto& s : slots) {
    t.rows.insert(t.rows.end(), s.rows.begin(), s.rows.end());
    t.failures.insert(t.failures.end(), s.failures.begin(), s.failures.end());
  }
  classify_rows(t, eor);
  return t;
}

/// ET volumes from an evaluate metrics table.
inline EorTable eor_from_metrics(const std::vector<cohort::MetricRow>& rows, const EorConfig& eor) {
  eor.validate();
  EorTable t;
  for (const auto& r : rows)
    if (r.record.region == Region::ET)
      t.rows.push_back({r.case_id, r.center, r.timepoint, r.model, r.record.gt_volume_cm3, r.record.pred_volume_cm3});
  classify_rows(t, eor);
  return t;
}

inline std::map<std::string, ClassificationMetrics> classification_by_model(const EorTable& t) {
  std::map<std::string, ClassificationMetrics> out;
  for (const auto& model : t.models) {
    std::vector<std::pair<EorClass, EorClass>> pairs;
    for (const auto& r : t.rows)
      if (r.model == model) pairs.emplace_back(r.gt, r.pred);
    out[model] = classification_metrics(pairs);
  }
  return out;
}

inline void write_eor_csv(std::ostream& os, const EorTable& t) {
  using cohort::detail::csv_field;
  using cohort::detail::fmt_exact;
  os << "case_id,center,timepoint,model,gt_et_cm3,pred_et_cm3,gt_class,pred_class\n";
  for (const auto& r : t.rows)
    os << csv_field(r.case_id) << "," << csv_field(r.center) << "," << csv_field(r.timepoint) << ","
       << csv_field(r.model) << "," << fmt_exact(r.gt_et_cm3) << "," << fmt_exact(r.pred_et_cm3) << ","
       << eor_name(r.gt) << "," << eor_name(r.pred) << "\n";
}

}  // namespace postop::workflow
