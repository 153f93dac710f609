// postop: batch preprocessing, evaluation and reporting for postoperative
// glioma segmentations.
//
// Exit codes: 0 success, 1 internal error, 2 usage or input error,
// 3 partial failure (some cases failed, the rest were written).

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "postop/postop.hpp"
#include "postop/workflow.hpp"

namespace fs = std::filesystem;
using namespace postop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitPartial = 3;

bool g_quiet = false;

void log(const std::string& msg) {
  if (!g_quiet) std::cerr << "[postop] " << msg << "\n";
}

void report_error(std::string_view name, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", name}, {"message", message}, {"exit_code", code}}.dump() << "\n";
}

template <class E>
std::map<std::string, E> choices(std::initializer_list<std::pair<const char*, E>> items) {
  std::map<std::string, E> m;
  for (const auto& [k, v] : items) m[k] = v;
  return m;
}

// Enum option shown in help as "a|b" with the current value's name as default.
template <class E>
CLI::Option* add_choice(CLI::App* app, const std::string& flag, E& var, const std::map<std::string, E>& m,
                        const std::string& help) {
  std::string names, def;
  for (const auto& [k, v] : m) {
    names += (names.empty() ? "" : "|") + k;
    if (v == var) def = k;
  }
  return app->add_option(flag, var, help)
      ->transform(CLI::CheckedTransformer(m).description(""))
      ->type_name(names)
      ->default_str(def);
}

// ---- shared option groups ----

struct RegistrationFlags {
  RegistrationConfig cfg;
  Dof intra = Dof::Rigid;
  bool skip = false;

  void add(CLI::App* app) {
    const auto dofs = choices<Dof>({{"rigid", Dof::Rigid}, {"affine", Dof::Affine}, {"rigid+affine", Dof::RigidThenAffine}});
    add_choice(app, "--metric", cfg.metric, choices<Similarity>({{"ncc", Similarity::NCC}, {"mse", Similarity::MSE}}),
               "Registration similarity");
    add_choice(app, "--dof", cfg.dof, dofs, "Degrees of freedom for the t1ce -> atlas step");
    add_choice(app, "--intra-dof", intra, dofs, "Degrees of freedom for sequence -> t1ce steps");
    app->add_option("--pyramid-levels", cfg.pyramid_levels, "Pyramid levels (factors 2^l)")->capture_default_str();
    app->add_option("--max-iterations", cfg.max_iterations, "Sweeps per pyramid level")->capture_default_str();
    app->add_option("--initial-step", cfg.initial_step, "Initial step in mm at the finest level")->capture_default_str();
    app->add_option("--min-step", cfg.min_step, "Stop a level below this step (mm)")->capture_default_str();
    app->add_option("--step-decay", cfg.step_decay, "Step multiplier after an unsuccessful sweep")->capture_default_str();
    app->add_option("--tolerance", cfg.tolerance, "Minimum metric improvement to accept a move")->capture_default_str();
    app->add_option("--max-samples", cfg.max_samples, "Fixed-image samples per level")->capture_default_str();
    app->add_option("--smoothing", cfg.smoothing_sigma_mm, "Gaussian presmoothing sigma (mm), 0 disables")->capture_default_str();
    app->add_flag("--skip-registration", skip, "Inputs are already aligned to the atlas frame");
  }

  PipelineConfig pipeline() const {
    cfg.validate();
    PipelineConfig p;
    p.registration = cfg;
    p.intra_subject_dof = intra;
    p.skip_registration = skip;
    return p;
  }
};

struct EorFlags {
  EorConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--threshold", cfg.threshold_cm3, "Residual ET volume (cm3) at or above which a case is RT")
        ->capture_default_str();
    add_choice(app, "--tp-rule", cfg.predicted_rule,
               choices<PredictedRtRule>({{"threshold", PredictedRtRule::Threshold}, {"nonzero", PredictedRtRule::Nonzero}}),
               "Predicted-RT rule for the True-Positive subgroup");
  }
};

struct StatsFlags {
  stats::CiOptions ci;
  std::vector<std::string> models;
  void add(CLI::App* app) {
    add_choice(app, "--ci", ci.method,
               choices<stats::CiMethod>({{"bootstrap", stats::CiMethod::Bootstrap}, {"t", stats::CiMethod::T}}),
               "Confidence interval method");
    app->add_option("--confidence", ci.confidence, "Confidence level")->check(CLI::Range(0.5, 0.999))->capture_default_str();
    app->add_option("--resamples", ci.resamples, "Bootstrap resamples")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--seed", ci.seed, "Seed for all randomness (bootstrap)")->capture_default_str();
    app->add_option("--models", models, "Models to report, in column order (default: order of appearance)")
        ->delimiter(',');
  }
};

// ---- output helpers ----

void ensure_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw Error(ErrorCode::IoError, "cannot create output directory " + out.string());
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  os << s;
}

nlohmann::json failures_json(const std::vector<cohort::Failure>& fs_) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : fs_) j.push_back({{"case_id", f.case_id}, {"model", f.model}, {"error", f.error}});
  return j;
}

int finish_with_failures(const std::vector<cohort::Failure>& failures) {
  if (failures.empty()) return kExitOk;
  for (const auto& f : failures)
    log("FAILED " + f.case_id + (f.model.empty() ? "" : " [" + f.model + "]") + ": " + f.error);
  report_error("PartialFailure", std::to_string(failures.size()) + " case/model pair(s) failed; see failures.json",
               kExitPartial);
  return kExitPartial;
}

void write_summary(const fs::path& out, const std::vector<cohort::MetricRow>& rows, const StatsFlags& st,
                   const EorFlags& eor) {
  cohort::SummaryConfig sc;
  sc.ci = st.ci;
  sc.eor = eor.cfg;
  sc.models = st.models;
  const auto summary = cohort::summarize(rows, sc);
  write_text(out / "summary.md", report::to_markdown(summary));
  write_text(out / "summary.json", report::to_json(summary).dump(2) + "\n");
  write_text(out / "summary.csv", report::to_csv(summary));
  for (const auto& w : summary.warnings) log("warning: " + w);
}

std::vector<cohort::MetricRow> read_metrics(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  return cohort::read_metrics_csv(is);
}

// ---- subcommands ----

struct PreprocessCmd {
  fs::path case_dir, t1, t1ce, t2, flair, mask, atlas, out;
  RegistrationFlags reg;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("preprocess", "Register, resample to the atlas grid, skull strip and z-score one case");
    c->add_option("--case-dir", case_dir, "Directory holding t1/t1ce/t2/flair .nii[.gz]")->check(CLI::ExistingDirectory);
    c->add_option("--t1", t1, "T1 volume")->check(CLI::ExistingFile);
    c->add_option("--t1ce", t1ce, "Contrast-enhanced T1 volume (registration reference)")->check(CLI::ExistingFile);
    c->add_option("--t2", t2, "T2 volume")->check(CLI::ExistingFile);
    c->add_option("--flair", flair, "FLAIR volume")->check(CLI::ExistingFile);
    c->add_option("--mask", mask, "Brain mask on the atlas grid (skips the fallback skull strip)")->check(CLI::ExistingFile);
    c->add_option("--atlas", atlas, "Atlas T1 on the 240x240x155 1 mm grid, or 'synthetic'")->required();
    c->add_option("--out", out, "Output directory")->required();
    reg.add(c);
    c->callback([this] { code = run(); });
  }

  int code = 0;

  int run() {
    const PipelineConfig pcfg = reg.pipeline();
    std::map<Sequence, fs::path> paths;
    if (!case_dir.empty()) paths = workflow::find_case_sequences(case_dir);
    for (const auto& [s, p] : {std::pair{Sequence::T1, t1}, {Sequence::T1ce, t1ce}, {Sequence::T2, t2},
                               {Sequence::FLAIR, flair}})
      if (!p.empty()) paths[s] = p;
    if (!paths.count(Sequence::T1ce))
      throw Error(ErrorCode::MissingReferenceSequence, "t1ce is required as registration reference");

    // All inputs are read before anything is written.
    PipelineInput in;
    for (const auto& [s, p] : paths) {
      log("reading " + p.string());
      in.sequences[s] = nifti::read_file_grid(p);
    }
    if (!mask.empty()) {
      const auto g = nifti::read_file_grid(mask);
      Mask m(g.geometry, 0);
      for (std::size_t i = 0; i < g.size(); ++i) m.data[i] = g.data[i] != 0;
      in.external_mask = std::move(m);
    }
    const AtlasGrid grid =
        atlas == "synthetic" ? phantom::synthetic_atlas() : AtlasGrid(nifti::read_file_grid(atlas));

    log("running pipeline");
    const auto res = run_pipeline(in, grid, pcfg);
    for (const auto& w : res.warnings) log("warning: " + w);
    ensure_out_dir(out);
    workflow::write_pipeline_outputs(out, res);
    log("wrote " + out.string());
    return kExitOk;
  }
};

struct EvaluateCmd {
  fs::path manifest, out;
  std::string empty_dice = "undefined";
  bool no_hausdorff = false;
  unsigned jobs = 1;
  EorFlags eor;
  StatsFlags st;
  int code = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("evaluate", "Per-case metrics and cohort summary for every model in a manifest");
    c->add_option("--manifest", manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out, "Output directory")->required();
    c->add_option("--empty-dice", empty_dice, "Value of Dice/Jaccard/VSI when both masks are empty")
        ->check(CLI::IsMember({"undefined", "one"}))
        ->capture_default_str();
    c->add_flag("--no-hausdorff", no_hausdorff, "Skip HD95");
    c->add_option("--jobs", jobs, "Cases evaluated in parallel")->check(CLI::PositiveNumber)->capture_default_str();
    eor.add(c);
    st.add(c);
    c->callback([this] { code = run(); });
  }

  int run() {
    eor.cfg.validate();
    const auto m = cohort::load_manifest(manifest);
    cohort::EvaluateConfig ec;
    ec.empty_policy = empty_dice == "one" ? EmptyPolicy::One : EmptyPolicy::Undefined;
    ec.with_hausdorff = !no_hausdorff;
    ec.jobs = jobs;
    log("evaluating " + std::to_string(m.cases.size()) + " cases");
    const auto res = cohort::evaluate_manifest(m, ec);
    ensure_out_dir(out);
    {
      std::ofstream os(out / "metrics.csv", std::ios::binary);
      if (!os) throw Error(ErrorCode::IoError, "cannot write metrics.csv");
      cohort::write_metrics_csv(os, res.rows);
    }
    write_text(out / "failures.json", failures_json(res.failures).dump(2) + "\n");
    if (!res.rows.empty()) write_summary(out, res.rows, st, eor);
    log("wrote " + out.string());
    return finish_with_failures(res.failures);
  }
};

struct ClassifyCmd {
  fs::path manifest, metrics, out;
  unsigned jobs = 1;
  EorFlags eor;
  int code = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("classify-eor", "Gross total resection vs residual tumor table and metrics");
    auto* m = c->add_option("--manifest", manifest, "Manifest JSON (volumes from label files)")->check(CLI::ExistingFile);
    auto* v = c->add_option("--metrics", metrics, "metrics.csv from evaluate (volumes from ET rows)")
                  ->check(CLI::ExistingFile);
    m->excludes(v);
    c->add_option("--out", out, "Output directory")->required();
    c->add_option("--jobs", jobs, "Cases read in parallel")->check(CLI::PositiveNumber)->capture_default_str();
    eor.add(c);
    c->callback([this] { code = run(); });
  }

  int run() {
    eor.cfg.validate();
    if (manifest.empty() == metrics.empty())
      throw Error(ErrorCode::InvalidConfig, "exactly one of --manifest or --metrics is required");
    const auto t = !manifest.empty() ? workflow::eor_from_manifest(cohort::load_manifest(manifest), eor.cfg, jobs)
                                     : workflow::eor_from_metrics(read_metrics(metrics), eor.cfg);
    if (t.rows.empty() && t.failures.empty()) throw Error(ErrorCode::EmptyInput, "no cases to classify");
    const auto by_model = workflow::classification_by_model(t);
    ensure_out_dir(out);
    {
      std::ofstream os(out / "eor.csv", std::ios::binary);
      if (!os) throw Error(ErrorCode::IoError, "cannot write eor.csv");
      workflow::write_eor_csv(os, t);
    }
    std::ostringstream md;
    report::render_classification(md, by_model);
    write_text(out / "classification.md", md.str());
    nlohmann::json j;
    j["threshold_cm3"] = eor.cfg.threshold_cm3;
    for (const auto& [model, c] : by_model) j["models"][model] = report::classification_json(c);
    j["failures"] = failures_json(t.failures);
    write_text(out / "classification.json", j.dump(2) + "\n");
    std::cout << md.str();
    return finish_with_failures(t.failures);
  }
};

struct PhantomCmd {
  fs::path spec, out;
  std::size_t n = 20;
  std::uint64_t seed = stats::kDefaultSeed;
  double gtr_ratio = 0.5, lps_fraction = 0.0, noise = 0.5, max_translation = 4.0, max_rotation = 4.0;
  bool baseline = false, no_sequences = false;
  workflow::BaselineMode mode = workflow::BaselineMode::Pipeline;
  unsigned jobs = 1;
  RegistrationFlags reg;
  int code = 0;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("phantom", "Generate a seeded phantom cohort, optionally segmented by the baseline");
    auto* c = cmd;
    c->add_option("--out", out, "Output directory")->required();
    c->add_option("--spec", spec, "Cohort spec JSON; flags given explicitly override it")->check(CLI::ExistingFile);
    c->add_option("-n,--n", n, "Number of cases")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--seed", seed, "Seed for all randomness (cohort plan and noise)")->capture_default_str();
    c->add_option("--gtr-ratio", gtr_ratio, "Fraction of fully resected cases")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    c->add_option("--lps-fraction", lps_fraction, "Fraction of late postoperative scans")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    c->add_option("--noise", noise, "Gaussian noise sigma for every sequence")->check(CLI::NonNegativeNumber)->capture_default_str();
    c->add_option("--max-translation", max_translation, "Per-sequence misalignment bound (mm)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_option("--max-rotation", max_rotation, "Per-sequence misalignment bound (degrees)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    c->add_flag("--baseline", baseline, "Segment every case with the threshold baseline");
    add_choice(c, "--baseline-mode", mode,
               choices<workflow::BaselineMode>(
                   {{"pipeline", workflow::BaselineMode::Pipeline}, {"native", workflow::BaselineMode::Native}}),
               "pipeline: preprocess to the atlas grid first; native: stay on the case grid");
    c->add_flag("--no-sequences", no_sequences, "Write only ground truth and predictions");
    c->add_option("--jobs", jobs, "Cases generated in parallel")->check(CLI::PositiveNumber)->capture_default_str();
    reg.cfg.dof = Dof::Rigid;
    reg.add(c);
    c->callback([this] { code = run(); });
  }

  bool given(const char* name) const { return cmd->count(name) > 0; }

  int run() {
    workflow::PhantomRunConfig rc;
    auto& cs = rc.cohort;
    if (!spec.empty()) {
      std::ifstream is(spec);
      nlohmann::json j;
      try {
        is >> j;
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidSpec, spec.string() + ": " + e.what());
      }
      cs = phantom::cohort_spec_from_json(j);
    }
    if (spec.empty() || given("--n")) cs.n = n;
    if (spec.empty() || given("--seed")) cs.seed = seed;
    if (spec.empty() || given("--gtr-ratio")) cs.variation.gtr_ratio = gtr_ratio;
    if (spec.empty() || given("--lps-fraction")) cs.variation.lps_fraction = lps_fraction;
    if (spec.empty() || given("--noise")) cs.base.noise_sigma = {noise, noise, noise, noise};
    if (spec.empty() || given("--max-translation")) cs.variation.max_translation_mm = max_translation;
    if (spec.empty() || given("--max-rotation")) cs.variation.max_rotation_deg = max_rotation;
    cs.base.validate();
    rc.write_sequences = !no_sequences;
    rc.baseline = baseline;
    rc.mode = mode;
    rc.pipeline = reg.pipeline();
    rc.jobs = jobs;
    rc.log = log;
    // Plan once up front so spec errors surface before the output dir exists.
    phantom::plan_cohort(cs.n, cs.base, cs.variation, cs.seed);
    ensure_out_dir(out);
    const auto res = workflow::run_phantom_cohort(rc, out);
    std::size_t gtr = 0;
    for (const auto& c : res.cases) gtr += c.info.gt_gtr;
    log("wrote " + std::to_string(res.cases.size()) + " cases (" + std::to_string(gtr) + " GTR) to " + out.string());
    return kExitOk;
  }
};

struct ReportCmd {
  fs::path metrics, out;
  EorFlags eor;
  StatsFlags st;
  int code = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("report", "Rebuild the cohort summary from a metrics.csv");
    c->add_option("--metrics", metrics, "metrics.csv from evaluate")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out, "Output directory")->required();
    eor.add(c);
    st.add(c);
    c->callback([this] { code = run(); });
  }

  int run() {
    eor.cfg.validate();
    const auto rows = read_metrics(metrics);
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, metrics.string() + " has no rows");
    ensure_out_dir(out);
    write_summary(out, rows, st, eor);
    log("wrote " + out.string());
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation toolkit for postoperative glioma segmentation"};
  app.set_config("--config", "", "TOML/INI file; [subcommand] sections set that subcommand's flags, flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress logging on stderr");
  app.require_subcommand(1);

  PreprocessCmd preprocess;
  EvaluateCmd evaluate;
  ClassifyCmd classify;
  PhantomCmd phantom_cmd;
  ReportCmd report_cmd;
  preprocess.add(app);
  evaluate.add(app);
  classify.add(app);
  phantom_cmd.add(app);
  report_cmd.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("UsageError", e.what(), kExitInput);
    return kExitInput;
  } catch (const Error& e) {
    report_error(e.name(), e.what(), kExitInput);
    return kExitInput;
  } catch (const std::exception& e) {
    report_error("InternalError", e.what(), kExitInternal);
    return kExitInternal;
  }
  for (int code : {preprocess.code, evaluate.code, classify.code, phantom_cmd.code, report_cmd.code})
    if (code != 0) return code;
  return kExitOk;
}
