// Command-line front end of the experiment harness.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wasncal/calib/report.hpp"
#include "wasncal/errors.hpp"
#include "wasncal/harness/calibration_pipeline.hpp"
#include "wasncal/harness/config.hpp"
#include "wasncal/harness/datasets.hpp"
#include "wasncal/harness/experiments.hpp"
#include "wasncal/harness/log.hpp"
#include "wasncal/harness/records.hpp"
#include "wasncal/nn/checkpoint.hpp"
#include "wasncal/scene/io.hpp"

namespace fs = std::filesystem;
using namespace wasncal;
using namespace wasncal::harness;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string scale;
  std::string out;
  bool verbose = false;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "Experiment document (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "Root seed (overrides the document)");
  app->add_option("--scale", o.scale, "desk or full (overrides the document)")->check(CLI::IsMember({"desk", "full"}));
  app->add_option("--out", o.out, "Run directory (overrides the document)");
  app->add_flag("-v,--verbose", o.verbose, "Progress on stderr");
}

ExperimentConfig make_config(const CommonOptions& o, const json& patch = json::object()) {
  json doc = o.config.empty() ? json::object() : read_json_file(o.config);
  if (!o.out.empty()) doc["out"] = o.out;
  doc.merge_patch(patch);
  std::optional<Scale> scale;
  if (!o.scale.empty()) scale = scale_from_string(o.scale);
  return config_from_json(doc, scale, o.seed);
}

bool set_matches(const SetId& s, const std::string& kind) {
  if (kind.empty()) return true;
  if (kind == "distance-train") return s.kind == SetKind::DistanceTrain;
  if (kind == "rvector-train") return s.kind == SetKind::RvectorTrain;
  if (kind == "eval") return s.kind == SetKind::DistanceEval || s.kind == SetKind::GpRoom;
  if (kind == "calib") return s.kind == SetKind::Calibration || s.kind == SetKind::DoaProbe;
  return false;
}

// Prints assertion outcomes and returns the number that failed.
int report_assertions(const json& assertions, const std::vector<MetricsRecord>& records) {
  int failed = 0;
  for (const auto& a : check_assertions(assertions, records)) {
    std::cout << (a.passed ? "PASS " : "FAIL ") << a.message << '\n';
    failed += a.passed ? 0 : 1;
  }
  return failed;
}

json assertions_for(const json& assertions, const std::vector<std::string>& experiments) {
  json out = json::array();
  for (const auto& a : assertions) {
    const auto e = a.value("experiment", std::string{});
    if (std::find(experiments.begin(), experiments.end(), e) != experiments.end()) out.push_back(a);
  }
  return out;
}

void print_records(const std::vector<MetricsRecord>& records) {
  for (const auto& r : records) {
    if (r.metric == "error-cdf") continue;
    std::cout << r.experiment << ' ' << r.metric << ' ' << r.labels.dump() << " = " << r.value.dump() << '\n';
  }
}

int cmd_simulate(const CommonOptions& o, const std::string& kind, int count) {
  json patch = json::object();
  if (count > 0) {
    static const std::map<std::string, std::string> keys{{"distance-train", "train_pairs"},
                                                         {"rvector-train", "rvector_rooms"},
                                                         {"eval", "eval_pairs"},
                                                         {"calib", "calib_scenes"}};
    if (kind.empty()) throw ConfigError("simulate: --count needs --kind");
    patch["counts"][keys.at(kind)] = count;
  }
  Workspace ws(make_config(o, patch));
  for (const auto& set : make_plan(ws.config()).scene_sets)
    if (set_matches(set, kind)) {
      const auto& scenes = ws.scenes(set);
      std::cout << set.name() << ": " << scenes.size() << " scenes\n";
    }
  return 0;
}

int cmd_featurize(const CommonOptions& o) {
  Workspace ws(make_config(o));
  const Plan plan = make_plan(ws.config());
  for (const auto& [set, noise] : plan.feature_sets)
    std::cout << set.name() << '/' << noise.name() << ": " << ws.features(set, noise).size() << " records\n";
  for (const auto& set : plan.observation_sets)
    std::cout << set.name() << ": " << ws.observations(set).size() << " observation sets\n";
  return 0;
}

int cmd_train(const CommonOptions& o) {
  Workspace ws(make_config(o, {{"train_inline", true}}));
  for (const auto& spec : make_plan(ws.config()).models) {
    ws.model(spec);
    std::cout << "model " << spec.name() << " ready\n";
  }
  return 0;
}

int cmd_eval(const CommonOptions& o, Stage stage) {
  Workspace ws(make_config(o));
  const auto records = run_stage(ws, stage);
  print_records(records);
  std::vector<std::string> experiments;
  for (const auto& r : records)
    if (std::find(experiments.begin(), experiments.end(), r.experiment) == experiments.end())
      experiments.push_back(r.experiment);
  return report_assertions(assertions_for(ws.config().assertions, experiments), records) ? 1 : 0;
}

int cmd_report(const CommonOptions& o) {
  const ExperimentConfig cfg = make_config(o);
  const fs::path dir = cfg.out_dir / "metrics";
  std::vector<MetricsRecord> records;
  int stale = 0;
  for (const char* stem : {"table1", "table4", "error_cdf", "table5"}) {
    const fs::path p = dir / (std::string(stem) + ".json");
    if (!fs::exists(p)) continue;
    for (auto& r : read_records(p)) {
      if (!verify_hash(r, cfg.document)) ++stale;
      records.push_back(std::move(r));
    }
  }
  print_records(records);
  if (stale) std::cout << "FAIL " << stale << " records were produced under a different config\n";
  const int failed = report_assertions(cfg.assertions, records);
  return failed || stale ? 1 : 0;
}

struct CalibrateArgs {
  std::string scene;
  int index = 0;
  std::string checkpoint;
  std::string rvector_checkpoint;
  bool ground_truth = false;
  std::optional<double> synthetic_doa;
  std::string report;
  std::uint64_t seed = 0;
  std::string speech_dir;
};

int cmd_calibrate(const CalibrateArgs& a) {
  json doc = read_json_file(a.scene);
  if (doc.is_object() && doc.contains("scenes")) doc = doc["scenes"];
  if (doc.is_array()) {
    if (a.index < 0 || static_cast<std::size_t>(a.index) >= doc.size())
      throw ConfigError("calibrate: --index out of range for " + a.scene);
    doc = doc[static_cast<std::size_t>(a.index)];
  }
  const scene::SceneSpec spec = scene::scene_from_json(doc);

  CalibrateOptions opt;
  opt.synthetic_doa_deg = a.synthetic_doa;
  opt.ground_truth_distances = a.ground_truth;
  opt.seed = a.seed;
  if (!a.speech_dir.empty()) opt.speech_dir = a.speech_dir;

  nn::LoadedCheckpoint model, extractor;
  std::optional<ModelSpec> model_spec;
  if (!a.ground_truth) {
    if (a.checkpoint.empty()) throw ConfigError("calibrate: pass --checkpoint or --ground-truth-distances");
    model = nn::load_checkpoint(a.checkpoint);
    const json& extra = model.header.at("extra");
    if (!extra.contains("model")) throw ConfigError("calibrate: " + a.checkpoint + " is not a distance model");
    model_spec = model_spec_from_json(extra.at("model"));
    if (model_spec->rvector) {
      if (a.rvector_checkpoint.empty()) throw ConfigError("calibrate: the model needs --rvector-checkpoint");
      extractor = nn::load_checkpoint(a.rvector_checkpoint);
    }
  }
  const auto out = calibrate_scene(spec, opt, model.network.get(), model_spec ? &*model_spec : nullptr,
                                   extractor.network.get());
  json report = calib::to_json(out.report);
  if (!out.failure.empty()) report["failure"] = out.failure;
  if (!a.report.empty()) write_json_file(a.report, report);
  if (out.mpe)
    std::cout << "mpe " << *out.mpe << " m, scale " << *out.report.result.scale << '\n';
  else
    std::cout << "calibration failed: " << out.failure << '\n';
  return out.mpe ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distance estimation and geometry calibration experiments for acoustic sensor networks"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* simulate = app.add_subcommand("simulate", "Sample and store the scenes of the configured experiments");
  std::string kind;
  int count = 0;
  add_common(simulate, common);
  simulate->add_option("--kind", kind, "Only this dataset kind")
      ->check(CLI::IsMember({"distance-train", "rvector-train", "eval", "calib"}));
  simulate->add_option("--count", count, "Override the count of the selected kind");

  auto* featurize = app.add_subcommand("featurize", "Render scenes and extract features");
  add_common(featurize, common);
  auto* train = app.add_subcommand("train", "Train every model the experiments need");
  add_common(train, common);
  auto* eval_distance = app.add_subcommand("eval-distance", "Distance tables and error CDFs");
  add_common(eval_distance, common);
  auto* eval_calib = app.add_subcommand("eval-calib", "Scaled calibration table");
  add_common(eval_calib, common);
  auto* report = app.add_subcommand("report", "Check stored metrics against the config assertions");
  add_common(report, common);

  CalibrateArgs ca;
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate one scene from its manifest");
  calibrate->add_option("scene", ca.scene, "Scene manifest: one scene, an array of scenes or a stored scene set")
      ->required()
      ->check(CLI::ExistingFile);
  calibrate->add_option("--index", ca.index, "Scene index when the manifest holds several");
  calibrate->add_option("--checkpoint", ca.checkpoint, "Distance model checkpoint")->check(CLI::ExistingFile);
  calibrate->add_option("--rvector-checkpoint", ca.rvector_checkpoint, "R-vector extractor checkpoint")
      ->check(CLI::ExistingFile);
  calibrate->add_flag("--ground-truth-distances", ca.ground_truth, "Scale with true distances");
  calibrate->add_option("--synthetic-doa", ca.synthetic_doa, "Synthetic DoAs with this noise std (deg)");
  calibrate->add_option("--report", ca.report, "Write the calibration report here");
  calibrate->add_option("--seed", ca.seed, "Seed for synthetic DoAs and RANSAC");
  calibrate->add_option("--speech-dir", ca.speech_dir, "Speech corpus for speech-file sources")
      ->check(CLI::ExistingDirectory);
  calibrate->add_flag("-v,--verbose", common.verbose, "Progress on stderr");

  CLI11_PARSE(app, argc, argv);
  set_verbose(common.verbose);
  try {
    if (simulate->parsed()) return cmd_simulate(common, kind, count);
    if (featurize->parsed()) return cmd_featurize(common);
    if (train->parsed()) return cmd_train(common);
    if (eval_distance->parsed()) return cmd_eval(common, Stage::EvalDistance);
    if (eval_calib->parsed()) return cmd_eval(common, Stage::EvalCalibration);
    if (report->parsed()) return cmd_report(common);
    if (calibrate->parsed()) return cmd_calibrate(ca);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
