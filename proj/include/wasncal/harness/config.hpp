#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wasncal/distance/models.hpp"
#include "wasncal/json_io.hpp"
#include "wasncal/scene/types.hpp"

namespace wasncal::harness {

enum class Scale { Desk, Full };
enum class Stage { Simulate, Featurize, Train, EvalDistance, EvalCalibration, Report };
enum class DistanceSource { GroundTruth, Model };
enum class DoaSource { Estimated, Synthetic };

std::string to_string(Scale s);
std::string to_string(Stage s);
std::string to_string(DistanceSource s);
std::string to_string(DoaSource s);
Scale scale_from_string(const std::string& s);
Stage stage_from_string(const std::string& s);

/// Which distance model a table cell needs. `oor` models are trained with
/// out-of-range examples and random sensor noise.
struct ModelSpec {
  dist::Arch arch = dist::Arch::Mlp;
  bool diffuseness = true;
  bool rvector = false;
  scene::SignalKind signal = scene::SignalKind::WhiteNoise;
  bool oor = false;

  /// Stable file-name friendly identifier, e.g. "mlp-diff-white-noise".
  std::string name() const;
  std::string label() const;  // "MLP (diffuseness + R-vector)"
};

struct Counts {
  int train_pairs = 2000;
  int eval_pairs = 1000;
  int oor_train = 200;
  int oor_eval = 250;
  int calib_scenes = 20;
  int rvector_rooms = 50;
  int rvector_pairs_per_room = 20;
  int gp_pairs = 200;
  int gp_matched_pairs = 200;
  /// Rendered scenes per T60 used to measure the DoA estimator's error.
  int doa_scenes = 4;
  int doa_sources = 10;
};

struct TrainingSpec {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 3e-4;
  double validation_fraction = 0.1;
  int rvector_epochs = 15;
  double crnn_width_scale = 0.25;
  double rvector_width_scale = 0.5;
  /// Caps the CRNN training and evaluation scenes (0 = all); the CRNN keeps
  /// full time-frequency maps in memory.
  int crnn_max_pairs = 400;
};

struct Table1Spec {
  std::vector<ModelSpec> rows;  // signal ignored; one column per entry of `signals`
  std::vector<scene::SignalKind> signals;
};

struct Table4Spec {
  ModelSpec model;
  std::vector<double> snr_db;
};

struct Table5Spec {
  std::vector<double> t60;
  std::vector<DistanceSource> distances;
  DoaSource doa = DoaSource::Synthetic;
  ModelSpec model;
  /// DoA errors beyond this count as outliers when fitting the synthetic
  /// noise model to the estimator.
  double outlier_deg = 20.0;
};

struct ErrorCdfSpec {
  ModelSpec model;
  double gp_room_x = 6.5;
  double gp_room_y = 5.5;
  double gp_t60 = 0.35;
  double max_error = 1.0;
  double step = 0.01;
};

/// One experiment document, fully resolved: scale defaults merged with the
/// user's overrides. `document` is what gets hashed.
struct ExperimentConfig {
  std::string id = "run";
  Scale scale = Scale::Desk;
  Stage stage = Stage::Report;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/run";
  std::optional<std::filesystem::path> speech_dir;
  std::vector<std::string> experiments;  // table1, table4, table5, error-cdf
  Counts counts;
  TrainingSpec training;
  Table1Spec table1;
  Table4Spec table4;
  Table5Spec table5;
  ErrorCdfSpec error_cdf;
  bool train_inline = true;
  json assertions = json::array();
  json document;

  bool runs(const std::string& experiment) const;
  /// Resolved signal kind: speech means corpus excerpts when a speech
  /// directory is configured, the surrogate otherwise.
  scene::SignalKind resolve(scene::SignalKind kind) const;
  /// Hash of `document` without the run directory.
  std::string hash() const;
};

/// Defaults of each scale as a JSON document.
json default_document(Scale scale);

/// Merges `doc` over the defaults of its "scale" (or `scale_override`),
/// applies the seed override, then parses. Throws ConfigError when the seed
/// is missing, a value is malformed or a referenced path does not exist.
ExperimentConfig config_from_json(const json& doc, std::optional<Scale> scale_override = {},
                                  std::optional<std::uint64_t> seed_override = {});
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<Scale> scale_override = {},
                             std::optional<std::uint64_t> seed_override = {});

json to_json(const ModelSpec& m);
ModelSpec model_spec_from_json(const json& j);

}  // namespace wasncal::harness
