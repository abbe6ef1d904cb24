#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wasncal/calib/doa.hpp"
#include "wasncal/calib/ransac.hpp"
#include "wasncal/calib/report.hpp"
#include "wasncal/distance/classes.hpp"
#include "wasncal/harness/datasets.hpp"

namespace wasncal::harness {

/// Synthetic DoA noise fitted to measured estimator errors: entries beyond
/// `outlier_deg` set the outlier fraction, the rest the circular standard
/// deviation.
struct DoaErrorModel {
  double noise_std_deg = 0.0;
  double outlier_fraction = 0.0;
  long count = 0;

  calib::SynthDoaConfig synth() const { return {noise_std_deg, outlier_fraction}; }
};

DoaErrorModel fit_doa_error_model(const std::vector<double>& errors_rad, double outlier_deg = 20.0);

/// K x N fused node distances from per-pair estimates ordered by source, then
/// node, then pair; NaN where the node voted OoR or discarded.
Eigen::MatrixXd fused_distance_matrix(const std::vector<dist::DistanceEstimate>& estimates, Eigen::Index num_nodes,
                                      Eigen::Index num_sources, const dist::DistanceClassGrid& grid = {});

/// RANSAC calibration, scale from the distances of located sources, rigid
/// alignment to the truth and MPE. Calibration or scale failures leave
/// `mpe` empty and set `failure`.
struct ScenarioOutcome {
  calib::CalibrationReport report;
  std::optional<double> mpe;
  std::string failure;
};

ScenarioOutcome calibrate_scenario(const calib::DoAObservationSet& observations, const Eigen::MatrixXd& distances,
                                   const std::optional<calib::Geometry>& truth, const calib::RansacConfig& ransac = {});

/// Options of a single-scene calibration from a scene manifest.
struct CalibrateOptions {
  /// Synthetic DoAs with this noise instead of SRP-PHAT on rendered signals.
  std::optional<double> synthetic_doa_deg;
  bool ground_truth_distances = false;
  std::uint64_t seed = 0;
  calib::RansacConfig ransac;
  FeatureConfig features;
  /// Corpus for speech-file sources.
  std::optional<std::filesystem::path> speech_dir;
};

/// Renders the scene when needed, estimates DoAs and distances, calibrates.
/// `model` with its `spec` (and `extractor` for R-vector models) is required
/// unless ground-truth distances are requested.
ScenarioOutcome calibrate_scene(const scene::SceneSpec& scene, const CalibrateOptions& options,
                                nn::Network* model = nullptr, const ModelSpec* spec = nullptr,
                                nn::Network* extractor = nullptr);

}  // namespace wasncal::harness
