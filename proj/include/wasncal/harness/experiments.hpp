#pragma once

#include <vector>

#include "wasncal/harness/datasets.hpp"
#include "wasncal/harness/records.hpp"

namespace wasncal::harness {

/// Per-pair MAE for every (row, signal) cell; writes metrics/table1.{csv,json}.
std::vector<MetricsRecord> run_table1(Workspace& ws);

/// Per SNR: unfused and fused MAE, OoR F1 and discards on the evaluation set
/// with out-of-range examples; writes metrics/table4.{csv,json}.
std::vector<MetricsRecord> run_table4(Workspace& ws);

/// MPE of scaled calibrations per T60 and distance source; writes
/// metrics/table5.{csv,json}.
std::vector<MetricsRecord> run_table5(Workspace& ws);

/// Error CDFs of the network and of a GP fitted in a single room, tested in
/// that room (matched) and on the multi-room evaluation set; writes
/// metrics/error_cdf.{csv,json}.
std::vector<MetricsRecord> run_error_cdf(Workspace& ws);

/// Artifacts the configured experiments need, for the simulate, featurize
/// and train stages.
struct Plan {
  std::vector<SetId> scene_sets;
  std::vector<std::pair<SetId, NoiseCondition>> feature_sets;
  std::vector<SetId> observation_sets;
  std::vector<ModelSpec> models;
};

Plan make_plan(const ExperimentConfig& config);

/// Runs the configured experiments of a stage (eval-distance: table1,
/// table4, error-cdf; eval-calibration: table5).
std::vector<MetricsRecord> run_stage(Workspace& ws, Stage stage);

/// Error thresholds 0, step, ..., max.
Eigen::VectorXd cdf_thresholds(double max_error, double step);

}  // namespace wasncal::harness
