#pragma once

#include <cstdint>

#include "wasncal/calib/solver.hpp"

namespace wasncal::calib {

struct RansacConfig {
  int subset_size = 6;
  double inlier_threshold_deg = 5.0;
  /// Minimum share of the valid observations that must be inliers.
  double quorum = 0.6;
  int iterations = 50;
  /// Solver for the subset hypotheses; robust loss keeps a single bad
  /// bearing from dragging a small subset fit.
  SolverConfig hypothesis_solver{5, 2000, 1e-10, 10.0, 0.0, 0};
  /// Warm-started refits of a promising hypothesis on its own consensus.
  int local_refits = 3;
  SolverConfig local_solver{0, 2000, 1e-10, 0.0, 0.0, 0};
  /// Solver for the final fit on the consensus set; the best hypothesis is
  /// tried alongside its random starts.
  SolverConfig refit_solver{};
  /// Consensus refits; each round re-scores all observations under the new fit.
  int max_refits = 5;
  /// Agreeing bearings a source needs before its observations count as
  /// inliers. Two bearings always intersect, so two prove nothing.
  int min_support = 3;
  std::uint64_t seed = 0;
};

struct CalibrationResult {
  Geometry geometry;          // unscaled until a scale is applied
  double residual = 0.0;      // objective of the final fit over the inliers
  Mask inliers;               // K x N
  Eigen::MatrixXd residuals;  // K x N angular residuals of the final fit, NaN where unobserved
  int iterations = 0;         // solver iterations of the final fit
  int hypotheses = 0;         // subset fits that produced a model
  /// Sources backed by enough inlier bearings; the others keep arbitrary
  /// positions and must not enter the scale estimate.
  Eigen::Array<bool, Eigen::Dynamic, 1> located;
  std::optional<double> scale;
};

/// Places every source given fixed node poses: the pair of bearings whose
/// intersection agrees with most others within `threshold_rad` wins, then
/// the source is refined on the agreeing bearings. Sources with fewer than
/// two bearings stay where they are.
Geometry place_sources(Geometry g, const DoAObservationSet& obs, double threshold_rad);

/// Observations whose wrapped residual under `g` is below the threshold,
/// kept only for sources with at least `min_support` of them.
Mask inlier_mask(const Geometry& g, const DoAObservationSet& obs, double threshold_rad, int min_support = 1);

/// Subset hypotheses scored by inlier count, then a refit on the consensus
/// observations. With no outliers the consensus is the full set and the
/// result equals solve_geometry(obs, refit_solver). Throws
/// CalibrationFailure when no model reaches the quorum.
CalibrationResult ransac_calibrate(const DoAObservationSet& obs, const RansacConfig& config = {});

}  // namespace wasncal::calib
