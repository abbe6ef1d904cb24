#pragma once

#include <cstdint>

#include "wasncal/calib/types.hpp"

namespace wasncal::calib {

struct SolverConfig {
  int restarts = 20;
  int max_iterations = 2000;
  /// Stop when an accepted step changes the objective by less than this, relatively.
  double tolerance = 1e-10;
  /// Huber threshold on the angular residual; 0 keeps the plain squared loss.
  double huber_deg = 0.0;
  /// Scale of a Geman-McClure loss reached by graduated non-convexity; 0
  /// disables it. Overrides the Huber loss.
  double gnc_scale_deg = 0.0;
  std::uint64_t seed = 0;
};

struct SolveResult {
  Geometry geometry;          // unscaled: node 0 at the origin, orientation 0, node distance sum 1
  double residual = 0.0;      // objective at the solution (the robust cost under GNC)
  Eigen::MatrixXd residuals;  // K x N wrapped angular residuals; NaN where not observed
  int iterations = 0;         // of the winning restart
  int converged_restarts = 0;
};

/// Sum of rho(wrap(phi_ij - atan2(s_i - n_j) + theta_j)) over the valid
/// observations, rho the squared or Huber loss.
double calibration_objective(const Geometry& g, const DoAObservationSet& obs, double huber_deg = 0.0);

/// K x N wrapped residuals; NaN where the mask is false.
Eigen::MatrixXd angular_residuals(const Geometry& g, const DoAObservationSet& obs);

/// Shifts and rotates so node 0 sits at the origin with orientation 0, then
/// divides all positions by the node distance sum. The objective is
/// unchanged by all three.
Geometry canonicalize(Geometry g);

/// Least-squares intersection of the bearing lines of source i from the
/// nodes of `g` over the usable observations. Empty when the lines are
/// (nearly) parallel.
std::optional<Eigen::Vector2d> triangulate(const Geometry& g, const DoAObservationSet& obs, Eigen::Index source,
                                           const Mask* usable = nullptr);

/// DoA-only geometry: damped Gauss-Newton from `restarts` random starts over
/// the free node poses and all source positions. Requires K >= 3, every node
/// with at least two observations and at least three sources seen by two or
/// more nodes.
///
/// An `initial` geometry (same K and N) is tried first, before the random
/// starts; with it, `config.restarts` may be zero.
SolveResult solve_geometry(const DoAObservationSet& obs, const SolverConfig& config = {},
                           const Geometry* initial = nullptr);

}  // namespace wasncal::calib
