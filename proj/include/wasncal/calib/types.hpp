#pragma once

#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Dense>

#include "wasncal/scene/types.hpp"

namespace wasncal::calib {

/// One 2-D point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;
  return w == -std::numbers::pi ? std::numbers::pi : w;
}

/// Azimuth of every source at every node, in the node's local frame.
struct DoAObservationSet {
  Eigen::MatrixXd azimuths;  // K x N, radians
  Mask valid;                // K x N, false marks a failed estimate

  Eigen::Index num_nodes() const { return azimuths.rows(); }
  Eigen::Index num_sources() const { return azimuths.cols(); }
  Eigen::Index num_valid() const { return valid.count(); }
  /// Keeps only the given sources, in order.
  DoAObservationSet select_sources(const std::vector<Eigen::Index>& sources) const;
};

struct Geometry {
  Points nodes;                     // K x 2
  Eigen::VectorXd orientations;     // K
  Points sources;                   // N x 2
  std::optional<double> scale;      // set once metric

  Eigen::Index num_nodes() const { return nodes.rows(); }
  Eigen::Index num_sources() const { return sources.rows(); }
  /// Sum over node pairs of their distances (each unordered pair once).
  double node_distance_sum() const;
  /// Copy with every position multiplied by v and scale set to v.
  Geometry scaled(double v) const;
  /// Local azimuth of source i seen from node j.
  double azimuth(Eigen::Index node, Eigen::Index source) const;
  double distance(Eigen::Index node, Eigen::Index source) const { return (sources.row(source) - nodes.row(node)).norm(); }
  /// K x N matrix of source-node distances.
  Eigen::MatrixXd distances() const;
};

/// Ground-truth geometry of a scene (node centers, orientations, sources).
Geometry geometry_from_scene(const scene::SceneSpec& scene);

}  // namespace wasncal::calib
