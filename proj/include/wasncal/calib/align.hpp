#pragma once

#include <vector>

#include "wasncal/calib/types.hpp"

namespace wasncal::calib {

/// p -> rotation * p + translation.
struct RigidTransform {
  Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
  bool reflection = false;

  double angle() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }
  Points apply(const Points& p) const;
  Geometry apply(const Geometry& g) const;
};

/// Least-squares rigid transform taking `estimated` onto `truth` (rows
/// matched). Reflections are only considered when allowed.
RigidTransform rigid_align(const Points& estimated, const Points& truth, bool allow_reflection = false);

/// Aligns the node positions of a scaled estimate to the truth and applies
/// the transform to the whole geometry.
Geometry align_to(const Geometry& estimated, const Geometry& truth, bool allow_reflection = false);

/// Mean Euclidean node-position error over all nodes of all scenarios.
double mpe(const std::vector<Points>& estimated, const std::vector<Points>& truth);
inline double mpe(const Points& estimated, const Points& truth) {
  return mpe(std::vector<Points>{estimated}, std::vector<Points>{truth});
}

}  // namespace wasncal::calib
