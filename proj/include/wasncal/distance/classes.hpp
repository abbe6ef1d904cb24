#pragma once

#include <optional>

#include <Eigen/Dense>

namespace wasncal::dist {

/// Linear quantization of [d_min, r_max] into num_classes bins plus one
/// out-of-range class with index num_classes.
struct DistanceClassGrid {
  double d_min = 0.03;
  double r_max = 3.0;
  int num_classes = 31;

  double width() const { return (r_max - d_min) / num_classes; }
  int oor_class() const { return num_classes; }
  int total_classes() const { return num_classes + 1; }
  bool is_oor(int cls) const { return cls == oor_class(); }

  /// Class of a true distance: beyond r_max -> OoR, below d_min -> class 0.
  int quantize(double d) const;
  /// Bin midpoint; empty for the OoR class.
  std::optional<double> class_to_distance(int cls) const;
};

/// Classifier output for one source / microphone-pair example.
struct DistanceEstimate {
  Eigen::VectorXd posterior;
  int cls = 0;
  std::optional<double> distance;  // empty when cls is OoR
  long source_pair_id = -1;

  bool oor() const { return !distance.has_value(); }
};

/// Argmax class of a posterior and its midpoint.
DistanceEstimate estimate_from_posterior(const Eigen::Ref<const Eigen::VectorXd>& posterior,
                                         const DistanceClassGrid& grid, long source_pair_id = -1);

}  // namespace wasncal::dist
