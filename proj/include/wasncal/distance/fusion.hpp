#pragma once

#include <optional>
#include <vector>

#include "wasncal/distance/classes.hpp"

namespace wasncal::dist {

/// Per-node decision from the three opposite-pair estimates.
struct FusedEstimate {
  enum class Kind { Numeric, OoR, Discard };
  Kind kind = Kind::Discard;
  int cls = -1;
  std::optional<double> distance;
};

/// Any OoR vote -> OoR; otherwise a class shared by at least two of the
/// three estimates wins; otherwise Discard.
FusedEstimate fuse_node_estimates(const std::vector<int>& classes, const DistanceClassGrid& grid);
FusedEstimate fuse_node_estimates(const std::vector<DistanceEstimate>& estimates, const DistanceClassGrid& grid);

}  // namespace wasncal::dist
