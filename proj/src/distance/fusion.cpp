#include "wasncal/distance/fusion.hpp"

#include <algorithm>

#include "wasncal/errors.hpp"

namespace wasncal::dist {

FusedEstimate fuse_node_estimates(const std::vector<int>& classes, const DistanceClassGrid& grid) {
  if (classes.size() != 3) throw DomainError("fusion expects exactly three estimates per node");
  FusedEstimate out;
  if (std::any_of(classes.begin(), classes.end(), [&](int c) { return grid.is_oor(c); })) {
    out.kind = FusedEstimate::Kind::OoR;
    out.cls = grid.oor_class();
    return out;
  }
  for (std::size_t i = 0; i < 3; ++i)
    if (std::count(classes.begin(), classes.end(), classes[i]) >= 2) {
      out.kind = FusedEstimate::Kind::Numeric;
      out.cls = classes[i];
      out.distance = grid.class_to_distance(out.cls);
      return out;
    }
  return out;
}

FusedEstimate fuse_node_estimates(const std::vector<DistanceEstimate>& estimates, const DistanceClassGrid& grid) {
  std::vector<int> classes;
  for (const auto& e : estimates) classes.push_back(e.cls);
  return fuse_node_estimates(classes, grid);
}

}  // namespace wasncal::dist
