#include "wasncal/distance/classes.hpp"

#include <cmath>
#include <string>

#include "wasncal/errors.hpp"

namespace wasncal::dist {

int DistanceClassGrid::quantize(double d) const {
  if (!(d > 0.0)) throw DomainError("distance must be positive, got " + std::to_string(d));
  if (d > r_max) return oor_class();
  if (d < d_min) return 0;
  return std::min(static_cast<int>(std::floor((d - d_min) / width())), num_classes - 1);
}

std::optional<double> DistanceClassGrid::class_to_distance(int cls) const {
  if (cls == oor_class()) return std::nullopt;
  if (cls < 0 || cls > oor_class()) throw DomainError("class index out of range: " + std::to_string(cls));
  return d_min + (cls + 0.5) * width();
}

DistanceEstimate estimate_from_posterior(const Eigen::Ref<const Eigen::VectorXd>& posterior,
                                         const DistanceClassGrid& grid, long source_pair_id) {
  if (posterior.size() != grid.total_classes())
    throw DomainError("posterior has " + std::to_string(posterior.size()) + " entries, expected " +
                      std::to_string(grid.total_classes()));
  DistanceEstimate e;
  e.posterior = posterior;
  Eigen::Index k = 0;
  posterior.maxCoeff(&k);
  e.cls = static_cast<int>(k);
  e.distance = grid.class_to_distance(e.cls);
  e.source_pair_id = source_pair_id;
  return e;
}

}  // namespace wasncal::dist
