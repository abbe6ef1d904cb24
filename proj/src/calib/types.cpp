#include "wasncal/calib/types.hpp"

#include "wasncal/errors.hpp"

namespace wasncal::calib {

DoAObservationSet DoAObservationSet::select_sources(const std::vector<Eigen::Index>& sources) const {
  DoAObservationSet out;
  out.azimuths.resize(num_nodes(), static_cast<Eigen::Index>(sources.size()));
  out.valid.resize(num_nodes(), static_cast<Eigen::Index>(sources.size()));
  for (std::size_t c = 0; c < sources.size(); ++c) {
    const auto i = sources[c];
    if (i < 0 || i >= num_sources()) throw DomainError("select_sources: source index out of range");
    out.azimuths.col(static_cast<Eigen::Index>(c)) = azimuths.col(i);
    out.valid.col(static_cast<Eigen::Index>(c)) = valid.col(i);
  }
  return out;
}

double Geometry::node_distance_sum() const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < nodes.rows(); ++i)
    for (Eigen::Index j = i + 1; j < nodes.rows(); ++j) s += (nodes.row(i) - nodes.row(j)).norm();
  return s;
}

Geometry Geometry::scaled(double v) const {
  Geometry g = *this;
  g.nodes *= v;
  g.sources *= v;
  g.scale = v;
  return g;
}

double Geometry::azimuth(Eigen::Index node, Eigen::Index source) const {
  const Eigen::RowVector2d d = sources.row(source) - nodes.row(node);
  return wrap_angle(std::atan2(d.y(), d.x()) - orientations[node]);
}

Eigen::MatrixXd Geometry::distances() const {
  Eigen::MatrixXd d(num_nodes(), num_sources());
  for (Eigen::Index j = 0; j < num_nodes(); ++j)
    for (Eigen::Index i = 0; i < num_sources(); ++i) d(j, i) = distance(j, i);
  return d;
}

Geometry geometry_from_scene(const scene::SceneSpec& scene) {
  Geometry g;
  const auto k = static_cast<Eigen::Index>(scene.nodes.size());
  const auto n = static_cast<Eigen::Index>(scene.sources.size());
  g.nodes.resize(k, 2);
  g.orientations.resize(k);
  g.sources.resize(n, 2);
  for (Eigen::Index j = 0; j < k; ++j) {
    g.nodes.row(j) = scene.nodes[static_cast<std::size_t>(j)].center.transpose();
    g.orientations[j] = wrap_angle(scene.nodes[static_cast<std::size_t>(j)].orientation);
  }
  for (Eigen::Index i = 0; i < n; ++i) g.sources.row(i) = scene.sources[static_cast<std::size_t>(i)].position.transpose();
  g.scale = 1.0;
  return g;
}

}  // namespace wasncal::calib
