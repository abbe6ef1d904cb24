#include "wasncal/calib/align.hpp"

#include <Eigen/SVD>

#include "wasncal/errors.hpp"

namespace wasncal::calib {

Points RigidTransform::apply(const Points& p) const {
  return ((p * rotation.transpose()).rowwise() + translation.transpose()).eval();
}

Geometry RigidTransform::apply(const Geometry& g) const {
  Geometry out = g;
  out.nodes = apply(g.nodes);
  out.sources = apply(g.sources);
  for (Eigen::Index j = 0; j < g.num_nodes(); ++j) {
    const Eigen::Vector2d axis = rotation * Eigen::Vector2d(std::cos(g.orientations[j]), std::sin(g.orientations[j]));
    out.orientations[j] = std::atan2(axis.y(), axis.x());
  }
  return out;
}

RigidTransform rigid_align(const Points& estimated, const Points& truth, bool allow_reflection) {
  if (estimated.rows() != truth.rows()) throw DomainError("rigid_align: point counts differ");
  if (estimated.rows() < 2) throw DomainError("rigid_align: needs at least two points");
  const Eigen::RowVector2d mu_e = estimated.colwise().mean(), mu_t = truth.colwise().mean();
  const Points e = estimated.rowwise() - mu_e, t = truth.rowwise() - mu_t;
  const Eigen::Matrix2d cov = t.transpose() * e;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  const bool flip = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0;
  if (flip && !allow_reflection) d(1, 1) = -1.0;
  RigidTransform out;
  out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  out.reflection = out.rotation.determinant() < 0.0;
  out.translation = mu_t.transpose() - out.rotation * mu_e.transpose();
  return out;
}

Geometry align_to(const Geometry& estimated, const Geometry& truth, bool allow_reflection) {
  return rigid_align(estimated.nodes, truth.nodes, allow_reflection).apply(estimated);
}

double mpe(const std::vector<Points>& estimated, const std::vector<Points>& truth) {
  if (estimated.empty() || estimated.size() != truth.size()) throw DomainError("mpe: empty or mismatched scenario lists");
  double total = 0.0;
  Eigen::Index count = 0;
  for (std::size_t m = 0; m < estimated.size(); ++m) {
    if (estimated[m].rows() != truth[m].rows() || estimated[m].rows() == 0)
      throw DomainError("mpe: node counts differ");
    total += (estimated[m] - truth[m]).rowwise().norm().sum();
    count += truth[m].rows();
  }
  return total / static_cast<double>(count);
}

}  // namespace wasncal::calib
