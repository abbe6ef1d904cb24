#include "wasncal/calib/scale.hpp"

#include <cmath>
#include <limits>

#include "wasncal/errors.hpp"

namespace wasncal::calib {

namespace {

void check_shape(const Geometry& g, const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != g.num_nodes() || m.cols() != g.num_sources())
    throw DomainError(std::string("scale: ") + what + " must be K x N");
}

bool usable(double d) { return std::isfinite(d) && d > 0.0; }

}  // namespace

Eigen::MatrixXd scale_weights(const Geometry& unscaled, const Eigen::MatrixXd& distance_estimates) {
  check_shape(unscaled, distance_estimates, "distance estimates");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(unscaled.num_nodes(), unscaled.num_sources());
  for (Eigen::Index j = 0; j < w.rows(); ++j)
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
      const double r = unscaled.distance(j, i);
      if (usable(distance_estimates(j, i)) && r > 0.0) w(j, i) = 1.0 / r;
    }
  return w;
}

double scale_factor(const Geometry& unscaled, const Eigen::MatrixXd& distance_estimates, const Eigen::MatrixXd& weights) {
  check_shape(unscaled, distance_estimates, "distance estimates");
  check_shape(unscaled, weights, "weights");
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < weights.rows(); ++j)
    for (Eigen::Index i = 0; i < weights.cols(); ++i) {
      const double w = weights(j, i);
      if (w < 0.0) throw DomainError("scale: negative weight");
      if (w == 0.0 || !usable(distance_estimates(j, i))) continue;
      const double r = unscaled.distance(j, i);
      num += w * distance_estimates(j, i) * r;
      den += w * r * r;
    }
  if (!(den > 0.0)) throw ScaleUnavailable("no usable source-node distance estimate");
  return num / den;
}

double scale_factor(const Geometry& unscaled, const Eigen::MatrixXd& distance_estimates) {
  return scale_factor(unscaled, distance_estimates, scale_weights(unscaled, distance_estimates));
}

Eigen::MatrixXd restrict_to_sources(Eigen::MatrixXd distance_estimates, const Eigen::Array<bool, Eigen::Dynamic, 1>& located) {
  if (located.size() != distance_estimates.cols()) throw DomainError("restrict_to_sources: one flag per source expected");
  for (Eigen::Index i = 0; i < located.size(); ++i)
    if (!located[i]) distance_estimates.col(i).setConstant(std::numeric_limits<double>::quiet_NaN());
  return distance_estimates;
}

}  // namespace wasncal::calib
