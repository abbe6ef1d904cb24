#pragma once

#include "wasncal/calib/types.hpp"

namespace wasncal::calib {

/// w_ij = 1 / ||s_i - n_j|| of the unscaled geometry for usable pairs (finite
/// positive estimate), 0 otherwise. K x N.
Eigen::MatrixXd scale_weights(const Geometry& unscaled, const Eigen::MatrixXd& distance_estimates);

/// Weighted least-squares scale:
/// v = sum w d r / sum w r^2 with r the unscaled source-node distances.
/// `distance_estimates` is K x N; non-finite entries are skipped. Throws
/// ScaleUnavailable when every weight is zero.
double scale_factor(const Geometry& unscaled, const Eigen::MatrixXd& distance_estimates,
                    const Eigen::MatrixXd& weights);
double scale_factor(const Geometry& unscaled, const Eigen::MatrixXd& distance_estimates);

/// Copy of the K x N estimates with the columns of unlocated sources set to NaN.
Eigen::MatrixXd restrict_to_sources(Eigen::MatrixXd distance_estimates, const Eigen::Array<bool, Eigen::Dynamic, 1>& located);

}  // namespace wasncal::calib
