#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "wasncal/distance/fusion.hpp"

namespace wasncal::dist {

/// (1/M) sum |est - truth|.
double mae(const std::vector<double>& estimates, const std::vector<double>& truths);

/// One evaluated decision against its true distance.
struct Outcome {
  FusedEstimate::Kind kind = FusedEstimate::Kind::Numeric;
  double estimate = 0.0;  // meaningful for Numeric only
  double truth = 0.0;
};

/// MAE over numeric estimates of in-range truths. Everything else is counted:
/// truths beyond r_max, in-range truths declared OoR, and discards.
struct MaeSummary {
  double mae = 0.0;
  long used = 0;
  long oor_truth = 0;
  long missed_as_oor = 0;
  long discards = 0;
};

MaeSummary summarize_mae(const std::vector<Outcome>& outcomes, const DistanceClassGrid& grid);

/// F1 with OoR as the positive class. Throws DomainError when the truth has
/// no positives (F1 undefined).
double oor_f1(const std::vector<bool>& predicted, const std::vector<bool>& truth);

/// Fraction of errors <= each threshold.
Eigen::VectorXd error_cdf(const std::vector<double>& abs_errors, const Eigen::Ref<const Eigen::VectorXd>& thresholds);

}  // namespace wasncal::dist
