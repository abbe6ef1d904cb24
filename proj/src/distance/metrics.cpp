#include "wasncal/distance/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "wasncal/errors.hpp"

namespace wasncal::dist {

double mae(const std::vector<double>& estimates, const std::vector<double>& truths) {
  if (estimates.size() != truths.size()) throw DomainError("mae: length mismatch");
  if (estimates.empty()) throw DomainError("mae of an empty set");
  double s = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) s += std::abs(estimates[i] - truths[i]);
  return s / static_cast<double>(estimates.size());
}

MaeSummary summarize_mae(const std::vector<Outcome>& outcomes, const DistanceClassGrid& grid) {
  MaeSummary s;
  double total = 0.0;
  for (const auto& o : outcomes) {
    if (o.kind == FusedEstimate::Kind::Discard) {
      ++s.discards;
      continue;
    }
    if (o.truth > grid.r_max) {
      ++s.oor_truth;
      continue;
    }
    if (o.kind == FusedEstimate::Kind::OoR) {
      ++s.missed_as_oor;
      continue;
    }
    total += std::abs(o.estimate - o.truth);
    ++s.used;
  }
  if (s.used == 0) throw DomainError("mae: no numeric estimates of in-range distances");
  s.mae = total / static_cast<double>(s.used);
  return s;
}

double oor_f1(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (predicted.size() != truth.size()) throw DomainError("oor_f1: length mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] && truth[i]) ++tp;
    if (predicted[i] && !truth[i]) ++fp;
    if (!predicted[i] && truth[i]) ++fn;
  }
  if (tp + fn == 0) throw DomainError("oor_f1 undefined: no out-of-range examples in the truth");
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * p * r / (p + r);
}

Eigen::VectorXd error_cdf(const std::vector<double>& abs_errors, const Eigen::Ref<const Eigen::VectorXd>& thresholds) {
  if (abs_errors.empty()) throw DomainError("error_cdf of an empty set");
  std::vector<double> sorted = abs_errors;
  std::sort(sorted.begin(), sorted.end());
  Eigen::VectorXd out(thresholds.size());
  for (Eigen::Index i = 0; i < thresholds.size(); ++i) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), thresholds[i]);
    out[i] = static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
  }
  return out;
}

}  // namespace wasncal::dist
