#include "wasncal/distance/gp.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <optional>

#include "wasncal/errors.hpp"

namespace wasncal::dist {

namespace {

// Cholesky with escalating diagonal jitter; empty when even the largest fails.
std::optional<Eigen::LLT<Eigen::MatrixXd>> robust_llt(Eigen::MatrixXd k, double& jitter_used) {
  const double scale = k.diagonal().mean();
  jitter_used = 0.0;
  for (double j : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4}) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += j * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      jitter_used = j * scale;
      return llt;
    }
  }
  return std::nullopt;
}

}  // namespace

Eigen::MatrixXd GpModel::kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                                double length, double gamma) {
  Eigen::MatrixXd k(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) k(i, j) = gamma_exponential(a[i] - b[j], length, gamma);
  return k;
}

GpModel::GpModel(Eigen::VectorXd x, Eigen::VectorXd y, GpHyper hyper, double clamp_lo, double clamp_hi)
    : x_(std::move(x)), hyper_(hyper), clamp_lo_(clamp_lo), clamp_hi_(clamp_hi) {
  if (x_.size() != y.size() || x_.size() == 0) throw DomainError("gp: empty or mismatched training data");
  if (!(hyper.gamma > 0.0 && hyper.gamma <= 2.0)) throw DomainError("gp: gamma must lie in (0, 2]");
  Eigen::MatrixXd k = hyper.signal_var * kernel(x_, x_, hyper.length, hyper.gamma);
  k.diagonal().array() += hyper.noise_var;
  auto llt = robust_llt(k, jitter_);
  if (!llt) throw DomainError("gp: kernel matrix is singular even after jitter");
  alpha_ = llt->solve(y);
  const double n = static_cast<double>(y.size());
  const double logdet = 2.0 * llt->matrixL().toDenseMatrix().diagonal().array().log().sum();
  lml_ = -0.5 * y.dot(alpha_) - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

double GpModel::predict(double x) const {
  Eigen::VectorXd q(1);
  q[0] = x;
  return predict(q)[0];
}

Eigen::VectorXd GpModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd mean = hyper_.signal_var * kernel(x, x_, hyper_.length, hyper_.gamma) * alpha_;
  return mean.cwiseMax(clamp_lo_).cwiseMin(clamp_hi_);
}

GpModel gp_fit(const Eigen::Ref<const Eigen::VectorXd>& zeta, const Eigen::Ref<const Eigen::VectorXd>& distance,
               const GpFitOptions& options) {
  if (zeta.size() != distance.size()) throw DomainError("gp_fit: length mismatch");
  if (zeta.size() < 10) throw DomainError("gp_fit needs at least 10 training pairs");
  const double n = static_cast<double>(zeta.size());
  double best = -std::numeric_limits<double>::infinity();
  GpHyper best_hyper;
  for (double length : options.lengths)
    for (double gamma : options.gammas) {
      const Eigen::MatrixXd base = GpModel::kernel(zeta, zeta, length, gamma);
      for (double ratio : options.noise_ratios) {
        Eigen::MatrixXd c = base;
        c.diagonal().array() += ratio;
        double jitter = 0.0;
        auto llt = robust_llt(c, jitter);
        if (!llt) continue;
        // K = s2 (C + ratio I): the likelihood is maximized at s2 = y' C^-1 y / n
        const double quad = distance.dot(llt->solve(distance));
        const double s2 = quad / n;
        const double logdet_c = 2.0 * llt->matrixL().toDenseMatrix().diagonal().array().log().sum();
        const double lml = -0.5 * n - 0.5 * (logdet_c + n * std::log(s2)) - 0.5 * n * std::log(2.0 * std::numbers::pi);
        if (lml > best) {
          best = lml;
          best_hyper = {s2, length, gamma, ratio * s2};
        }
      }
    }
  if (!std::isfinite(best)) throw DomainError("gp_fit: every grid point produced a singular kernel");
  return GpModel(zeta, distance, best_hyper, options.clamp_lo, options.clamp_hi);
}

}  // namespace wasncal::dist
