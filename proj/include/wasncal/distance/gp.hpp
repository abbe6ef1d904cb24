#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace wasncal::dist {

/// k(r) = exp(-(|r| / length)^gamma), unit signal variance.
template <typename Scalar>
Scalar gamma_exponential(Scalar r, Scalar length, Scalar gamma) {
  using std::abs;
  using std::exp;
  using std::pow;
  return exp(-pow(abs(r) / length, gamma));
}

struct GpHyper {
  double signal_var = 1.0;
  double length = 0.2;
  double gamma = 2.0;
  double noise_var = 1e-2;
};

struct GpFitOptions {
  std::vector<double> lengths{0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0};
  std::vector<double> gammas{1.0, 1.5, 2.0};
  /// Noise variance relative to the signal variance.
  std::vector<double> noise_ratios{1e-4, 1e-3, 1e-2, 3e-2, 1e-1, 3e-1};
  double clamp_lo = 0.03;
  double clamp_hi = 3.0;
};

/// Zero-mean GP regression of distance on averaged diffuseness.
class GpModel {
 public:
  /// Fixed hyperparameters.
  GpModel(Eigen::VectorXd x, Eigen::VectorXd y, GpHyper hyper, double clamp_lo = 0.03, double clamp_hi = 3.0);

  double predict(double x) const;
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double log_marginal_likelihood() const { return lml_; }
  const GpHyper& hyper() const { return hyper_; }
  double jitter() const { return jitter_; }

  /// Unit-variance kernel matrix between two input sets.
  static Eigen::MatrixXd kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                                double length, double gamma);

 private:
  Eigen::VectorXd x_, alpha_;
  GpHyper hyper_;
  double clamp_lo_, clamp_hi_;
  double lml_ = 0.0;
  double jitter_ = 0.0;
};

/// Grid search over length, gamma and noise ratio; the signal variance takes
/// its closed-form maximum-likelihood value for each grid point.
GpModel gp_fit(const Eigen::Ref<const Eigen::VectorXd>& zeta, const Eigen::Ref<const Eigen::VectorXd>& distance,
               const GpFitOptions& options = {});

}  // namespace wasncal::dist
