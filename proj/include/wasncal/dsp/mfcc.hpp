#pragma once

#include <Eigen/Dense>

#include "wasncal/dsp/stft.hpp"

namespace wasncal::dsp {

struct MfccConfig {
  StftConfig stft;
  double pre_emphasis = 0.97;
  int num_filters = 40;
  double low_hz = 0.0;
  double high_hz = 8000.0;
  int num_coeffs = 23;
  double log_floor = 1e-10;
};

/// Triangular HTK-mel filterbank, rows = filters, columns = one-sided bins.
Eigen::MatrixXd mel_filterbank(const MfccConfig& config);

/// Cepstra of a mono signal, rows = coefficients (c0 first), columns = frames.
Eigen::MatrixXd mfcc(const Eigen::Ref<const Eigen::VectorXd>& signal, const MfccConfig& config = {});

}  // namespace wasncal::dsp
