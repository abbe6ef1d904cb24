#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "wasncal/dsp/stft.hpp"

namespace wasncal::dsp {

inline constexpr double kDefaultCdrMax = 1e4;
/// Auto-PSD level under which a bin counts as silent (CDR 0, diffuseness 1).
inline constexpr double kSilenceFloor = 1e-12;

/// Recursively averaged auto- and cross-power spectral densities of a
/// microphone pair; rows = bins, columns = frames.
struct PsdState {
  Eigen::MatrixXd auto_1;
  Eigen::MatrixXd auto_2;
  Eigen::MatrixXcd cross;
  double forgetting = 0.95;
};

/// Phi(l) = lambda Phi(l-1) + (1 - lambda) X1(l) conj(X2(l)), started from
/// the first frame's instantaneous products.
PsdState recursive_psd(const Spectrogram& spec_1, const Spectrogram& spec_2, double forgetting = 0.95);

/// Spherically isotropic (diffuse) field coherence sin(w d / c) / (w d / c).
template <typename Scalar>
Scalar diffuse_coherence(Scalar frequency, Scalar mic_spacing, Scalar sound_speed) {
  const Scalar x = Scalar(2) * std::numbers::pi_v<Scalar> * frequency * mic_spacing / sound_speed;
  if (x == Scalar(0)) return Scalar(1);
  return std::sin(x) / x;
}

Eigen::VectorXd diffuse_coherence_curve(const StftConfig& config, double mic_spacing, double sound_speed = 343.0);

/// DoA-independent CDR estimate from the measured complex coherence and the
/// diffuse-field coherence, clamped to [0, cdr_max].
template <typename Scalar>
Scalar cdr_from_coherence(std::complex<Scalar> gamma_x, Scalar gamma_diff, Scalar cdr_max = Scalar(kDefaultCdrMax)) {
  const Scalar mag2 = std::norm(gamma_x);
  const Scalar re = gamma_x.real();
  const Scalar denom = mag2 - Scalar(1);
  if (denom >= -Scalar(1e-12)) return cdr_max;  // fully coherent
  const Scalar gd2 = gamma_diff * gamma_diff;
  const Scalar radicand = gd2 * re * re - gd2 * mag2 + gd2 - Scalar(2) * gamma_diff * re + mag2;
  const Scalar root = std::sqrt(std::max(radicand, Scalar(0)));
  const Scalar cdr = (gamma_diff * re - mag2 - root) / denom;
  if (!(cdr > Scalar(0))) return Scalar(0);
  return std::min(cdr, cdr_max);
}

/// Per-bin CDR over all bins and frames.
Eigen::MatrixXd estimate_cdr(const PsdState& psd, const Eigen::Ref<const Eigen::VectorXd>& coherence,
                             double cdr_max = kDefaultCdrMax);

/// Inclusive bin range.
struct FrequencyBand {
  int first_bin = 0;
  int last_bin = -1;

  int size() const { return last_bin - first_bin + 1; }
  /// Bins whose center frequency lies in [lo_hz, hi_hz].
  static FrequencyBand from_hz(double lo_hz, double hi_hz, const StftConfig& config);
};

/// Diffuseness D = 1 / (1 + CDR) restricted to a band, plus its mean zeta.
struct DiffusenessMap {
  Eigen::MatrixXd values;  // band bins x frames
  FrequencyBand band;
  double zeta = 0.0;

  /// Per-bin average over frames (the MLP input feature).
  Eigen::VectorXd time_average() const { return values.rowwise().mean(); }
};

DiffusenessMap cdr_to_diffuseness(const Eigen::Ref<const Eigen::MatrixXd>& cdr, const FrequencyBand& band);

struct DiffusenessConfig {
  StftConfig stft;
  double forgetting = 0.95;
  double band_lo_hz = 125.0;
  double band_hi_hz = 3500.0;
  double mic_spacing = 0.05;
  double sound_speed = 343.0;
  double cdr_max = kDefaultCdrMax;

  FrequencyBand band() const { return FrequencyBand::from_hz(band_lo_hz, band_hi_hz, stft); }
};

/// STFT -> recursive PSD -> CDR -> diffuseness for one microphone pair.
DiffusenessMap pair_diffuseness(const Eigen::Ref<const Eigen::VectorXd>& mic_1,
                                const Eigen::Ref<const Eigen::VectorXd>& mic_2, const DiffusenessConfig& config = {});

}  // namespace wasncal::dsp
