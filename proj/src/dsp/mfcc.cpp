#include "wasncal/dsp/mfcc.hpp"

#include <cmath>
#include <numbers>

#include "wasncal/errors.hpp"

namespace wasncal::dsp {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Orthonormal DCT-II basis, rows = output coefficients.
Eigen::MatrixXd dct_basis(int num_coeffs, int num_inputs) {
  Eigen::MatrixXd d(num_coeffs, num_inputs);
  for (int k = 0; k < num_coeffs; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / num_inputs) : std::sqrt(2.0 / num_inputs);
    for (int n = 0; n < num_inputs; ++n) d(k, n) = scale * std::cos(std::numbers::pi * k * (n + 0.5) / num_inputs);
  }
  return d;
}

}  // namespace

Eigen::MatrixXd mel_filterbank(const MfccConfig& config) {
  const int bins = config.stft.num_bins();
  const double mel_lo = hz_to_mel(config.low_hz), mel_hi = hz_to_mel(config.high_hz);
  Eigen::VectorXd edges(config.num_filters + 2);
  for (int i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (config.num_filters + 1));
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(config.num_filters, bins);
  for (int m = 0; m < config.num_filters; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = config.stft.bin_frequency(k);
      if (f > lo && f <= mid)
        fb(m, k) = (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        fb(m, k) = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

Eigen::MatrixXd mfcc(const Eigen::Ref<const Eigen::VectorXd>& signal, const MfccConfig& config) {
  if (config.num_coeffs > config.num_filters) throw DomainError("more cepstra requested than mel filters");
  if (signal.size() < config.stft.window_length) throw DomainError("signal shorter than one MFCC frame");
  Eigen::VectorXd emphasized(signal.size());
  emphasized[0] = signal[0];
  for (Eigen::Index i = 1; i < signal.size(); ++i) emphasized[i] = signal[i] - config.pre_emphasis * signal[i - 1];

  const Spectrogram spec = stft(emphasized, config.stft);
  const Eigen::MatrixXd power = spec.values.cwiseAbs2();
  const Eigen::MatrixXd energies = mel_filterbank(config) * power;
  const Eigen::MatrixXd log_e = energies.array().max(config.log_floor).log().matrix();
  return dct_basis(config.num_coeffs, config.num_filters) * log_e;
}

}  // namespace wasncal::dsp
