#include "wasncal/dsp/stft.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "wasncal/errors.hpp"

namespace wasncal::dsp {

Eigen::Index StftConfig::num_frames(Eigen::Index num_samples) const {
  if (num_samples < window_length) return 0;
  return 1 + (num_samples - window_length) / shift;
}

Eigen::VectorXd blackman_window(int length) {
  Eigen::VectorXd w(length);
  if (length == 1) {
    w[0] = 1.0;
    return w;
  }
  const double denom = length - 1;
  for (int n = 0; n < length; ++n) {
    const double x = 2.0 * std::numbers::pi * n / denom;
    w[n] = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
  }
  return w;
}

Spectrogram stft(const Eigen::Ref<const Eigen::VectorXd>& signal, const StftConfig& config) {
  if (config.window_length <= 0 || config.shift <= 0 || config.fft_size < config.window_length)
    throw DomainError("invalid STFT configuration");
  const Eigen::Index frames = config.num_frames(signal.size());
  if (frames == 0) throw DomainError("signal shorter than one STFT window");

  const Eigen::VectorXd window = blackman_window(config.window_length);
  Spectrogram spec;
  spec.config = config;
  spec.values.resize(config.num_bins(), frames);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<std::size_t>(config.fft_size), 0.0);
  std::vector<std::complex<double>> bins;
  for (Eigen::Index l = 0; l < frames; ++l) {
    const Eigen::Index offset = l * config.shift;
    for (int n = 0; n < config.window_length; ++n) frame[static_cast<std::size_t>(n)] = signal[offset + n] * window[n];
    fft.fwd(bins, frame);
    for (int k = 0; k < config.num_bins(); ++k) spec.values(k, l) = bins[static_cast<std::size_t>(k)];
  }
  return spec;
}

}  // namespace wasncal::dsp
