#pragma once

#include <Eigen/Dense>

namespace wasncal::dsp {

/// 25 ms Blackman window, 10 ms shift, 512-point FFT at 16 kHz.
struct StftConfig {
  int window_length = 400;
  int shift = 160;
  int fft_size = 512;
  double sample_rate = 16000.0;

  int num_bins() const { return fft_size / 2 + 1; }
  double bin_frequency(int k) const { return k * sample_rate / fft_size; }
  /// 1 + floor((n - window) / shift); zero when the signal is shorter than one window.
  Eigen::Index num_frames(Eigen::Index num_samples) const;
};

/// One-sided spectrogram, rows = frequency bins k, columns = frames l.
struct Spectrogram {
  Eigen::MatrixXcd values;
  StftConfig config;

  Eigen::Index num_bins() const { return values.rows(); }
  Eigen::Index num_frames() const { return values.cols(); }
};

/// Symmetric Blackman window.
Eigen::VectorXd blackman_window(int length);

/// Throws DomainError for signals shorter than one window.
Spectrogram stft(const Eigen::Ref<const Eigen::VectorXd>& signal, const StftConfig& config = {});

}  // namespace wasncal::dsp
