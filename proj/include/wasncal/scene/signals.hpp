#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wasncal/random.hpp"
#include "wasncal/scene/types.hpp"

namespace wasncal::scene {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multichannel sample-synchronous signal block, one row per channel.
struct SignalBuffer {
  RowMatrix samples;
  double sample_rate = 16000.0;

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index length() const { return samples.cols(); }
  Eigen::VectorXd channel(Eigen::Index c) const { return samples.row(c).transpose(); }
};

/// Full linear convolution through a zero-padded FFT.
Eigen::VectorXd fft_convolve(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

Eigen::VectorXd white_noise(Eigen::Index length, Rng& rng);

/// Speech-like surrogate: pink noise under a 4 Hz syllabic envelope, with
/// bursts separated by random pauses; unit RMS over the whole signal.
Eigen::VectorXd speech_surrogate(Eigen::Index length, double fs, Rng& rng);

/// Produces the dry mono excitation of a source event.
class SourceSignalProvider {
 public:
  virtual ~SourceSignalProvider() = default;
  virtual Eigen::VectorXd generate(const SourceEvent& event, double fs, Rng& rng) = 0;
};

/// White noise, the speech surrogate, or excerpts from a directory of mono
/// WAV files (searched recursively, sorted by path).
class DefaultSignalProvider : public SourceSignalProvider {
 public:
  explicit DefaultSignalProvider(std::optional<std::filesystem::path> corpus_dir = std::nullopt);
  Eigen::VectorXd generate(const SourceEvent& event, double fs, Rng& rng) override;
  std::size_t corpus_size() const { return corpus_.size(); }

 private:
  std::vector<std::filesystem::path> corpus_;
};

/// Adds per-channel independent white Gaussian noise with variance chosen so
/// that 10 log10(P_signal / P_noise) = snr_db, P_signal measured over the full
/// channel. An infinite snr_db returns the input unchanged.
SignalBuffer add_awgn(const SignalBuffer& signal, double snr_db, Rng& rng);

/// Training-time SNR: an integer number of dB, uniform over [lo_db, hi_db].
int draw_training_snr_db(Rng& rng, int lo_db = 5, int hi_db = 30);

/// Measured SNR of `noisy` against the clean reference, in dB (all channels pooled).
double measured_snr_db(const SignalBuffer& clean, const SignalBuffer& noisy);

}  // namespace wasncal::scene
