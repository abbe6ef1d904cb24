#include "wasncal/dsp/cdr.hpp"

#include "wasncal/errors.hpp"

namespace wasncal::dsp {

PsdState recursive_psd(const Spectrogram& spec_1, const Spectrogram& spec_2, double forgetting) {
  if (spec_1.values.rows() != spec_2.values.rows() || spec_1.values.cols() != spec_2.values.cols())
    throw DomainError("recursive_psd: spectrogram shapes differ");
  if (!(forgetting > 0.0 && forgetting < 1.0)) throw DomainError("forgetting factor must lie in (0, 1)");
  const Eigen::Index bins = spec_1.values.rows(), frames = spec_1.values.cols();
  PsdState s;
  s.forgetting = forgetting;
  s.auto_1.resize(bins, frames);
  s.auto_2.resize(bins, frames);
  s.cross.resize(bins, frames);
  if (frames == 0) return s;

  const auto& x1 = spec_1.values;
  const auto& x2 = spec_2.values;
  s.auto_1.col(0) = x1.col(0).cwiseAbs2();
  s.auto_2.col(0) = x2.col(0).cwiseAbs2();
  s.cross.col(0) = x1.col(0).cwiseProduct(x2.col(0).conjugate());
  const double a = forgetting, b = 1.0 - forgetting;
  for (Eigen::Index l = 1; l < frames; ++l) {
    s.auto_1.col(l) = a * s.auto_1.col(l - 1) + b * x1.col(l).cwiseAbs2();
    s.auto_2.col(l) = a * s.auto_2.col(l - 1) + b * x2.col(l).cwiseAbs2();
    s.cross.col(l) = a * s.cross.col(l - 1) + b * x1.col(l).cwiseProduct(x2.col(l).conjugate());
  }
  return s;
}

Eigen::VectorXd diffuse_coherence_curve(const StftConfig& config, double mic_spacing, double sound_speed) {
  if (!(mic_spacing > 0.0)) throw DomainError("microphone spacing must be positive");
  Eigen::VectorXd g(config.num_bins());
  for (int k = 0; k < config.num_bins(); ++k) g[k] = diffuse_coherence(config.bin_frequency(k), mic_spacing, sound_speed);
  return g;
}

Eigen::MatrixXd estimate_cdr(const PsdState& psd, const Eigen::Ref<const Eigen::VectorXd>& coherence, double cdr_max) {
  const Eigen::Index bins = psd.auto_1.rows(), frames = psd.auto_1.cols();
  if (coherence.size() != bins) throw DomainError("coherence curve length does not match bin count");
  Eigen::MatrixXd cdr(bins, frames);
  for (Eigen::Index l = 0; l < frames; ++l) {
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double p1 = psd.auto_1(k, l), p2 = psd.auto_2(k, l);
      if (p1 < kSilenceFloor || p2 < kSilenceFloor) {
        cdr(k, l) = 0.0;
        continue;
      }
      const std::complex<double> gamma_x = psd.cross(k, l) / std::sqrt(p1 * p2);
      cdr(k, l) = cdr_from_coherence(gamma_x, coherence[k], cdr_max);
    }
  }
  return cdr;
}

FrequencyBand FrequencyBand::from_hz(double lo_hz, double hi_hz, const StftConfig& config) {
  const double df = config.sample_rate / config.fft_size;
  FrequencyBand b;
  b.first_bin = static_cast<int>(std::ceil(lo_hz / df - 1e-9));
  b.last_bin = std::min(config.num_bins() - 1, static_cast<int>(std::floor(hi_hz / df + 1e-9)));
  if (b.size() <= 0) throw DomainError("empty frequency band");
  return b;
}

DiffusenessMap cdr_to_diffuseness(const Eigen::Ref<const Eigen::MatrixXd>& cdr, const FrequencyBand& band) {
  if (band.first_bin < 0 || band.last_bin >= cdr.rows() || band.size() <= 0)
    throw DomainError("band outside the CDR bin range");
  DiffusenessMap map;
  map.band = band;
  map.values = (1.0 + cdr.middleRows(band.first_bin, band.size()).array().max(0.0)).inverse().matrix();
  map.zeta = map.values.size() > 0 ? map.values.mean() : 0.0;
  return map;
}

DiffusenessMap pair_diffuseness(const Eigen::Ref<const Eigen::VectorXd>& mic_1, const Eigen::Ref<const Eigen::VectorXd>& mic_2,
                                const DiffusenessConfig& config) {
  const auto s1 = stft(mic_1, config.stft);
  const auto s2 = stft(mic_2, config.stft);
  const auto psd = recursive_psd(s1, s2, config.forgetting);
  const auto coherence = diffuse_coherence_curve(config.stft, config.mic_spacing, config.sound_speed);
  return cdr_to_diffuseness(estimate_cdr(psd, coherence, config.cdr_max), config.band());
}

}  // namespace wasncal::dsp
