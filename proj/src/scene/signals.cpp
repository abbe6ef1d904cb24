#include "wasncal/scene/signals.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "wasncal/errors.hpp"
#include "wasncal/scene/io.hpp"

namespace wasncal::scene {

namespace {

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Eigen::VectorXd fft_convolve(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() == 0 || b.size() == 0) return Eigen::VectorXd();
  const Eigen::Index out_len = a.size() + b.size() - 1;
  if (std::min(a.size(), b.size()) <= 32) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(out_len);
    const auto& shorter = a.size() <= b.size() ? a : b;
    const auto& longer = a.size() <= b.size() ? b : a;
    for (Eigen::Index k = 0; k < shorter.size(); ++k)
      if (shorter[k] != 0.0) out.segment(k, longer.size()) += shorter[k] * longer;
    return out;
  }
  const Eigen::Index n = next_pow2(out_len);
  Eigen::FFT<double> fft;
  std::vector<double> pa(static_cast<std::size_t>(n), 0.0), pb(static_cast<std::size_t>(n), 0.0);
  std::copy(a.data(), a.data() + a.size(), pa.begin());
  std::copy(b.data(), b.data() + b.size(), pb.begin());
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, pa);
  fft.fwd(fb, pb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> out;
  fft.inv(out, fa);
  Eigen::VectorXd result(out_len);
  for (Eigen::Index i = 0; i < out_len; ++i) result[i] = out[static_cast<std::size_t>(i)];
  return result;
}

Eigen::VectorXd white_noise(Eigen::Index length, Rng& rng) {
  Eigen::VectorXd x(length);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < length; ++i) x[i] = normal(rng);
  return x;
}

Eigen::VectorXd speech_surrogate(Eigen::Index length, double fs, Rng& rng) {
  Eigen::VectorXd x = white_noise(length, rng);
  // Paul Kellet's economy pink filter.
  double b0 = 0, b1 = 0, b2 = 0;
  for (Eigen::Index i = 0; i < length; ++i) {
    const double w = x[i];
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    x[i] = b0 + b1 + b2 + w * 0.1848;
  }

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double phase = 2.0 * std::numbers::pi * u01(rng);
  const double syllable_hz = 4.0;

  // Alternate bursts (0.4..1.5 s) and pauses (0.1..0.5 s); start with a burst.
  Eigen::VectorXd gate = Eigen::VectorXd::Zero(length);
  Eigen::Index pos = 0;
  bool talking = true;
  while (pos < length) {
    const double dur = talking ? 0.4 + 1.1 * u01(rng) : 0.1 + 0.4 * u01(rng);
    const Eigen::Index n = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(dur * fs));
    const Eigen::Index end = std::min(length, pos + n);
    if (talking) gate.segment(pos, end - pos).setOnes();
    pos = end;
    talking = !talking;
  }
  // 10 ms raised-cosine ramps on the gate edges.
  const Eigen::Index ramp = static_cast<Eigen::Index>(0.01 * fs);
  Eigen::VectorXd smooth = gate;
  if (ramp > 1) {
    Eigen::VectorXd prefix = Eigen::VectorXd::Zero(length + 1);
    for (Eigen::Index i = 0; i < length; ++i) prefix[i + 1] = prefix[i] + gate[i];
    for (Eigen::Index i = 0; i < length; ++i) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, i - ramp / 2);
      const Eigen::Index hi = std::min(length - 1, i + ramp / 2);
      smooth[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }
  }

  for (Eigen::Index i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double env = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * syllable_hz * t + phase));
    x[i] *= env * smooth[i];
  }
  const double rms = std::sqrt(x.squaredNorm() / std::max<double>(1.0, static_cast<double>(length)));
  if (rms > 0.0) x /= rms;
  return x;
}

DefaultSignalProvider::DefaultSignalProvider(std::optional<std::filesystem::path> corpus_dir) {
  if (!corpus_dir) return;
  if (!std::filesystem::is_directory(*corpus_dir))
    throw ConfigError("speech corpus directory not found: " + corpus_dir->string());
  for (const auto& entry : std::filesystem::recursive_directory_iterator(*corpus_dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") corpus_.push_back(entry.path());
  }
  std::sort(corpus_.begin(), corpus_.end());
}

Eigen::VectorXd DefaultSignalProvider::generate(const SourceEvent& event, double fs, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(std::llround(event.duration * fs));
  switch (event.signal_kind) {
    case SignalKind::WhiteNoise:
      return white_noise(n, rng);
    case SignalKind::SpeechSurrogate:
      return speech_surrogate(n, fs, rng);
    case SignalKind::SpeechFile: {
      if (corpus_.empty()) throw ConfigError("speech-file source requested but no speech corpus is configured");
      std::uniform_int_distribution<std::size_t> pick(0, corpus_.size() - 1);
      const auto wav = read_wav(corpus_[pick(rng)]);
      if (wav.sample_rate != fs) throw ConfigError("speech corpus sample rate does not match the scene");
      Eigen::VectorXd dry = wav.channel(0);
      Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
      if (dry.size() > n) {
        std::uniform_int_distribution<Eigen::Index> off(0, dry.size() - n);
        out = dry.segment(off(rng), n);
      } else {
        out.head(dry.size()) = dry;
      }
      const double rms = std::sqrt(out.squaredNorm() / std::max<double>(1.0, static_cast<double>(n)));
      if (rms > 0.0) out /= rms;
      return out;
    }
  }
  throw ConfigError("unhandled signal kind");
}

SignalBuffer add_awgn(const SignalBuffer& signal, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return signal;
  if (!std::isfinite(snr_db)) throw DomainError("SNR must be finite or +infinity");
  SignalBuffer out = signal;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index c = 0; c < signal.channels(); ++c) {
    const double power = signal.samples.row(c).squaredNorm() / static_cast<double>(signal.length());
    if (!(power > 0.0)) throw DomainError("cannot set an SNR on a zero-power channel");
    const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    for (Eigen::Index i = 0; i < signal.length(); ++i) out.samples(c, i) += sigma * normal(rng);
  }
  return out;
}

int draw_training_snr_db(Rng& rng, int lo_db, int hi_db) {
  return std::uniform_int_distribution<int>(lo_db, hi_db)(rng);
}

double measured_snr_db(const SignalBuffer& clean, const SignalBuffer& noisy) {
  const double ps = clean.samples.squaredNorm();
  const double pn = (noisy.samples - clean.samples).squaredNorm();
  return 10.0 * std::log10(ps / pn);
}

}  // namespace wasncal::scene
