#include "wasncal/calib/doa.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include "wasncal/errors.hpp"

namespace wasncal::calib {

SrpPhatDoa::SrpPhatDoa(SrpPhatConfig config) : config_(config) {
  if (!(config_.grid_step_deg > 0.0) || config_.f_hi <= config_.f_lo || config_.onset_ratio < 0.0)
    throw ConfigError("srp-phat: bad grid, band or onset ratio");
  for (const auto& [p, q] : scene::ArrayNode::opposite_pairs()) pairs_.emplace_back(p, q);
  if (config_.adjacent_pairs)
    for (int m = 0; m < scene::ArrayNode::kNumMics; ++m) pairs_.emplace_back(m, (m + 1) % scene::ArrayNode::kNumMics);
  const auto steps = static_cast<Eigen::Index>(std::lround(360.0 / config_.grid_step_deg));
  grid_.resize(steps);
  for (Eigen::Index g = 0; g < steps; ++g) grid_[g] = wrap_angle(-std::numbers::pi + (g + 1) * config_.grid_step_deg * kDeg);
}

Eigen::VectorXd SrpPhatDoa::steered_power(const scene::SignalBuffer& node_signal, Eigen::Index begin,
                                          Eigen::Index end) const {
  if (node_signal.channels() != scene::ArrayNode::kNumMics) throw DomainError("srp-phat: expected six channels");
  begin = std::max<Eigen::Index>(0, begin);
  end = std::min(end, node_signal.length());
  if (end - begin < config_.stft.window_length) throw DomainError("srp-phat: segment shorter than one window");

  dsp::StftConfig stft_config = config_.stft;
  stft_config.sample_rate = node_signal.sample_rate;
  std::vector<dsp::Spectrogram> spec;
  for (int m = 0; m < scene::ArrayNode::kNumMics; ++m)
    spec.push_back(dsp::stft(node_signal.samples.row(m).segment(begin, end - begin).transpose(), stft_config));

  const int k_lo = static_cast<int>(std::ceil(config_.f_lo * stft_config.fft_size / stft_config.sample_rate));
  const int k_hi = std::min(stft_config.num_bins() - 1,
                            static_cast<int>(std::floor(config_.f_hi * stft_config.fft_size / stft_config.sample_rate)));
  const Eigen::Index bins = k_hi - k_lo + 1;

  const Eigen::Index frames = spec[0].num_frames();
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keep =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(bins, frames, true);
  if (config_.onset_ratio > 0.0) {
    // onset gate on the array power, against an exponential average of the past
    constexpr double kSmoothing = 0.7;
    for (Eigen::Index k = 0; k < bins; ++k) {
      double average = 0.0;
      for (Eigen::Index l = 0; l < frames; ++l) {
        double power = 0.0;
        for (const auto& s : spec) power += std::norm(s.values(k_lo + k, l));
        keep(k, l) = l > 0 && power > config_.onset_ratio * average;
        average = l == 0 ? power : kSmoothing * average + (1.0 - kSmoothing) * power;
      }
    }
  }

  // PHAT-weighted cross spectra, averaged over the kept bins
  std::vector<Eigen::VectorXcd> cross;
  double used = 0.0;
  for (const auto& [p, q] : pairs_) {
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(bins);
    for (Eigen::Index l = 0; l < frames; ++l)
      for (Eigen::Index k = 0; k < bins; ++k) {
        if (!keep(k, l)) continue;
        const std::complex<double> c = spec[p].values(k_lo + k, l) * std::conj(spec[q].values(k_lo + k, l));
        const double mag = std::abs(c);
        if (mag > 1e-20) {
          g[k] += c / mag;
          used += 1.0;
        }
      }
    cross.push_back(g);
  }
  Eigen::VectorXd power = Eigen::VectorXd::Zero(grid_.size());
  if (used == 0.0) return power;

  for (Eigen::Index a = 0; a < grid_.size(); ++a) {
    const Eigen::Vector2d u(std::cos(grid_[a]), std::sin(grid_[a]));
    double s = 0.0;
    for (std::size_t pi = 0; pi < pairs_.size(); ++pi) {
      const auto [p, q] = pairs_[pi];
      // arrival time of mic p minus that of mic q for a plane wave from u
      const double dt =
          -(scene::ArrayNode::local_mic_offset(p) - scene::ArrayNode::local_mic_offset(q)).dot(u) / config_.sound_speed;
      for (Eigen::Index k = 0; k < bins; ++k) {
        const double w = 2.0 * std::numbers::pi * stft_config.bin_frequency(k_lo + static_cast<int>(k));
        s += (cross[pi][k] * std::polar(1.0, w * dt)).real();
      }
    }
    power[a] = s / used;
  }
  return power;
}

std::optional<double> SrpPhatDoa::estimate(const scene::SignalBuffer& node_signal, Eigen::Index begin,
                                           Eigen::Index end) const {
  const Eigen::VectorXd power = steered_power(node_signal, begin, end);
  Eigen::Index best = 0;
  const double peak = power.maxCoeff(&best);
  if (!(peak >= config_.min_peak)) return std::nullopt;
  const Eigen::Index n = power.size();
  const double left = power[(best + n - 1) % n], right = power[(best + 1) % n];
  const double curvature = left - 2.0 * peak + right;
  double offset = 0.0;
  if (curvature < 0.0) offset = std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
  return wrap_angle(grid_[best] + offset * config_.grid_step_deg * kDeg);
}

DoAObservationSet estimate_observations(const scene::SceneSpec& scene, const std::vector<scene::SignalBuffer>& signals,
                                        const DoaEstimator& estimator, double skip_s) {
  if (signals.size() != scene.nodes.size()) throw DomainError("estimate_observations: one signal per node expected");
  const auto k = static_cast<Eigen::Index>(scene.nodes.size());
  const auto n = static_cast<Eigen::Index>(scene.sources.size());
  DoAObservationSet obs;
  obs.azimuths = Eigen::MatrixXd::Zero(k, n);
  obs.valid = Mask::Constant(k, n, false);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& sig = signals[static_cast<std::size_t>(j)];
    const Eigen::Index offset = scene.node_offsets.empty() ? 0 : scene.node_offsets[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& ev = scene.sources[static_cast<std::size_t>(i)];
      const Eigen::Index begin = std::lround((ev.start + skip_s) * sig.sample_rate) + offset;
      const Eigen::Index end = std::lround((ev.start + ev.duration) * sig.sample_rate) + offset;
      std::optional<double> phi;
      try {
        phi = estimator.estimate(sig, begin, end);
      } catch (const DomainError&) {
        phi.reset();
      }
      if (phi) {
        obs.azimuths(j, i) = *phi;
        obs.valid(j, i) = true;
      }
    }
  }
  return obs;
}

double von_mises_kappa(double std_rad) {
  if (std_rad < 0.0) throw DomainError("von_mises_kappa: negative standard deviation");
  if (std_rad == 0.0) return std::numeric_limits<double>::infinity();
  const double target = std::exp(-0.5 * std_rad * std_rad);  // mean resultant length
  auto resultant = [](double kappa) {
    if (kappa > 500.0) return 1.0 - 0.5 / kappa - 0.125 / (kappa * kappa) - 0.125 / (kappa * kappa * kappa);
    return std::cyl_bessel_i(1.0, kappa) / std::cyl_bessel_i(0.0, kappa);
  };
  double lo = 1e-8, hi = 1e8;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (resultant(mid) < target ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

double sample_von_mises(double kappa, Rng& rng) {
  if (std::isinf(kappa)) return 0.0;
  if (kappa < 1e-8) return uniform(rng, -std::numbers::pi, std::numbers::pi);
  // the envelope constants lose precision here; the law is Gaussian to well below 0.01 deg
  if (kappa > 1e7) return standard_normal(rng) / std::sqrt(kappa);
  // Best and Fisher (1979) wrapped Cauchy envelope
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  while (true) {
    const double u1 = uniform(rng, 0.0, 1.0), u2 = uniform(rng, 0.0, 1.0), u3 = uniform(rng, 0.0, 1.0);
    const double z = std::cos(std::numbers::pi * u1);
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0)
      return (u3 > 0.5 ? 1.0 : -1.0) * std::acos(std::clamp(f, -1.0, 1.0));
  }
}

DoAObservationSet synth_doa_observations(const Geometry& truth, const SynthDoaConfig& config, Rng& rng) {
  if (config.outlier_fraction < 0.0 || config.outlier_fraction > 1.0)
    throw ConfigError("outlier fraction must lie in [0, 1]");
  const double kappa = von_mises_kappa(config.noise_std_deg * kDeg);
  DoAObservationSet obs;
  obs.azimuths.resize(truth.num_nodes(), truth.num_sources());
  obs.valid = Mask::Constant(truth.num_nodes(), truth.num_sources(), true);
  for (Eigen::Index i = 0; i < truth.num_sources(); ++i)
    for (Eigen::Index j = 0; j < truth.num_nodes(); ++j)
      obs.azimuths(j, i) = wrap_angle(truth.azimuth(j, i) + sample_von_mises(kappa, rng));
  if (config.outlier_fraction > 0.0) {
    // exactly round(fraction * K * N) entries, chosen without replacement
    const Eigen::Index total = obs.azimuths.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(total));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto count = static_cast<std::size_t>(std::lround(config.outlier_fraction * static_cast<double>(total)));
    for (std::size_t c = 0; c < count; ++c)
      obs.azimuths.data()[idx[c]] = wrap_angle(uniform(rng, -std::numbers::pi, std::numbers::pi));
  }
  return obs;
}

std::vector<double> doa_errors(const DoAObservationSet& est, const Geometry& truth) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < est.num_sources(); ++i)
    for (Eigen::Index j = 0; j < est.num_nodes(); ++j)
      if (est.valid(j, i)) out.push_back(wrap_angle(est.azimuths(j, i) - truth.azimuth(j, i)));
  return out;
}

}  // namespace wasncal::calib
