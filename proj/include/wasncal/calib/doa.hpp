#pragma once

#include <optional>

#include "wasncal/calib/types.hpp"
#include "wasncal/dsp/stft.hpp"
#include "wasncal/random.hpp"
#include "wasncal/scene/signals.hpp"

namespace wasncal::calib {

/// Pluggable azimuth estimator for a single node and a single active source.
class DoaEstimator {
 public:
  virtual ~DoaEstimator() = default;
  /// Azimuth in the node's local frame from samples [begin, end) of the six
  /// channels; empty when no coherent source is found.
  virtual std::optional<double> estimate(const scene::SignalBuffer& node_signal, Eigen::Index begin,
                                         Eigen::Index end) const = 0;
};

struct SrpPhatConfig {
  dsp::StftConfig stft;
  /// Steering over all pairs at once tolerates the aliasing of single pairs
  /// above a few kHz.
  double f_lo = 200.0;
  double f_hi = 6000.0;
  double grid_step_deg = 1.0;
  bool adjacent_pairs = true;
  /// A bin enters the average only when its power exceeds this multiple of
  /// the recursive average of earlier frames, which favours onsets where the
  /// direct path dominates the reverberation. 0 uses every bin.
  double onset_ratio = 8.0;
  /// Normalized steered power in [-1, 1] below which the estimate is rejected.
  double min_peak = 0.05;
  double sound_speed = 343.0;
};

/// Steered response power over PHAT-weighted cross spectra of microphone
/// pairs, searched on an azimuth grid with a parabolic refinement of the peak.
class SrpPhatDoa : public DoaEstimator {
 public:
  explicit SrpPhatDoa(SrpPhatConfig config = {});
  std::optional<double> estimate(const scene::SignalBuffer& node_signal, Eigen::Index begin,
                                 Eigen::Index end) const override;
  /// Normalized steered power over the grid (for diagnostics and tests).
  Eigen::VectorXd steered_power(const scene::SignalBuffer& node_signal, Eigen::Index begin, Eigen::Index end) const;
  const Eigen::VectorXd& grid() const { return grid_; }

 private:
  SrpPhatConfig config_;
  std::vector<std::pair<int, int>> pairs_;
  Eigen::VectorXd grid_;
};

/// Runs the estimator on every (node, source event) of a rendered scene. The
/// first `skip_s` seconds of each event are left out so the previous event's
/// reverberant tail does not leak in.
DoAObservationSet estimate_observations(const scene::SceneSpec& scene, const std::vector<scene::SignalBuffer>& signals,
                                        const DoaEstimator& estimator, double skip_s = 0.1);

struct SynthDoaConfig {
  double noise_std_deg = 0.0;
  /// Fraction of entries replaced by uniform angles.
  double outlier_fraction = 0.0;
};

/// Concentration of the von Mises law whose circular standard deviation
/// sqrt(-2 ln R) equals `std_rad`.
double von_mises_kappa(double std_rad);

/// One von Mises draw centered at zero (Best and Fisher).
double sample_von_mises(double kappa, Rng& rng);

/// Exact geometric azimuths plus von Mises noise and uniform outliers.
DoAObservationSet synth_doa_observations(const Geometry& truth, const SynthDoaConfig& config, Rng& rng);

/// Wrapped angular errors of the valid entries of `est` against `truth`.
std::vector<double> doa_errors(const DoAObservationSet& est, const Geometry& truth);

}  // namespace wasncal::calib
