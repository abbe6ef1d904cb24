#pragma once

#include <optional>

#include <Eigen/Dense>

#include "wasncal/scene/types.hpp"

namespace wasncal::scene {

struct Rir {
  Eigen::VectorXd taps;
  double sample_rate = 16000.0;
  Vec3 source_pos = Vec3::Zero();
  Vec3 mic_pos = Vec3::Zero();
};

struct RirOptions {
  /// Maximum image order (sum of reflection counts over the three axes);
  /// negative means every image arriving within the RIR length.
  int max_order = -1;
  /// Overrides the T60-derived wall reflection coefficient (0 gives the
  /// anechoic response).
  std::optional<double> reflection = std::nullopt;
};

/// Uniform wall reflection coefficient from Eyring's reverberation formula.
double reflection_coefficient(const RoomSpec& room);

/// Smallest admissible RIR length, ceil(fs * t60).
int default_num_taps(const RoomSpec& room, double fs);

/// Image-method room impulse response between two points of a shoebox room.
///
/// Each image contributes beta^k / (4 pi r) at delay r/c, placed with a
/// 16-tap Hann-windowed sinc (fractional delay quantized to 1/256 sample).
/// Contributions are accumulated in 64-bit fixed point, so the result does not
/// depend on the image enumeration order and source/microphone swaps yield
/// bit-identical responses.
Rir simulate_rir(const RoomSpec& room, const Vec3& source_pos, const Vec3& mic_pos, double fs, int num_taps,
                 const RirOptions& options = {});

/// Reverberation time from Schroeder backward integration: linear fit of the
/// energy decay curve between -5 dB and -25 dB, extrapolated to -60 dB.
/// Throws MeasurementUnavailable when the decay range is not covered.
double measure_t60(const Eigen::Ref<const Eigen::VectorXd>& taps, double fs);
inline double measure_t60(const Rir& rir) { return measure_t60(rir.taps, rir.sample_rate); }

}  // namespace wasncal::scene
