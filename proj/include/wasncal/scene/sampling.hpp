#pragma once

#include <array>

#include <Eigen/Geometry>

#include "wasncal/random.hpp"
#include "wasncal/scene/types.hpp"

namespace wasncal::scene {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  /// Uniform draw from [lo, hi]; a degenerate interval returns lo.
  double sample(Rng& rng) const;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

enum class SourcePlacement { AroundNode, UniformRoom };

/// Single node + single source scenes used to train and evaluate the
/// distance estimator and the room-embedding extractor.
struct DistanceSceneConfig {
  Interval room_x{6.0, 7.0};
  Interval room_y{5.0, 6.0};
  Interval t60{0.2, 0.5};
  Interval distance{0.03, 3.0};
  /// Out-of-range distances are drawn from (lo, hi].
  Interval oor_distance{3.0, 4.5};
  /// Probability that a scene is an out-of-range example.
  double oor_ratio = 0.0;
  SourcePlacement placement = SourcePlacement::AroundNode;
  double wall_margin = 0.5;
  int max_retries = 2000;
  SignalKind signal_kind = SignalKind::WhiteNoise;
  double duration = 3.0;
  double sample_rate = 16000.0;

  static DistanceSceneConfig distance_estimator();
  /// Rooms [5,8]x[4,7] m, T60 in [0.1,0.6] s, sources anywhere in the room.
  static DistanceSceneConfig rvector();
};

SceneSpec sample_distance_scene(Rng& rng, const DistanceSceneConfig& config);

/// Four nodes, one per corner region, and N sequential sources.
struct CalibrationSceneConfig {
  Interval room_x{6.0, 7.0};
  Interval room_y{5.0, 6.0};
  Interval t60{0.2, 0.5};
  int num_nodes = 4;
  int num_sources = 30;
  double wall_margin = 0.5;
  double region_gap = 1.0;
  SignalKind signal_kind = SignalKind::SpeechSurrogate;
  double duration = 3.0;
  /// Silence between consecutive source events.
  double pause = 0.0;
  double sample_rate = 16000.0;
  int max_retries = 2000;
};

SceneSpec sample_calibration_scene(Rng& rng, const CalibrationSceneConfig& config);

/// Node placement regions: the wall-inset rectangle split into four corner
/// boxes separated by `gap` along both axes. Order: (low x, low y),
/// (high x, low y), (low x, high y), (high x, high y).
std::array<Eigen::AlignedBox2d, 4> corner_regions(const RoomSpec& room, double margin, double gap);

}  // namespace wasncal::scene
