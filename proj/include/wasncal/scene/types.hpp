#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace wasncal::scene {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Height of the plane holding every node and source.
inline constexpr double kPlaneHeight = 1.5;

/// Rectangular (shoebox) room with a single broadband reverberation time.
struct RoomSpec {
  double length_x = 6.0;
  double length_y = 5.0;
  double height = 3.0;
  double t60 = 0.4;
  double sound_speed = 343.0;

  /// Throws DomainError when dimensions or T60 violate the room invariants.
  void validate() const;
  Vec3 dimensions() const { return {length_x, length_y, height}; }
  /// Distance from a plane position to the closest side wall.
  double wall_clearance(const Vec2& p) const;
  bool contains_strictly(const Vec3& p) const;
};

/// Circular six-microphone array lying in the z = 1.5 m plane.
///
/// Microphone m sits at radius 2.5 cm and angle `orientation + m * 60 deg`,
/// so microphones m and m+3 form an opposite pair 5 cm apart.
struct ArrayNode {
  static constexpr int kNumMics = 6;
  static constexpr double kRadius = 0.025;

  Vec2 center = Vec2::Zero();
  double orientation = 0.0;

  /// Offset of microphone m from the center in the node's local frame.
  static Vec2 local_mic_offset(int m);
  /// Offset of microphone m from the center in room coordinates.
  Vec2 mic_offset(int m) const;
  Vec3 mic_position(int m) const;
  static constexpr std::array<std::pair<int, int>, 3> opposite_pairs() { return {{{0, 3}, {1, 4}, {2, 5}}}; }
  static constexpr double opposite_spacing() { return 2.0 * kRadius; }
};

enum class SignalKind { WhiteNoise, SpeechFile, SpeechSurrogate };

std::string to_string(SignalKind kind);
SignalKind signal_kind_from_string(const std::string& s);

struct SourceEvent {
  Vec2 position = Vec2::Zero();
  SignalKind signal_kind = SignalKind::WhiteNoise;
  double duration = 3.0;
  double start = 0.0;
};

struct SceneSpec {
  RoomSpec room;
  std::vector<ArrayNode> nodes;
  std::vector<SourceEvent> sources;
  double sample_rate = 16000.0;
  std::uint64_t rng_seed = 0;
  /// True when the source-node distance was drawn from the out-of-range interval.
  bool out_of_range = false;
  /// Per-node constant sample offsets (rough synchronization); empty means none.
  std::vector<int> node_offsets;

  /// Throws DomainError when the wall margins or the one-active-source rule is broken.
  void validate(double wall_margin = 0.5) const;
  /// Samples covered by the source timeline (without RIR tail).
  std::int64_t timeline_samples() const;
};

inline Vec3 lift(const Vec2& p, double z = kPlaneHeight) { return {p.x(), p.y(), z}; }

}  // namespace wasncal::scene
