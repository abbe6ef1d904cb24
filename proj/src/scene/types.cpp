#include "wasncal/scene/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wasncal/errors.hpp"

namespace wasncal::scene {

void RoomSpec::validate() const {
  if (!(length_x > 1.0 && length_y > 1.0)) throw DomainError("room side lengths must exceed 1 m");
  if (height != 3.0) throw DomainError("room height must be 3 m");
  if (!(t60 >= 0.05 && t60 <= 2.0)) throw DomainError("t60 must lie in [0.05, 2.0] s");
  if (!(sound_speed > 0.0)) throw DomainError("sound speed must be positive");
}

double RoomSpec::wall_clearance(const Vec2& p) const {
  return std::min({p.x(), length_x - p.x(), p.y(), length_y - p.y()});
}

bool RoomSpec::contains_strictly(const Vec3& p) const {
  return p.x() > 0.0 && p.x() < length_x && p.y() > 0.0 && p.y() < length_y && p.z() > 0.0 && p.z() < height;
}

Vec2 ArrayNode::local_mic_offset(int m) {
  const double a = m * std::numbers::pi / 3.0;
  return {kRadius * std::cos(a), kRadius * std::sin(a)};
}

Vec2 ArrayNode::mic_offset(int m) const {
  const double a = orientation + m * std::numbers::pi / 3.0;
  return {kRadius * std::cos(a), kRadius * std::sin(a)};
}

Vec3 ArrayNode::mic_position(int m) const { return lift(center + mic_offset(m)); }

std::string to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::WhiteNoise:
      return "white-noise";
    case SignalKind::SpeechFile:
      return "speech-file";
    case SignalKind::SpeechSurrogate:
      return "speech-surrogate";
  }
  return "unknown";
}

SignalKind signal_kind_from_string(const std::string& s) {
  if (s == "white-noise" || s == "noise") return SignalKind::WhiteNoise;
  if (s == "speech-file") return SignalKind::SpeechFile;
  if (s == "speech-surrogate" || s == "speech") return SignalKind::SpeechSurrogate;
  throw ConfigError("unknown signal kind: " + s);
}

void SceneSpec::validate(double wall_margin) const {
  room.validate();
  if (nodes.empty()) throw DomainError("scene needs at least one node");
  if (sources.empty()) throw DomainError("scene needs at least one source");
  for (const auto& n : nodes)
    if (room.wall_clearance(n.center) < wall_margin - 1e-12) throw DomainError("node violates wall margin");
  for (const auto& s : sources)
    if (room.wall_clearance(s.position) < wall_margin - 1e-12) throw DomainError("source violates wall margin");
  std::vector<std::pair<double, double>> spans;
  for (const auto& s : sources) spans.emplace_back(s.start, s.start + s.duration);
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i)
    if (spans[i].first < spans[i - 1].second - 1e-12) throw DomainError("source events overlap in time");
}

std::int64_t SceneSpec::timeline_samples() const {
  double end = 0.0;
  for (const auto& s : sources) end = std::max(end, s.start + s.duration);
  return static_cast<std::int64_t>(std::llround(end * sample_rate));
}

}  // namespace wasncal::scene
