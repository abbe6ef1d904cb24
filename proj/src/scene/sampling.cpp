#include "wasncal/scene/sampling.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "wasncal/errors.hpp"

namespace wasncal::scene {

namespace {

double unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Vec2 uniform_in_box(Rng& rng, const Eigen::AlignedBox2d& box) {
  const double x = box.min().x() + (box.max().x() - box.min().x()) * unit(rng);
  const double y = box.min().y() + (box.max().y() - box.min().y()) * unit(rng);
  return {x, y};
}

Eigen::AlignedBox2d inset_box(const RoomSpec& room, double margin) {
  return Eigen::AlignedBox2d(Vec2(margin, margin), Vec2(room.length_x - margin, room.length_y - margin));
}

RoomSpec sample_room(Rng& rng, const Interval& x, const Interval& y, const Interval& t60) {
  RoomSpec room;
  room.length_x = x.sample(rng);
  room.length_y = y.sample(rng);
  room.t60 = t60.sample(rng);
  room.validate();
  return room;
}

}  // namespace

double Interval::sample(Rng& rng) const { return lo + (hi - lo) * unit(rng); }

DistanceSceneConfig DistanceSceneConfig::distance_estimator() { return {}; }

DistanceSceneConfig DistanceSceneConfig::rvector() {
  DistanceSceneConfig c;
  c.room_x = {5.0, 8.0};
  c.room_y = {4.0, 7.0};
  c.t60 = {0.1, 0.6};
  c.placement = SourcePlacement::UniformRoom;
  return c;
}

SceneSpec sample_distance_scene(Rng& rng, const DistanceSceneConfig& config) {
  if (config.distance.lo > config.distance.hi || config.distance.lo < 0.0)
    throw ConfigError("invalid distance interval");
  SceneSpec scene;
  scene.sample_rate = config.sample_rate;
  scene.room = sample_room(rng, config.room_x, config.room_y, config.t60);
  scene.out_of_range = config.oor_ratio > 0.0 && unit(rng) < config.oor_ratio;

  const auto box = inset_box(scene.room, config.wall_margin);
  if (box.isEmpty()) throw SamplingFailure("wall margin leaves no room for placement");

  ArrayNode node;
  node.orientation = 2.0 * std::numbers::pi * unit(rng);
  SourceEvent source;
  source.signal_kind = config.signal_kind;
  source.duration = config.duration;

  bool placed = false;
  for (int attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
    node.center = uniform_in_box(rng, box);
    if (config.placement == SourcePlacement::UniformRoom) {
      source.position = uniform_in_box(rng, box);
      placed = (source.position - node.center).norm() > 1e-3;
      continue;
    }
    double d = 0.0;
    if (scene.out_of_range) {
      // (lo, hi]
      d = config.oor_distance.hi - (config.oor_distance.hi - config.oor_distance.lo) * unit(rng);
    } else {
      d = config.distance.sample(rng);
    }
    const double a = 2.0 * std::numbers::pi * unit(rng);
    source.position = node.center + d * Vec2(std::cos(a), std::sin(a));
    placed = scene.room.wall_clearance(source.position) >= config.wall_margin;
  }
  if (!placed)
    throw SamplingFailure("distance scene constraints unsatisfiable after " + std::to_string(config.max_retries) +
                          " retries");

  scene.nodes.push_back(node);
  scene.sources.push_back(source);
  scene.rng_seed = rng();
  return scene;
}

std::array<Eigen::AlignedBox2d, 4> corner_regions(const RoomSpec& room, double margin, double gap) {
  const double wx = (room.length_x - 2.0 * margin - gap) / 2.0;
  const double wy = (room.length_y - 2.0 * margin - gap) / 2.0;
  if (wx <= 0.0 || wy <= 0.0) throw SamplingFailure("room too small for four node regions");
  const double x0 = margin, x1 = margin + wx + gap;
  const double y0 = margin, y1 = margin + wy + gap;
  return {Eigen::AlignedBox2d(Vec2(x0, y0), Vec2(x0 + wx, y0 + wy)),
          Eigen::AlignedBox2d(Vec2(x1, y0), Vec2(x1 + wx, y0 + wy)),
          Eigen::AlignedBox2d(Vec2(x0, y1), Vec2(x0 + wx, y1 + wy)),
          Eigen::AlignedBox2d(Vec2(x1, y1), Vec2(x1 + wx, y1 + wy))};
}

SceneSpec sample_calibration_scene(Rng& rng, const CalibrationSceneConfig& config) {
  if (config.num_nodes < 1 || config.num_nodes > 4) throw ConfigError("calibration scenes hold 1 to 4 nodes");
  if (config.num_sources < 1) throw ConfigError("calibration scenes need at least one source");
  SceneSpec scene;
  scene.sample_rate = config.sample_rate;
  scene.room = sample_room(rng, config.room_x, config.room_y, config.t60);

  const auto regions = corner_regions(scene.room, config.wall_margin, config.region_gap);
  for (int j = 0; j < config.num_nodes; ++j) {
    ArrayNode node;
    node.center = uniform_in_box(rng, regions[static_cast<std::size_t>(j)]);
    node.orientation = 2.0 * std::numbers::pi * unit(rng);
    scene.nodes.push_back(node);
  }

  const auto box = inset_box(scene.room, config.wall_margin);
  for (int i = 0; i < config.num_sources; ++i) {
    SourceEvent s;
    s.signal_kind = config.signal_kind;
    s.duration = config.duration;
    s.start = i * (config.duration + config.pause);
    // Keep sources off the array apertures.
    bool placed = false;
    for (int attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
      s.position = uniform_in_box(rng, box);
      placed = true;
      for (const auto& n : scene.nodes)
        if ((s.position - n.center).norm() < 0.1) placed = false;
    }
    if (!placed) throw SamplingFailure("could not place calibration source");
    scene.sources.push_back(s);
  }
  scene.rng_seed = rng();
  return scene;
}

}  // namespace wasncal::scene
