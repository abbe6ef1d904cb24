#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "wasncal/errors.hpp"
#include "wasncal/scene/io.hpp"
#include "wasncal/scene/render.hpp"
#include "wasncal/scene/rir.hpp"
#include "wasncal/scene/sampling.hpp"
#include "wasncal/scene/signals.hpp"

using namespace wasncal;
using namespace wasncal::scene;

namespace {

class ImpulseProvider : public SourceSignalProvider {
 public:
  Eigen::VectorXd generate(const SourceEvent& e, double fs, Rng&) override {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(std::llround(e.duration * fs)));
    x[0] = 1.0;
    return x;
  }
};

Eigen::Index argmax_abs(const Eigen::VectorXd& v) {
  Eigen::Index i = 0;
  v.cwiseAbs().maxCoeff(&i);
  return i;
}

}  // namespace

TEST_CASE("distance scene sampling respects the configured intervals") {
  auto rng = make_rng(0, "scene");
  const auto cfg = DistanceSceneConfig::distance_estimator();
  for (int i = 0; i < 200; ++i) {
    const auto s = sample_distance_scene(rng, cfg);
    CHECK(s.room.length_x >= 6.0);
    CHECK(s.room.length_x <= 7.0);
    CHECK(s.room.length_y >= 5.0);
    CHECK(s.room.length_y <= 6.0);
    CHECK(s.room.t60 >= 0.2);
    CHECK(s.room.t60 <= 0.5);
    const double d = (s.sources[0].position - s.nodes[0].center).norm();
    CHECK(d >= 0.03 - 1e-12);
    CHECK(d <= 3.0 + 1e-12);
    CHECK(s.room.wall_clearance(s.nodes[0].center) >= 0.5);
    CHECK(s.room.wall_clearance(s.sources[0].position) >= 0.5);
    CHECK_NOTHROW(s.validate());
  }
}

TEST_CASE("R-vector scene config uses the wider room and T60 ranges") {
  auto rng = make_rng(1, "scene");
  const auto cfg = DistanceSceneConfig::rvector();
  for (int i = 0; i < 100; ++i) {
    const auto s = sample_distance_scene(rng, cfg);
    CHECK(cfg.room_x.contains(s.room.length_x));
    CHECK(cfg.room_y.contains(s.room.length_y));
    CHECK(cfg.t60.contains(s.room.t60));
    CHECK(s.room.wall_clearance(s.sources[0].position) >= 0.5);
  }
}

TEST_CASE("degenerate distance interval yields exact distances") {
  auto rng = make_rng(2, "scene");
  auto cfg = DistanceSceneConfig::distance_estimator();
  cfg.distance = {1.0, 1.0};
  for (int i = 0; i < 100; ++i) {
    const auto s = sample_distance_scene(rng, cfg);
    CHECK((s.sources[0].position - s.nodes[0].center).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("unsatisfiable distance interval raises a sampling failure") {
  auto rng = make_rng(3, "scene");
  auto cfg = DistanceSceneConfig::distance_estimator();
  cfg.distance = {20.0, 25.0};
  cfg.max_retries = 50;
  CHECK_THROWS_AS(sample_distance_scene(rng, cfg), SamplingFailure);
}

TEST_CASE("out-of-range ratio matches its configured probability (chi-square, 1%)") {
  auto rng = make_rng(4, "scene");
  auto cfg = DistanceSceneConfig::distance_estimator();
  cfg.oor_ratio = 1.0 / 11.0;
  const int n = 10000;
  int oor = 0;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_distance_scene(rng, cfg);
    const double d = (s.sources[0].position - s.nodes[0].center).norm();
    if (s.out_of_range) {
      ++oor;
      CHECK(d > 3.0);
      CHECK(d <= 4.5 + 1e-12);
    } else {
      CHECK(d <= 3.0 + 1e-12);
    }
  }
  const double expected = n * cfg.oor_ratio;
  const double chi2 = std::pow(oor - expected, 2) / expected + std::pow((n - oor) - (n - expected), 2) / (n - expected);
  CHECK(chi2 < 6.635);  // chi-square(1) at the 1% level
}

TEST_CASE("calibration scenes put one node in each corner region") {
  const CalibrationSceneConfig cfg;
  auto rng = make_rng(1, "scene");
  const auto s = sample_calibration_scene(rng, cfg);
  REQUIRE(s.nodes.size() == 4);
  REQUIRE(s.sources.size() == 30);
  const auto regions = corner_regions(s.room, 0.5, 1.0);
  for (std::size_t j = 0; j < 4; ++j) {
    int hits = 0;
    for (const auto& r : regions) hits += r.contains(s.nodes[j].center) ? 1 : 0;
    CHECK(hits == 1);
    CHECK(regions[j].contains(s.nodes[j].center));
  }
}

TEST_CASE("calibration scene geometry: wall margins and pairwise node spacing over 100 scenes") {
  const CalibrationSceneConfig cfg;
  auto rng = make_rng(5, "scene");
  for (int k = 0; k < 100; ++k) {
    const auto s = sample_calibration_scene(rng, cfg);
    for (const auto& n : s.nodes) CHECK(s.room.wall_clearance(n.center) >= 0.5);
    for (const auto& src : s.sources) CHECK(s.room.wall_clearance(src.position) >= 0.5);
    for (std::size_t a = 0; a < s.nodes.size(); ++a)
      for (std::size_t b = a + 1; b < s.nodes.size(); ++b)
        CHECK((s.nodes[a].center - s.nodes[b].center).norm() >= 1.0);
    CHECK_NOTHROW(s.validate());
  }
}

TEST_CASE("array geometry: opposite microphones are 5 cm apart in the 1.5 m plane") {
  ArrayNode n;
  n.center = {2.0, 3.0};
  n.orientation = 0.7;
  for (auto [a, b] : ArrayNode::opposite_pairs()) {
    CHECK((n.mic_position(a) - n.mic_position(b)).norm() == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(n.mic_position(a).z() == 1.5);
  }
}

TEST_CASE("anechoic RIR matches the free-field Green's function") {
  RoomSpec room;  // 6 x 5 x 3
  RirOptions opt;
  opt.reflection = 0.0;
  const auto rir = simulate_rir(room, {1, 1, 1.5}, {4, 1, 1.5}, 16000.0, 400, opt);
  const Eigen::Index peak = argmax_abs(rir.taps);
  CHECK(peak == 140);
  const double green = 1.0 / (4.0 * std::numbers::pi * 3.0);
  CHECK(rir.taps[peak] == doctest::Approx(green).epsilon(0.01));
  CHECK(rir.taps[peak] * rir.taps[peak] / rir.taps.squaredNorm() > 0.9);
}

TEST_CASE("RIR reciprocity is bit-exact") {
  RoomSpec room;
  room.t60 = 0.3;
  const Vec3 a(1.2, 2.1, 1.5), b(4.7, 3.3, 1.5);
  const auto ab = simulate_rir(room, a, b, 16000.0, default_num_taps(room, 16000.0));
  const auto ba = simulate_rir(room, b, a, 16000.0, default_num_taps(room, 16000.0));
  CHECK(ab.taps == ba.taps);
}

TEST_CASE("RIR rejects positions outside the room") {
  RoomSpec room;
  CHECK_THROWS_AS(simulate_rir(room, {0.0, 1.0, 1.5}, {2, 2, 1.5}, 16000.0, 100), DomainError);
  CHECK_THROWS_AS(simulate_rir(room, {1.0, 1.0, 1.5}, {7, 2, 1.5}, 16000.0, 100), DomainError);
}

TEST_CASE("simulated RIR decays at the requested T60 (Schroeder, +-20%)") {
  RoomSpec room;
  room.t60 = 0.4;
  const auto rir = simulate_rir(room, {1.5, 1.7, 1.5}, {4.2, 3.1, 1.5}, 16000.0, default_num_taps(room, 16000.0));
  const double t60 = measure_t60(rir);
  CHECK(t60 == doctest::Approx(0.4).epsilon(0.2));
}

TEST_CASE("first arrival lies within one sample of the geometric delay for 1000 pairs") {
  auto rng = make_rng(7, "rir-arrival");
  RoomSpec room;
  room.t60 = 0.4;
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 s(uniform(rng, 0.5, 5.5), uniform(rng, 0.5, 4.5), 1.5);
    const Vec3 m(uniform(rng, 0.5, 5.5), uniform(rng, 0.5, 4.5), 1.5);
    const double d = (s - m).norm();
    if (d < 0.05) continue;
    const long expected = std::lround(16000.0 * d / room.sound_speed);
    const auto rir = simulate_rir(room, s, m, 16000.0, static_cast<int>(expected) + 24);
    Eigen::Index peak = 0;
    rir.taps.head(expected + 2).cwiseAbs().maxCoeff(&peak);
    if (std::abs(static_cast<long>(peak) - expected) > 1) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("measure_t60 recovers a synthetic exponential decay") {
  const double fs = 16000.0, t60 = 0.3;
  auto rng = make_rng(8, "decay");
  Eigen::VectorXd h = white_noise(static_cast<Eigen::Index>(fs * 0.6), rng);
  for (Eigen::Index n = 0; n < h.size(); ++n) h[n] *= std::pow(10.0, -3.0 * (n / fs) / t60);
  const double est = measure_t60(h, fs);
  CHECK(est == doctest::Approx(t60).epsilon(0.1));
  const Eigen::VectorXd scaled = 5.0 * h;
  CHECK(measure_t60(scaled, fs) == doctest::Approx(est).epsilon(1e-9));
}

TEST_CASE("measure_t60 reports an anechoic impulse as unavailable") {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(4000);
  h[100] = 1.0;
  CHECK_THROWS_AS(measure_t60(h, 16000.0), MeasurementUnavailable);
  RoomSpec room;
  RirOptions opt;
  opt.reflection = 0.0;
  const auto rir = simulate_rir(room, {1, 1, 1.5}, {4, 1, 1.5}, 16000.0, 4000, opt);
  CHECK_THROWS_AS(measure_t60(rir), MeasurementUnavailable);
}

TEST_CASE("anechoic rendering of an impulse reproduces each channel's RIR") {
  SceneSpec scene;
  scene.room.t60 = 0.3;
  ArrayNode node;
  node.center = {3.0, 2.5};
  node.orientation = 0.3;
  scene.nodes = {node};
  SourceEvent ev;
  ev.position = {1.5, 1.0};
  ev.duration = 0.1;
  scene.sources = {ev};
  RenderOptions opt;
  opt.rir.reflection = 0.0;
  opt.num_taps = 512;
  ImpulseProvider impulse;
  const auto out = render_node_signals(scene, impulse, opt);
  REQUIRE(out.size() == 1);
  for (int m = 0; m < 6; ++m) {
    const auto rir = simulate_rir(scene.room, lift(ev.position), node.mic_position(m), 16000.0, 512, opt.rir);
    CHECK((out[0].channel(m).head(512) - rir.taps).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sequential sources extend the timeline") {
  SceneSpec scene;
  scene.room.t60 = 0.2;
  ArrayNode node;
  node.center = {3.0, 2.5};
  scene.nodes = {node};
  SourceEvent a, b;
  a.position = {1.5, 1.0};
  b.position = {4.5, 3.5};
  b.start = 3.0;
  scene.sources = {a, b};
  DefaultSignalProvider provider;
  const auto out = render_node_signals(scene, provider);
  CHECK(out[0].length() >= static_cast<Eigen::Index>(6.0 * 16000) + default_num_taps(scene.room, 16000.0) - 1);
  CHECK(out[0].channels() == 6);
}

TEST_CASE("reverberant white noise stays Gaussian (kurtosis)") {
  auto rng = make_rng(9, "scene");
  const auto scene = sample_distance_scene(rng, DistanceSceneConfig::distance_estimator());
  DefaultSignalProvider provider;
  const auto out = render_node_signals(scene, provider);
  for (int m = 0; m < 6; ++m) {
    // steady-state part of the recording
    const Eigen::VectorXd x = out[0].channel(m).segment(8000, 32000);
    const double mean = x.mean();
    const Eigen::ArrayXd c = x.array() - mean;
    const double var = c.square().mean();
    const double kurt = c.square().square().mean() / (var * var);
    CHECK(std::abs(kurt - 3.0) < 0.5);
  }
}

TEST_CASE("speech-file sources need a corpus") {
  SceneSpec scene;
  ArrayNode node;
  node.center = {3.0, 2.5};
  scene.nodes = {node};
  SourceEvent ev;
  ev.position = {1.5, 1.0};
  ev.signal_kind = SignalKind::SpeechFile;
  scene.sources = {ev};
  DefaultSignalProvider provider;
  CHECK_THROWS_AS(render_node_signals(scene, provider), ConfigError);
}

TEST_CASE("speech corpus directory supplies unit-RMS excerpts") {
  const auto dir = std::filesystem::temp_directory_path() / "wasncal_corpus_test";
  std::filesystem::create_directories(dir);
  SignalBuffer wav;
  wav.samples = RowMatrix::Zero(1, 16000 * 4);
  auto rng = make_rng(10, "wav");
  wav.samples.row(0) = 0.1 * speech_surrogate(16000 * 4, 16000.0, rng).transpose();
  write_wav(dir / "a.wav", wav);
  DefaultSignalProvider provider(dir);
  CHECK(provider.corpus_size() == 1);
  SourceEvent ev;
  ev.signal_kind = SignalKind::SpeechFile;
  const auto x = provider.generate(ev, 16000.0, rng);
  CHECK(x.size() == 48000);
  CHECK(std::sqrt(x.squaredNorm() / x.size()) == doctest::Approx(1.0).epsilon(1e-9));
  std::filesystem::remove_all(dir);
}

TEST_CASE("AWGN sets the requested SNR") {
  auto rng = make_rng(11, "noise");
  SignalBuffer sig;
  sig.samples = RowMatrix(2, 48000);
  sig.samples.row(0) = white_noise(48000, rng).transpose();
  sig.samples.row(1) = 0.3 * white_noise(48000, rng).transpose();

  SUBCASE("30 dB") {
    const auto noisy = add_awgn(sig, 30.0, rng);
    CHECK(measured_snr_db(sig, noisy) == doctest::Approx(30.0).epsilon(0.1 / 30.0));
  }
  SUBCASE("infinite SNR is a no-op") {
    const auto noisy = add_awgn(sig, std::numeric_limits<double>::infinity(), rng);
    CHECK(noisy.samples == sig.samples);
  }
  SUBCASE("0 dB on a unit-power signal adds unit-power noise") {
    SignalBuffer unit;
    unit.samples = RowMatrix::Constant(1, 200000, 1.0);
    const auto noisy = add_awgn(unit, 0.0, rng);
    const double noise_power = (noisy.samples - unit.samples).squaredNorm() / 200000.0;
    CHECK(noise_power == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("zero power is a domain error") {
    SignalBuffer zero;
    zero.samples = RowMatrix::Zero(1, 100);
    CHECK_THROWS_AS(add_awgn(zero, 10.0, rng), DomainError);
  }
}

TEST_CASE("training SNRs are integers in [5, 30]") {
  auto rng = make_rng(12, "snr");
  std::vector<int> seen(31, 0);
  for (int i = 0; i < 5000; ++i) {
    const int snr = draw_training_snr_db(rng);
    REQUIRE(snr >= 5);
    REQUIRE(snr <= 30);
    ++seen[static_cast<std::size_t>(snr)];
  }
  for (int s = 5; s <= 30; ++s) CHECK(seen[static_cast<std::size_t>(s)] > 0);
}

TEST_CASE("fixed seeds reproduce scenes, RIRs and signals bit-for-bit") {
  auto run = [] {
    auto rng = make_rng(42, "scene");
    auto scene = sample_distance_scene(rng, DistanceSceneConfig::distance_estimator());
    DefaultSignalProvider provider;
    return std::make_pair(to_json(scene).dump(), render_node_signals(scene, provider)[0].samples);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("scene JSON and raw signal files round-trip") {
  auto rng = make_rng(13, "scene");
  const auto scene = sample_calibration_scene(rng, CalibrationSceneConfig{});
  const auto back = scene_from_json(to_json(scene));
  CHECK(to_json(back) == to_json(scene));

  SignalBuffer sig;
  sig.samples = RowMatrix::Random(3, 100);
  const auto path = std::filesystem::temp_directory_path() / "wasncal_sig_test.f32";
  write_signal_raw(path, sig);
  const auto read = read_signal_raw(path);
  CHECK(read.channels() == 3);
  CHECK((read.samples - sig.samples).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("node offsets shift whole recordings") {
  SceneSpec scene;
  ArrayNode a, b;
  a.center = {1.5, 1.5};
  b.center = {4.5, 3.5};
  scene.nodes = {a, b};
  SourceEvent ev;
  ev.position = {3.0, 2.5};
  ev.duration = 0.2;
  scene.sources = {ev};
  DefaultSignalProvider provider;
  const auto ref = render_node_signals(scene, provider);
  scene.node_offsets = {0, 10};
  const auto shifted = render_node_signals(scene, provider);
  CHECK(shifted[0].samples == ref[0].samples);
  CHECK((shifted[1].samples.middleCols(10, 1000) - ref[1].samples.leftCols(1000)).cwiseAbs().maxCoeff() == 0.0);
  auto rng = make_rng(14, "offsets");
  for (int o : sample_node_offsets(50, 16000.0, 0.032, rng)) CHECK(std::abs(o) <= 512);
}
