#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "wasncal/dsp/cdr.hpp"
#include "wasncal/dsp/features_io.hpp"
#include "wasncal/dsp/mfcc.hpp"
#include "wasncal/dsp/stft.hpp"
#include "wasncal/errors.hpp"
#include "wasncal/scene/render.hpp"
#include "wasncal/scene/signals.hpp"

using namespace wasncal;
using namespace wasncal::dsp;

TEST_CASE("STFT frame count and bin layout") {
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(48000);
  const auto s = stft(x);
  CHECK(s.num_frames() == 298);
  CHECK(s.num_bins() == 257);
  CHECK(StftConfig{}.num_frames(48000) == 1 + (48000 - 400) / 160);
}

TEST_CASE("a 1 kHz tone peaks at bin 32") {
  Eigen::VectorXd x(16000);
  for (Eigen::Index n = 0; n < x.size(); ++n) x[n] = std::sin(2.0 * std::numbers::pi * 1000.0 * n / 16000.0);
  const auto s = stft(x);
  const Eigen::VectorXd energy = s.values.cwiseAbs2().rowwise().sum();
  Eigen::Index peak = 0;
  energy.maxCoeff(&peak);
  CHECK(peak == 32);
}

TEST_CASE("STFT of silence is zero and short signals are rejected") {
  const auto s = stft(Eigen::VectorXd::Zero(4000));
  CHECK(s.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(stft(Eigen::VectorXd::Zero(399)), DomainError);
}

TEST_CASE("Parseval holds per frame") {
  auto rng = make_rng(1, "parseval");
  const Eigen::VectorXd x = scene::white_noise(4000, rng);
  const StftConfig cfg;
  const auto s = stft(x, cfg);
  const Eigen::VectorXd w = blackman_window(cfg.window_length);
  for (Eigen::Index l = 0; l < s.num_frames(); ++l) {
    const double time_energy = (x.segment(l * cfg.shift, cfg.window_length).cwiseProduct(w)).squaredNorm();
    // expand the one-sided spectrum to the full 512 bins
    const auto col = s.values.col(l);
    double freq_energy = std::norm(col[0]) + std::norm(col[cfg.fft_size / 2]);
    for (int k = 1; k < cfg.fft_size / 2; ++k) freq_energy += 2.0 * std::norm(col[k]);
    freq_energy /= cfg.fft_size;
    CHECK(std::abs(freq_energy - time_energy) <= 1e-6 * time_energy);
  }
}

TEST_CASE("recursive PSD follows the geometric series") {
  const double lambda = 0.95;
  Spectrogram s;
  s.values = Eigen::MatrixXcd::Constant(3, 150, std::complex<double>(0.0, 2.0));
  s.values.col(0).setConstant(std::complex<double>(0.2, 0.0));
  const auto psd = recursive_psd(s, s, lambda);
  for (Eigen::Index l = 0; l < 150; ++l) {
    const double expected = std::pow(lambda, l) * 0.04 + (1.0 - std::pow(lambda, l)) * 4.0;
    CHECK(psd.auto_1(1, l) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(std::abs(psd.auto_1(0, 100) - 4.0) < 0.04);
  // identical inputs: cross PSD is real and equals the auto PSD
  CHECK((psd.cross.real() - psd.auto_1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(psd.cross.imag().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("recursive PSD: vanishing forgetting is the periodogram, bad shapes rejected") {
  auto rng = make_rng(2, "psd");
  const auto s1 = stft(scene::white_noise(3000, rng));
  const auto s2 = stft(scene::white_noise(3000, rng));
  const auto psd = recursive_psd(s1, s2, 1e-12);
  CHECK((psd.auto_1 - s1.values.cwiseAbs2()).cwiseAbs().maxCoeff() < 1e-6 * s1.values.cwiseAbs2().maxCoeff());
  Spectrogram shorter;
  shorter.values = s1.values.leftCols(3);
  CHECK_THROWS_AS(recursive_psd(s1, shorter, 0.95), DomainError);
  CHECK_THROWS_AS(recursive_psd(s1, s2, 1.0), DomainError);
}

TEST_CASE("diffuse coherence closed forms") {
  CHECK(diffuse_coherence(0.0, 0.05, 343.0) == 1.0);
  CHECK(std::abs(diffuse_coherence(3430.0, 0.05, 343.0)) < 1e-15);
  CHECK(diffuse_coherence(1715.0, 0.05, 343.0) == doctest::Approx(2.0 / std::numbers::pi).epsilon(1e-12));
  CHECK_THROWS_AS(diffuse_coherence_curve(StftConfig{}, 0.0), DomainError);
}

TEST_CASE("CDR estimator limits") {
  SUBCASE("measured coherence equal to the diffuse model gives CDR 0") {
    for (double g : {0.9, 0.6366, 0.1, -0.2, 0.0}) CHECK(std::abs(cdr_from_coherence(std::complex<double>(g, 0.0), g)) < 1e-8);
  }
  SUBCASE("fully coherent input clamps at CDR_max") {
    for (double phase : {0.0, 0.5, 2.0}) {
      const auto gx = std::polar(1.0, phase);
      CHECK(cdr_from_coherence(gx, 0.3) == kDefaultCdrMax);
    }
  }
  SUBCASE("diffuseness mapping") {
    Eigen::MatrixXd cdr(3, 1);
    cdr << 0.0, 1.0, kDefaultCdrMax;
    const auto d = cdr_to_diffuseness(cdr, FrequencyBand{0, 2});
    CHECK(d.values(0, 0) == 1.0);
    CHECK(d.values(1, 0) == 0.5);
    CHECK(d.values(2, 0) == doctest::Approx(1e-4).epsilon(1e-3));
  }
  SUBCASE("silent bins count as diffuse") {
    PsdState psd;
    psd.auto_1 = Eigen::MatrixXd::Zero(2, 2);
    psd.auto_2 = Eigen::MatrixXd::Zero(2, 2);
    psd.cross = Eigen::MatrixXcd::Zero(2, 2);
    const auto cdr = estimate_cdr(psd, Eigen::VectorXd::Constant(2, 0.5));
    CHECK(cdr.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("analysis band covers 125 Hz to 3.5 kHz") {
  const StftConfig cfg;
  const auto band = FrequencyBand::from_hz(125.0, 3500.0, cfg);
  CHECK(band.first_bin == 4);
  CHECK(band.last_bin == 112);
  CHECK(band.size() == 109);
  for (int k = band.first_bin; k <= band.last_bin; ++k) {
    CHECK(cfg.bin_frequency(k) >= 125.0);
    CHECK(cfg.bin_frequency(k) <= 3500.0);
  }
  // the 5 cm pair's coherence null (3430 Hz) is inside the band
  CHECK(cfg.bin_frequency(band.last_bin) > 3430.0);
}

TEST_CASE("diffuseness stays in [0, 1] for arbitrary input, including near the coherence null") {
  auto rng = make_rng(3, "diffuse");
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd a = scene::white_noise(8000, rng);
    Eigen::VectorXd b = scene::white_noise(8000, rng);
    b = 0.5 * a + (trial * 0.3) * b;  // partly correlated
    const auto map = pair_diffuseness(a, b);
    CHECK(map.values.allFinite());
    CHECK(map.values.minCoeff() >= 0.0);
    CHECK(map.values.maxCoeff() <= 1.0);
    CHECK(map.zeta >= 0.0);
    CHECK(map.zeta <= 1.0);
  }
  // random complex coherences, including |Gamma| > 1 from round-off
  for (int i = 0; i < 10000; ++i) {
    const std::complex<double> g(uniform(rng, -1.05, 1.05), uniform(rng, -1.05, 1.05));
    const double gd = uniform(rng, -0.3, 1.0);
    const double c = cdr_from_coherence(g, gd);
    CHECK(std::isfinite(c));
    CHECK(c >= 0.0);
    CHECK(c <= kDefaultCdrMax);
  }
}

TEST_CASE("anechoic point source is almost fully coherent") {
  scene::SceneSpec sc;
  sc.room.t60 = 0.3;
  scene::ArrayNode node;
  node.center = {3.0, 2.5};
  node.orientation = 0.4;
  sc.nodes = {node};
  scene::SourceEvent ev;
  ev.position = {1.6, 1.4};
  sc.sources = {ev};
  sc.rng_seed = 5;
  scene::RenderOptions opt;
  opt.rir.reflection = 0.0;
  opt.num_taps = 512;
  scene::DefaultSignalProvider provider;
  const auto out = scene::render_node_signals(sc, provider, opt);
  for (auto [a, b] : scene::ArrayNode::opposite_pairs()) {
    const auto map = pair_diffuseness(out[0].channel(a), out[0].channel(b));
    CHECK(map.zeta <= 0.2);
  }
}

TEST_CASE("MFCC shape and log-energy behaviour") {
  auto rng = make_rng(4, "mfcc");
  // white noise keeps every frame above the log floor
  const Eigen::VectorXd x = scene::white_noise(48000, rng);
  const auto c = mfcc(x);
  CHECK(c.rows() == 23);
  CHECK(c.cols() == 298);

  const auto c2 = mfcc(2.0 * x);
  const Eigen::VectorXd shift0 = c2.row(0) - c.row(0);
  CHECK(shift0.maxCoeff() - shift0.minCoeff() < 1e-6);
  CHECK(shift0[0] > 0.0);
  CHECK((c2.bottomRows(22) - c.bottomRows(22)).cwiseAbs().maxCoeff() < 1e-6);

  const auto z = mfcc(Eigen::VectorXd::Zero(4000));
  for (Eigen::Index l = 1; l < z.cols(); ++l) CHECK((z.col(l) - z.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(mfcc(Eigen::VectorXd::Zero(100)), DomainError);
}

TEST_CASE("feature files round-trip with their sidecars") {
  auto rng = make_rng(5, "io");
  const auto map = pair_diffuseness(scene::white_noise(4000, rng), scene::white_noise(4000, rng));
  const auto path = std::filesystem::temp_directory_path() / "wasncal_diff.f32";
  write_diffuseness(path, map, DiffusenessConfig{}, {{"scene", 7}});
  const auto back = read_diffuseness(path);
  CHECK(back.band.first_bin == 4);
  CHECK(back.values.rows() == 109);
  CHECK((back.values - map.values).cwiseAbs().maxCoeff() < 1e-6);
  const auto meta = read_json_file(path.string() + ".json");
  CHECK(meta.at("scene") == 7);
  CHECK(meta.at("window_length") == 400);
}
