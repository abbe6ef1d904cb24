#include "wasncal/scene/render.hpp"

#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

#include "wasncal/errors.hpp"

namespace wasncal::scene {

namespace {

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

std::vector<SignalBuffer> render_node_signals(const SceneSpec& scene, SourceSignalProvider& provider,
                                              const RenderOptions& options) {
  scene.room.validate();
  if (scene.nodes.empty() || scene.sources.empty()) throw DomainError("scene needs nodes and sources");
  if (!scene.node_offsets.empty() && scene.node_offsets.size() != scene.nodes.size())
    throw DomainError("node offset count does not match node count");

  const double fs = scene.sample_rate;
  const int taps = options.num_taps > 0 ? options.num_taps : default_num_taps(scene.room, fs);
  const Eigen::Index total = scene.timeline_samples() + taps - 1;

  std::vector<SignalBuffer> out(scene.nodes.size());
  for (auto& buf : out) {
    buf.sample_rate = fs;
    buf.samples = RowMatrix::Zero(ArrayNode::kNumMics, total);
  }

  Eigen::FFT<double> fft;
  for (std::size_t i = 0; i < scene.sources.size(); ++i) {
    const auto& src = scene.sources[i];
    auto rng = make_rng(scene.rng_seed, "signal", i);
    const Eigen::VectorXd dry = provider.generate(src, fs, rng);
    const Eigen::Index start = static_cast<Eigen::Index>(std::llround(src.start * fs));
    const Eigen::Index conv_len = dry.size() + taps - 1;
    const Eigen::Index nfft = next_pow2(conv_len);

    std::vector<double> pad(static_cast<std::size_t>(nfft), 0.0);
    std::copy(dry.data(), dry.data() + dry.size(), pad.begin());
    std::vector<std::complex<double>> dry_spec, rir_spec;
    fft.fwd(dry_spec, pad);

    const Vec3 source_pos = lift(src.position);
    for (std::size_t j = 0; j < scene.nodes.size(); ++j) {
      for (int m = 0; m < ArrayNode::kNumMics; ++m) {
        const Rir rir = simulate_rir(scene.room, source_pos, scene.nodes[j].mic_position(m), fs, taps, options.rir);
        std::fill(pad.begin(), pad.end(), 0.0);
        std::copy(rir.taps.data(), rir.taps.data() + rir.taps.size(), pad.begin());
        fft.fwd(rir_spec, pad);
        for (std::size_t k = 0; k < rir_spec.size(); ++k) rir_spec[k] *= dry_spec[k];
        std::vector<double> wet;
        fft.inv(wet, rir_spec);
        const Eigen::Index n = std::min(conv_len, total - start);
        for (Eigen::Index t = 0; t < n; ++t) out[j].samples(m, start + t) += wet[static_cast<std::size_t>(t)];
      }
    }
  }

  if (!scene.node_offsets.empty()) {
    for (std::size_t j = 0; j < out.size(); ++j) {
      const int shift = scene.node_offsets[j];
      if (shift == 0) continue;
      RowMatrix shifted = RowMatrix::Zero(out[j].samples.rows(), total);
      for (Eigen::Index t = 0; t < total; ++t) {
        const Eigen::Index src_t = t - shift;
        if (src_t >= 0 && src_t < total) shifted.col(t) = out[j].samples.col(src_t);
      }
      out[j].samples = std::move(shifted);
    }
  }
  return out;
}

std::vector<int> sample_node_offsets(std::size_t num_nodes, double fs, double max_offset_s, Rng& rng) {
  const int max_off = static_cast<int>(std::floor(max_offset_s * fs));
  std::uniform_int_distribution<int> pick(-max_off, max_off);
  std::vector<int> offsets(num_nodes);
  for (auto& o : offsets) o = pick(rng);
  return offsets;
}

}  // namespace wasncal::scene
