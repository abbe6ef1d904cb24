#pragma once

#include <vector>

#include "wasncal/scene/rir.hpp"
#include "wasncal/scene/signals.hpp"
#include "wasncal/scene/types.hpp"

namespace wasncal::scene {

struct RenderOptions {
  /// RIR length in taps; 0 selects ceil(fs * t60).
  int num_taps = 0;
  RirOptions rir;
};

/// Reverberant six-channel recordings for every node of the scene.
///
/// Channel m of node j is the sum over source events of (dry signal * RIR),
/// each event starting at its scheduled sample. Dry signals are drawn from the
/// stream ("signal", i) of the scene seed. If `scene.node_offsets` is set, the
/// whole recording of node j is delayed by that many samples (negative values
/// advance it); the buffer length is the same for every node.
std::vector<SignalBuffer> render_node_signals(const SceneSpec& scene, SourceSignalProvider& provider,
                                              const RenderOptions& options = {});

/// Draws per-node constant offsets uniform in +-max_offset_s (rough
/// synchronization model).
std::vector<int> sample_node_offsets(std::size_t num_nodes, double fs, double max_offset_s, Rng& rng);

}  // namespace wasncal::scene
