#pragma once

#include <filesystem>
#include <memory>

#include "wasncal/nn/network.hpp"

namespace wasncal::nn {

/// Checkpoint layout:
///   8 bytes  magic "WASNCKPT"
///   u64 LE   header length in bytes
///   header   JSON {"version", "architecture", "seed", "parameters": [{name,
///            shape, offset, trainable}], "extra": caller data}
///   f64 LE   every parameter and buffer, concatenated in header order
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, Network& net, const json& extra = json::object());

struct LoadedCheckpoint {
  std::unique_ptr<Network> network;
  json header;
};

/// Rebuilds the network from the stored architecture and loads its values.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Copies all parameter values (including buffers) from src into dst.
void copy_parameters(Network& src, Network& dst);

}  // namespace wasncal::nn
