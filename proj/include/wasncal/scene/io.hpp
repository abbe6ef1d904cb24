#pragma once

#include <filesystem>

#include "wasncal/json_io.hpp"
#include "wasncal/scene/signals.hpp"
#include "wasncal/scene/types.hpp"

namespace wasncal::scene {

/// Reads 16-bit PCM or 32-bit float WAV files (any channel count).
SignalBuffer read_wav(const std::filesystem::path& path);
/// Writes 32-bit IEEE float WAV.
void write_wav(const std::filesystem::path& path, const SignalBuffer& signal);

/// Raw little-endian float32 samples (channel-major) plus a JSON sidecar
/// holding {channels, fs, length}.
void write_signal_raw(const std::filesystem::path& path, const SignalBuffer& signal, json extra = json::object());
SignalBuffer read_signal_raw(const std::filesystem::path& path);

json to_json(const RoomSpec& room);
json to_json(const ArrayNode& node);
json to_json(const SourceEvent& event);
json to_json(const SceneSpec& scene);
RoomSpec room_from_json(const json& j);
SceneSpec scene_from_json(const json& j);

}  // namespace wasncal::scene
