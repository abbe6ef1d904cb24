#include "wasncal/scene/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "wasncal/errors.hpp"

namespace wasncal::scene {

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}
void put16(std::ofstream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

SignalBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ConfigError("not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    if (pos + 8 + len > bytes.size()) break;
    if (std::memcmp(chunk, "fmt ", 4) == 0 && len >= 16) {
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == 0xFFFE && len >= 26) format = le16(chunk + 32);  // extensible: sub-format GUID head
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = len;
    }
    pos += 8 + len + (len & 1u);
  }
  if (!data || channels == 0) throw ConfigError("WAV file lacks fmt or data chunk: " + path.string());
  const bool pcm16 = format == 1 && bits == 16;
  const bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32) throw ConfigError("unsupported WAV encoding (need 16-bit PCM or 32-bit float): " + path.string());

  const std::size_t frame_bytes = channels * (bits / 8u);
  const std::size_t frames = data_len / frame_bytes;
  SignalBuffer buf;
  buf.sample_rate = rate;
  buf.samples.resize(channels, static_cast<Eigen::Index>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_bytes + c * (bits / 8u);
      double v = 0.0;
      if (pcm16) {
        v = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        v = std::bit_cast<float>(le32(p));
      }
      buf.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(f)) = v;
    }
  }
  return buf;
}

void write_wav(const std::filesystem::path& path, const SignalBuffer& signal) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write WAV file: " + path.string());
  const auto channels = static_cast<std::uint16_t>(signal.channels());
  const auto frames = static_cast<std::uint32_t>(signal.length());
  const std::uint32_t data_len = frames * channels * 4u;
  out.write("RIFF", 4);
  put32(out, 36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(out, 16);
  put16(out, 3);
  put16(out, channels);
  put32(out, static_cast<std::uint32_t>(signal.sample_rate));
  put32(out, static_cast<std::uint32_t>(signal.sample_rate) * channels * 4u);
  put16(out, static_cast<std::uint16_t>(channels * 4u));
  put16(out, 32);
  out.write("data", 4);
  put32(out, data_len);
  for (std::uint32_t f = 0; f < frames; ++f)
    for (std::uint16_t c = 0; c < channels; ++c) put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(signal.samples(c, f))));
}

void write_signal_raw(const std::filesystem::path& path, const SignalBuffer& signal, json extra) {
  RawTensor t;
  t.shape = {signal.channels(), signal.length()};
  t.values.reserve(static_cast<std::size_t>(signal.samples.size()));
  for (Eigen::Index c = 0; c < signal.channels(); ++c)
    for (Eigen::Index i = 0; i < signal.length(); ++i) t.values.push_back(static_cast<float>(signal.samples(c, i)));
  t.meta = extra.is_object() ? std::move(extra) : json::object();
  t.meta["channels"] = signal.channels();
  t.meta["fs"] = signal.sample_rate;
  t.meta["length"] = signal.length();
  write_raw_f32(path, t);
}

SignalBuffer read_signal_raw(const std::filesystem::path& path) {
  const RawTensor t = read_raw_f32(path);
  SignalBuffer buf;
  buf.sample_rate = t.meta.at("fs").get<double>();
  const auto channels = t.meta.at("channels").get<Eigen::Index>();
  const auto length = t.meta.at("length").get<Eigen::Index>();
  buf.samples.resize(channels, length);
  std::size_t k = 0;
  for (Eigen::Index c = 0; c < channels; ++c)
    for (Eigen::Index i = 0; i < length; ++i) buf.samples(c, i) = t.values[k++];
  return buf;
}

json to_json(const RoomSpec& room) {
  return {{"length_x", room.length_x}, {"length_y", room.length_y}, {"height", room.height},
          {"t60", room.t60},           {"sound_speed", room.sound_speed}};
}

json to_json(const ArrayNode& node) {
  return {{"center", {node.center.x(), node.center.y()}}, {"orientation", node.orientation}};
}

json to_json(const SourceEvent& e) {
  return {{"position", {e.position.x(), e.position.y()}},
          {"signal_kind", to_string(e.signal_kind)},
          {"duration", e.duration},
          {"start", e.start}};
}

json to_json(const SceneSpec& scene) {
  json j;
  j["room"] = to_json(scene.room);
  j["nodes"] = json::array();
  for (const auto& n : scene.nodes) j["nodes"].push_back(to_json(n));
  j["sources"] = json::array();
  for (const auto& s : scene.sources) j["sources"].push_back(to_json(s));
  j["sample_rate"] = scene.sample_rate;
  j["rng_seed"] = scene.rng_seed;
  j["out_of_range"] = scene.out_of_range;
  j["node_offsets"] = scene.node_offsets;
  return j;
}

RoomSpec room_from_json(const json& j) {
  RoomSpec r;
  r.length_x = j.at("length_x").get<double>();
  r.length_y = j.at("length_y").get<double>();
  r.height = j.value("height", 3.0);
  r.t60 = j.at("t60").get<double>();
  r.sound_speed = j.value("sound_speed", 343.0);
  return r;
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  s.room = room_from_json(j.at("room"));
  for (const auto& n : j.at("nodes")) {
    ArrayNode node;
    node.center = {n.at("center")[0].get<double>(), n.at("center")[1].get<double>()};
    node.orientation = n.at("orientation").get<double>();
    s.nodes.push_back(node);
  }
  for (const auto& e : j.at("sources")) {
    SourceEvent ev;
    ev.position = {e.at("position")[0].get<double>(), e.at("position")[1].get<double>()};
    ev.signal_kind = signal_kind_from_string(e.value("signal_kind", std::string("white-noise")));
    ev.duration = e.value("duration", 3.0);
    ev.start = e.value("start", 0.0);
    s.sources.push_back(ev);
  }
  s.sample_rate = j.value("sample_rate", 16000.0);
  s.rng_seed = j.value("rng_seed", std::uint64_t{0});
  s.out_of_range = j.value("out_of_range", false);
  s.node_offsets = j.value("node_offsets", std::vector<int>{});
  return s;
}

}  // namespace wasncal::scene
