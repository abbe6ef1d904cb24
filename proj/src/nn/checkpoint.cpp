#include "wasncal/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace wasncal::nn {

namespace {
constexpr char kMagic[8] = {'W', 'A', 'S', 'N', 'C', 'K', 'P', 'T'};
}

void save_checkpoint(const std::filesystem::path& path, Network& net, const json& extra) {
  json header;
  header["version"] = kCheckpointVersion;
  header["architecture"] = net.architecture();
  header["seed"] = net.seed();
  header["extra"] = extra;
  header["parameters"] = json::array();
  std::vector<char> block;
  std::size_t offset = 0;
  for (const Parameter* p : net.parameters()) {
    header["parameters"].push_back(
        {{"name", p->name}, {"shape", p->value.shape}, {"offset", offset}, {"trainable", p->trainable}});
    for (Eigen::Index i = 0; i < p->value.size(); ++i) append_f64_le(block, p->value.data[i]);
    offset += static_cast<std::size_t>(p->value.size());
  }
  const std::string text = header.dump();
  std::vector<char> out(kMagic, kMagic + 8);
  append_u64_le(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), block.begin(), block.end());

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw ConfigError("not a checkpoint file: " + path.string());
  const std::uint64_t hlen = read_u64_le(bytes.data() + 8);
  if (16 + hlen > bytes.size()) throw ConfigError("truncated checkpoint header: " + path.string());
  LoadedCheckpoint out;
  out.header = json::parse(std::string(bytes.data() + 16, hlen));
  if (out.header.at("version").get<int>() != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version in " + path.string());
  out.network = std::make_unique<Network>(out.header.at("architecture"), out.header.at("seed").get<std::uint64_t>());

  const char* block = bytes.data() + 16 + hlen;
  const std::size_t block_len = bytes.size() - 16 - hlen;
  const auto params = out.network->parameters();
  const auto& entries = out.header.at("parameters");
  if (entries.size() != params.size()) throw ConfigError("checkpoint parameter count does not match architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != params[i]->name || e.at("shape").get<Shape>() != params[i]->value.shape)
      throw ConfigError("checkpoint parameter " + e.at("name").get<std::string>() + " does not match architecture");
    const std::size_t off = e.at("offset").get<std::size_t>();
    if ((off + static_cast<std::size_t>(params[i]->value.size())) * 8 > block_len)
      throw ConfigError("truncated checkpoint parameter block: " + path.string());
    for (Eigen::Index k = 0; k < params[i]->value.size(); ++k)
      params[i]->value.data[k] = read_f64_le(block + (off + static_cast<std::size_t>(k)) * 8);
  }
  return out;
}

void copy_parameters(Network& src, Network& dst) {
  const auto a = src.parameters();
  const auto b = dst.parameters();
  if (a.size() != b.size()) throw DomainError("copy_parameters: architectures differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->value.shape != b[i]->value.shape) throw DomainError("copy_parameters: shape mismatch at " + a[i]->name);
    b[i]->value.data = a[i]->value.data;
  }
}

}  // namespace wasncal::nn
