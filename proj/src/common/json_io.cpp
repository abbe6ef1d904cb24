#include "wasncal/json_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "wasncal/errors.hpp"
#include "wasncal/random.hpp"

namespace wasncal {

namespace {

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

std::filesystem::path sidecar(const std::filesystem::path& p) {
  auto s = p;
  s += ".json";
  return s;
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open JSON file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write JSON file: " + path.string());
  out << std::setw(2) << doc << '\n';
}

std::string config_hash(const json& doc) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(doc.dump());
  return s.str();
}

void write_raw_f32(const std::filesystem::path& path, const RawTensor& tensor) {
  std::int64_t n = 1;
  for (auto d : tensor.shape) n *= d;
  if (n != static_cast<std::int64_t>(tensor.values.size()))
    throw DomainError("raw tensor shape does not match value count");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write tensor file: " + path.string());
  for (float v : tensor.values) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    bits = byteswap_if_big(bits);
    out.write(reinterpret_cast<const char*>(&bits), 4);
  }
  json meta = tensor.meta.is_object() ? tensor.meta : json::object();
  meta["shape"] = tensor.shape;
  meta["dtype"] = "float32-le";
  write_json_file(sidecar(path), meta);
}

RawTensor read_raw_f32(const std::filesystem::path& path) {
  RawTensor t;
  t.meta = read_json_file(sidecar(path));
  t.shape = t.meta.at("shape").get<std::vector<std::int64_t>>();
  std::int64_t n = 1;
  for (auto d : t.shape) n *= d;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open tensor file: " + path.string());
  t.values.resize(static_cast<std::size_t>(n));
  for (auto& v : t.values) {
    std::uint32_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), 4)) throw ConfigError("truncated tensor file: " + path.string());
    v = std::bit_cast<float>(byteswap_if_big(bits));
  }
  return t;
}

RawTensor to_raw(const Eigen::Ref<const Eigen::MatrixXd>& m, json meta) {
  RawTensor t;
  t.shape = {m.rows(), m.cols()};
  t.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.values.push_back(static_cast<float>(m(r, c)));
  t.meta = std::move(meta);
  return t;
}

Eigen::MatrixXd matrix_from_raw(const RawTensor& t) {
  if (t.shape.size() != 2) throw DomainError("expected a 2-D tensor");
  Eigen::MatrixXd m(t.shape[0], t.shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.values[k++];
  return m;
}

void append_f64_le(std::vector<char>& out, double v) {
  auto bits = byteswap_if_big(std::bit_cast<std::uint64_t>(v));
  const char* p = reinterpret_cast<const char*>(&bits);
  out.insert(out.end(), p, p + 8);
}

double read_f64_le(const char* bytes) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, bytes, 8);
  return std::bit_cast<double>(byteswap_if_big(bits));
}

void append_u64_le(std::vector<char>& out, std::uint64_t v) {
  v = byteswap_if_big(v);
  const char* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + 8);
}

std::uint64_t read_u64_le(const char* bytes) {
  std::uint64_t v = 0;
  std::memcpy(&v, bytes, 8);
  return byteswap_if_big(v);
}

}  // namespace wasncal
