#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace wasncal {

using json = nlohmann::json;

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& doc);

/// Hex digest of the canonical (sorted-key, compact) dump of a JSON document.
std::string config_hash(const json& doc);

/// Dense row-major float32 tensor file: `<path>` holds little-endian IEEE-754
/// floats, `<path>.json` the sidecar with at least {"shape": [...]} plus any
/// caller metadata.
struct RawTensor {
  std::vector<std::int64_t> shape;
  std::vector<float> values;
  json meta;
};

void write_raw_f32(const std::filesystem::path& path, const RawTensor& tensor);
RawTensor read_raw_f32(const std::filesystem::path& path);

/// Row-major matrix <-> RawTensor helpers (rows x cols shape).
RawTensor to_raw(const Eigen::Ref<const Eigen::MatrixXd>& m, json meta = json::object());
Eigen::MatrixXd matrix_from_raw(const RawTensor& t);

void append_f64_le(std::vector<char>& out, double v);
double read_f64_le(const char* bytes);
void append_u64_le(std::vector<char>& out, std::uint64_t v);
std::uint64_t read_u64_le(const char* bytes);

}  // namespace wasncal
