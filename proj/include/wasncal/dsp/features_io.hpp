#pragma once

#include <filesystem>

#include "wasncal/dsp/cdr.hpp"
#include "wasncal/json_io.hpp"

namespace wasncal::dsp {

/// Diffuseness map as a float32 F x T tensor; the sidecar records band bins,
/// window parameters and whatever provenance the caller passes in `meta`.
void write_diffuseness(const std::filesystem::path& path, const DiffusenessMap& map, const DiffusenessConfig& config,
                       json meta = json::object());
DiffusenessMap read_diffuseness(const std::filesystem::path& path);

/// MFCC matrix as a float32 23 x T tensor.
void write_mfcc(const std::filesystem::path& path, const Eigen::MatrixXd& coeffs, json meta = json::object());
Eigen::MatrixXd read_mfcc(const std::filesystem::path& path);

}  // namespace wasncal::dsp
