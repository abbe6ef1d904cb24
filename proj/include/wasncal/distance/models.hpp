#pragma once

#include <cstdint>

#include "wasncal/nn/network.hpp"

namespace wasncal::dist {

using Eigen::Index;

struct MlpOptions {
  Index features = 109;
  bool use_rvector = false;
  Index rvector_width = 512;
  Index hidden = 1024;
  int hidden_layers = 3;
  double dropout = 0.5;
  Index num_classes = 32;
};

/// Where the CRNN halves the time axis. The consistent reading pools (4 x 2)
/// twice; the deferred reading keeps T through the second conv block, pooling
/// (4 x 1) then (4 x 4). Both end at floor(T/4) frames.
enum class CrnnTimePooling { Consistent, Deferred };

struct CrnnOptions {
  Index features = 109;
  Index frames = 298;
  bool use_rvector = false;
  Index rvector_width = 512;
  /// Multiplies every channel / unit count (1.0 = published widths).
  double width_scale = 1.0;
  Index num_classes = 32;
  CrnnTimePooling time_pooling = CrnnTimePooling::Consistent;
};

struct RvectorOptions {
  Index mfcc = 23;
  Index frames = 298;
  Index num_rir_classes = 50;
  double width_scale = 1.0;
};

json mlp_architecture(const MlpOptions& options);
json crnn_architecture(const CrnnOptions& options);
/// Extractor with its tap on the first fully connected layer's ReLU output.
json rvector_architecture(const RvectorOptions& options);

/// R-vector width produced by an extractor built with these options.
Index rvector_width(const RvectorOptions& options);

enum class Arch { Mlp, Crnn };

nn::Network build_distance_model(const MlpOptions& options, std::uint64_t seed);
nn::Network build_distance_model(const CrnnOptions& options, std::uint64_t seed);
nn::Network build_rvector_extractor(const RvectorOptions& options, std::uint64_t seed);

}  // namespace wasncal::dist
