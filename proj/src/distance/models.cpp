#include "wasncal/distance/models.hpp"

#include <algorithm>
#include <cmath>

namespace wasncal::dist {

namespace {

Index scaled(Index n, double scale) { return std::max<Index>(1, std::lround(static_cast<double>(n) * scale)); }

json dense(Index in, Index out) { return {{"kind", "dense"}, {"in", in}, {"out", out}}; }
json relu() { return {{"kind", "relu"}}; }
json batchnorm(Index c) { return {{"kind", "batchnorm"}, {"channels", c}, {"momentum", 0.9}, {"eps", 1e-5}}; }

void conv2d_block(json& layers, Index in, Index out) {
  layers.push_back({{"kind", "conv2d"}, {"in_channels", in}, {"out_channels", out}, {"kernel_h", 7}, {"kernel_w", 3}});
  layers.push_back(batchnorm(out));
  layers.push_back(relu());
}

void conv1d_block(json& layers, Index in, Index out, Index kernel) {
  layers.push_back({{"kind", "conv1d"}, {"in_channels", in}, {"out_channels", out}, {"kernel", kernel}});
  layers.push_back(batchnorm(out));
  layers.push_back(relu());
}

}  // namespace

json mlp_architecture(const MlpOptions& o) {
  if (o.features < 1 || o.hidden < 1 || o.hidden_layers < 1) throw ShapeError("mlp: bad dimensions");
  json head = json::array();
  Index width = o.features + (o.use_rvector ? o.rvector_width : 0);
  for (int i = 0; i < o.hidden_layers; ++i) {
    head.push_back(dense(width, o.hidden));
    head.push_back(relu());
    if (o.dropout > 0.0) head.push_back({{"kind", "dropout"}, {"p", o.dropout}});
    width = o.hidden;
  }
  head.push_back(dense(width, o.num_classes));
  return {{"name", "mlp"},
          {"input_shape", {o.features}},
          {"aux_width", o.use_rvector ? o.rvector_width : 0},
          {"trunk", json::array()},
          {"head", head},
          {"tap", -1}};
}

json crnn_architecture(const CrnnOptions& o) {
  const Index c1 = scaled(16, o.width_scale), c2 = scaled(32, o.width_scale);
  const Index c3 = scaled(512, o.width_scale), c4 = scaled(256, o.width_scale);
  const Index g = scaled(256, o.width_scale), fc = scaled(256, o.width_scale);
  const bool deferred = o.time_pooling == CrnnTimePooling::Deferred;

  json trunk = json::array();
  conv2d_block(trunk, 1, c1);
  conv2d_block(trunk, c1, c1);
  trunk.push_back({{"kind", "maxpool2d"}, {"pool_h", 4}, {"pool_w", deferred ? 1 : 2}});
  conv2d_block(trunk, c1, c2);
  conv2d_block(trunk, c2, c2);
  trunk.push_back({{"kind", "maxpool2d"}, {"pool_h", 4}, {"pool_w", deferred ? 4 : 2}});
  const Index f16 = (o.features / 4) / 4;
  const Index t4 = deferred ? o.frames / 4 : (o.frames / 2) / 2;
  if (f16 < 1 || t4 < 1) throw ShapeError("crnn: feature map too small for two 4x pooling stages");
  trunk.push_back({{"kind", "reshape"}, {"shape", {c2 * f16, t4}}});
  conv1d_block(trunk, c2 * f16, c3, 3);
  conv1d_block(trunk, c3, c4, 3);
  trunk.push_back({{"kind", "transpose"}});
  trunk.push_back({{"kind", "gru"}, {"input_size", c4}, {"hidden_size", g}, {"return_sequences", true}});
  trunk.push_back({{"kind", "gru"}, {"input_size", g}, {"hidden_size", g}, {"return_sequences", false}});

  const Index aux = o.use_rvector ? o.rvector_width : 0;
  json head = {dense(g + aux, fc), relu(), dense(fc, o.num_classes)};
  return {{"name", "crnn"},
          {"input_shape", {1, o.features, o.frames}},
          {"aux_width", aux},
          {"trunk", trunk},
          {"head", head},
          {"tap", -1},
          {"time_pooling", deferred ? "deferred" : "consistent"}};
}

Index rvector_width(const RvectorOptions& o) { return scaled(512, o.width_scale); }

json rvector_architecture(const RvectorOptions& o) {
  if (o.num_rir_classes < 2) throw ShapeError("r-vector extractor needs at least two RIR classes");
  const Index c = scaled(128, o.width_scale);
  const Index r = rvector_width(o);
  json trunk = json::array();
  conv1d_block(trunk, o.mfcc, c, 3);
  conv1d_block(trunk, c, c, 5);
  conv1d_block(trunk, c, c, 1);
  trunk.push_back({{"kind", "statistics-pool"}});
  json head = {dense(2 * c, r), relu(), dense(r, r), relu(), dense(r, o.num_rir_classes)};
  return {{"name", "rvector"},
          {"input_shape", {o.mfcc, o.frames}},
          {"aux_width", 0},
          {"trunk", trunk},
          {"head", head},
          {"tap", 1}};
}

nn::Network build_distance_model(const MlpOptions& options, std::uint64_t seed) {
  return nn::Network(mlp_architecture(options), seed);
}

nn::Network build_distance_model(const CrnnOptions& options, std::uint64_t seed) {
  return nn::Network(crnn_architecture(options), seed);
}

nn::Network build_rvector_extractor(const RvectorOptions& options, std::uint64_t seed) {
  return nn::Network(rvector_architecture(options), seed);
}

}  // namespace wasncal::dist
