#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "wasncal/nn/layers.hpp"

namespace wasncal::nn {

/// Ordered list of layers.
class Sequential {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  Shape output_shape(Shape input) const;
  Tensor forward(Tensor x, Mode mode, std::optional<std::size_t> tap_index = {}, Tensor* tap = nullptr);
  Tensor backward(Tensor grad);

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }
  const Layer& at(std::size_t i) const { return *layers_.at(i); }
  std::vector<Parameter*> parameters();
  json spec() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// trunk -> [concat auxiliary vector] -> head, emitting logits.
///
/// Architecture document:
///   {"name", "input_shape": per-example shape, "aux_width": 0 or R,
///    "trunk": [layer specs], "head": [layer specs], "tap": head index or -1}
/// The tap exposes one head layer's output (the R-vector embedding).
class Network {
 public:
  Network(const json& architecture, std::uint64_t seed);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// x has shape (B, input_shape...); aux (B, aux_width) when aux_width > 0.
  Tensor forward(const Tensor& x, Mode mode, const Tensor* aux = nullptr);
  /// Gradient of the loss w.r.t. the logits; returns the input gradient.
  Tensor backward(const Tensor& grad_logits);
  /// Output of the tap layer from the last forward pass.
  const Tensor& tap_output() const;
  /// Eval-mode forward returning the tap output.
  Tensor embed(const Tensor& x, const Tensor* aux = nullptr);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> trainable_parameters();
  void zero_grad();
  Eigen::Index num_trainable();

  void set_dropout_frozen(bool frozen);
  void reseed_dropout(std::uint64_t seed);

  const json& architecture() const { return architecture_; }
  std::uint64_t seed() const { return seed_; }
  const Shape& input_shape() const { return input_shape_; }
  Eigen::Index aux_width() const { return aux_width_; }
  Eigen::Index num_classes() const { return num_classes_; }
  Eigen::Index trunk_width() const { return trunk_width_; }

 private:
  json architecture_;
  std::uint64_t seed_;
  Shape input_shape_;
  Eigen::Index aux_width_ = 0;
  Eigen::Index trunk_width_ = 0;
  Eigen::Index num_classes_ = 0;
  std::optional<std::size_t> tap_;
  Sequential trunk_, head_;
  Tensor tap_output_;
  bool have_tap_ = false;
  bool ready_for_backward_ = false;
};

}  // namespace wasncal::nn
