#pragma once

#include <cstdint>
#include <vector>

#include "wasncal/nn/network.hpp"

namespace wasncal::nn {

struct GradCheckOptions {
  double epsilon = 1e-5;
  int num_samples = 200;  // all entries are checked when fewer exist
  std::uint64_t seed = 0;
  /// Denominator floor of the relative error, so entries with vanishing
  /// gradient are compared absolutely. Raised to 1e5 times the finite
  /// difference roundoff when that is larger.
  double denom_floor = 1e-7;
};

/// Relative error |a - n| / max(|a|, |n|, floor) between analytic and central
/// finite-difference gradients of the softmax cross-entropy, maximized over a
/// random subset of trainable entries. Runs in train mode with dropout masks
/// frozen; all parameters and buffers are restored afterwards.
double gradient_check(Network& net, const Tensor& x, const std::vector<int>& labels, const Tensor* aux = nullptr,
                      GradCheckOptions options = {});

/// Same check for one layer in isolation under the loss sum(y * R) with a
/// fixed random R; covers the layer's parameters and its input gradient.
double layer_gradient_check(Layer& layer, const Tensor& x, GradCheckOptions options = {});

}  // namespace wasncal::nn
