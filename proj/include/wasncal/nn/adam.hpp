#pragma once

#include <vector>

#include "wasncal/nn/layers.hpp"

namespace wasncal::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step = 0;
  std::vector<Eigen::VectorXd> first_moment;
  std::vector<Eigen::VectorXd> second_moment;
};

AdamState make_adam_state(const std::vector<Parameter*>& params, AdamConfig config = {});

/// Bias-corrected Adam update of every parameter from its grad slot.
/// A non-finite gradient raises DivergenceError naming the parameter, before
/// anything is modified.
void adam_step(const std::vector<Parameter*>& params, AdamState& state);

}  // namespace wasncal::nn
