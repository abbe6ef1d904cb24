#include "wasncal/nn/adam.hpp"

#include <cmath>

namespace wasncal::nn {

AdamState make_adam_state(const std::vector<Parameter*>& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const Parameter* p : params) {
    s.first_moment.push_back(Eigen::VectorXd::Zero(p->value.size()));
    s.second_moment.push_back(Eigen::VectorXd::Zero(p->value.size()));
  }
  return s;
}

void adam_step(const std::vector<Parameter*>& params, AdamState& state) {
  if (params.size() != state.first_moment.size()) throw DomainError("adam state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.grad.size() != p.value.size() || state.first_moment[i].size() != p.value.size())
      throw DomainError("adam: shape mismatch for parameter " + p.name);
    if (!p.grad.allFinite()) throw DivergenceError("non-finite gradient in parameter " + p.name);
  }
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * p.grad;
    v = c.beta2 * v + (1.0 - c.beta2) * p.grad.cwiseAbs2();
    p.value.data.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  }
}

}  // namespace wasncal::nn
