#include "wasncal/nn/tensor.hpp"

#include <functional>
#include <numeric>

namespace wasncal::nn {

Eigen::Index numel(const Shape& shape) {
  for (auto d : shape)
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_string(shape));
  return std::accumulate(shape.begin(), shape.end(), Eigen::Index{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

}  // namespace wasncal::nn
