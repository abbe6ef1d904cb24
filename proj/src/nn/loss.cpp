#include "wasncal/nn/loss.hpp"

#include <cmath>

namespace wasncal::nn {

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw ShapeError("logits must be (B, C), got " + shape_string(logits.shape));
  const Eigen::Index b = logits.dim(0), c = logits.dim(1);
  if (static_cast<Eigen::Index>(labels.size()) != b) throw DomainError("label count does not match batch size");
  if (b == 0) throw DomainError("empty batch");
  const auto z = logits.flat();
  LossResult out;
  out.grad = Tensor(logits.shape);
  auto g = out.grad.flat();
  g = softmax_rows(z);
  for (Eigen::Index i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) throw DomainError("label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
    // log-sum-exp form so that saturated logits do not produce log(0)
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    out.loss += lse - z(i, y);
    g(i, y) -= 1.0;
  }
  out.loss /= static_cast<double>(b);
  g /= static_cast<double>(b);
  return out;
}

}  // namespace wasncal::nn
