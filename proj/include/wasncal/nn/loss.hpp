#pragma once

#include <vector>

#include "wasncal/nn/tensor.hpp"

namespace wasncal::nn {

/// Row-wise softmax of a (B, C) logit matrix, max-shifted for stability.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> softmax_rows(
    const Eigen::MatrixBase<Derived>& logits) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  M p = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d logits, (B, C)
};

/// Mean cross-entropy over the batch; grad = (softmax - onehot) / B.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace wasncal::nn
