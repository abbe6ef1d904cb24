#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wasncal/errors.hpp"

namespace wasncal::nn {

using Shape = std::vector<Eigen::Index>;

Eigen::Index numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense C-ordered tensor, batch dimension first.
template <typename Scalar>
struct BasicTensor {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Shape shape;
  Vector data;

  BasicTensor() = default;
  explicit BasicTensor(Shape s) : shape(std::move(s)), data(Vector::Zero(numel(shape))) {}
  BasicTensor(Shape s, Vector values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != numel(shape))
      throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                       shape_string(shape));
  }

  static BasicTensor from_matrix(const Eigen::Ref<const RowMatrix>& m) {
    BasicTensor t({m.rows(), m.cols()});
    MatrixMap(t.data.data(), m.rows(), m.cols()) = m;
    return t;
  }

  Eigen::Index size() const { return data.size(); }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(shape.size()); }
  Eigen::Index dim(std::size_t i) const { return shape.at(i); }
  Eigen::Index batch() const { return shape.empty() ? 0 : shape[0]; }
  /// Shape of one example (batch dimension dropped).
  Shape sample_shape() const { return shape.empty() ? Shape{} : Shape(shape.begin() + 1, shape.end()); }

  MatrixMap matrix(Eigen::Index rows, Eigen::Index cols) {
    check_view(rows, cols);
    return MatrixMap(data.data(), rows, cols);
  }
  ConstMatrixMap matrix(Eigen::Index rows, Eigen::Index cols) const {
    check_view(rows, cols);
    return ConstMatrixMap(data.data(), rows, cols);
  }
  /// batch x (everything else)
  MatrixMap flat() { return matrix(batch(), batch() ? size() / batch() : 0); }
  ConstMatrixMap flat() const { return matrix(batch(), batch() ? size() / batch() : 0); }

 private:
  void check_view(Eigen::Index rows, Eigen::Index cols) const {
    if (rows * cols != data.size())
      throw ShapeError("cannot view tensor of shape " + shape_string(shape) + " as " + std::to_string(rows) + "x" +
                       std::to_string(cols));
  }
};

using Tensor = BasicTensor<double>;
using RowMatrix = Tensor::RowMatrix;

}  // namespace wasncal::nn
