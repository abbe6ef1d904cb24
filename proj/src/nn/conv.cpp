#include "wasncal/nn/layers.hpp"

namespace wasncal::nn {

// Inputs are cached and the column matrix rebuilt in backward, trading a
// second im2col for not holding (C k) x T per example across the pass.

// ---- Conv1d ----------------------------------------------------------------

Conv1d::Conv1d(Eigen::Index in_channels, Eigen::Index out_channels, Eigen::Index kernel)
    : in_(in_channels), out_(out_channels), k_(kernel) {
  if (in_ < 1 || out_ < 1 || k_ < 1) throw ShapeError("conv1d needs positive channels and kernel");
  weight_ = make_param("weight", {out_, in_, k_});
  bias_ = make_param("bias", {out_});
}

Shape Conv1d::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[0] != in_)
    shape_fail("expected (" + std::to_string(in_) + ", T), got " + shape_string(input));
  return {out_, input[1]};
}

void Conv1d::initialize(Rng& rng) {
  glorot_uniform(weight_.value.data, in_ * k_, out_ * k_, rng);
  bias_.value.data.setZero();
}

void Conv1d::im2col(const double* x, Eigen::Index t_len, RowMatrix& cols) const {
  const Eigen::Index pad = (k_ - 1) / 2;
  cols.setZero(in_ * k_, t_len);
  for (Eigen::Index c = 0; c < in_; ++c)
    for (Eigen::Index j = 0; j < k_; ++j) {
      const Eigen::Index shift = j - pad;
      const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index hi = std::min(t_len, t_len - shift);
      if (hi > lo)
        cols.row(c * k_ + j).segment(lo, hi - lo) =
            Eigen::Map<const Eigen::RowVectorXd>(x + c * t_len + lo + shift, hi - lo);
    }
}

void Conv1d::col2im(const RowMatrix& cols, Eigen::Index t_len, double* dx) const {
  const Eigen::Index pad = (k_ - 1) / 2;
  for (Eigen::Index c = 0; c < in_; ++c)
    for (Eigen::Index j = 0; j < k_; ++j) {
      const Eigen::Index shift = j - pad;
      const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index hi = std::min(t_len, t_len - shift);
      if (hi > lo)
        Eigen::Map<Eigen::RowVectorXd>(dx + c * t_len + lo + shift, hi - lo) +=
            cols.row(c * k_ + j).segment(lo, hi - lo);
    }
}

Tensor Conv1d::do_forward(const Tensor& x, Mode) {
  const Eigen::Index b = x.batch(), t = x.dim(2);
  input_ = x;
  Tensor y({b, out_, t});
  const auto w = weight_.value.matrix(out_, in_ * k_);
  RowMatrix cols;
  for (Eigen::Index i = 0; i < b; ++i) {
    im2col(x.data.data() + i * in_ * t, t, cols);
    Eigen::Map<RowMatrix> yi(y.data.data() + i * out_ * t, out_, t);
    yi.noalias() = w * cols;
    yi.colwise() += bias_.value.data;
  }
  return y;
}

Tensor Conv1d::do_backward(const Tensor& g) {
  const Eigen::Index b = input_.batch(), t = input_.dim(2);
  const auto w = weight_.value.matrix(out_, in_ * k_);
  Eigen::Map<RowMatrix> dw(weight_.grad.data(), out_, in_ * k_);
  Tensor dx(input_.shape);
  RowMatrix cols, dcols;
  for (Eigen::Index i = 0; i < b; ++i) {
    Eigen::Map<const RowMatrix> gi(g.data.data() + i * out_ * t, out_, t);
    im2col(input_.data.data() + i * in_ * t, t, cols);
    dw.noalias() += gi * cols.transpose();
    bias_.grad += gi.rowwise().sum();
    dcols.noalias() = w.transpose() * gi;
    col2im(dcols, t, dx.data.data() + i * in_ * t);
  }
  return dx;
}

// ---- Conv2d ----------------------------------------------------------------

Conv2d::Conv2d(Eigen::Index in_channels, Eigen::Index out_channels, Eigen::Index kernel_h, Eigen::Index kernel_w)
    : in_(in_channels), out_(out_channels), kh_(kernel_h), kw_(kernel_w) {
  if (in_ < 1 || out_ < 1 || kh_ < 1 || kw_ < 1) throw ShapeError("conv2d needs positive channels and kernel");
  weight_ = make_param("weight", {out_, in_, kh_, kw_});
  bias_ = make_param("bias", {out_});
}

Shape Conv2d::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[0] != in_)
    shape_fail("expected (" + std::to_string(in_) + ", H, W), got " + shape_string(input));
  return {out_, input[1], input[2]};
}

void Conv2d::initialize(Rng& rng) {
  glorot_uniform(weight_.value.data, in_ * kh_ * kw_, out_ * kh_ * kw_, rng);
  bias_.value.data.setZero();
}

void Conv2d::im2col(const double* x, Eigen::Index h, Eigen::Index w, RowMatrix& cols) const {
  const Eigen::Index ph = (kh_ - 1) / 2, pw = (kw_ - 1) / 2;
  cols.setZero(in_ * kh_ * kw_, h * w);
  for (Eigen::Index c = 0; c < in_; ++c)
    for (Eigen::Index ki = 0; ki < kh_; ++ki)
      for (Eigen::Index kj = 0; kj < kw_; ++kj) {
        double* row = cols.row((c * kh_ + ki) * kw_ + kj).data();
        const Eigen::Index dj = kj - pw;
        const Eigen::Index lo = std::max<Eigen::Index>(0, -dj);
        const Eigen::Index hi = std::min(w, w - dj);
        if (hi <= lo) continue;
        for (Eigen::Index y = 0; y < h; ++y) {
          const Eigen::Index sy = y + ki - ph;
          if (sy < 0 || sy >= h) continue;
          const double* src = x + (c * h + sy) * w;
          for (Eigen::Index xx = lo; xx < hi; ++xx) row[y * w + xx] = src[xx + dj];
        }
      }
}

void Conv2d::col2im(const RowMatrix& cols, Eigen::Index h, Eigen::Index w, double* dx) const {
  const Eigen::Index ph = (kh_ - 1) / 2, pw = (kw_ - 1) / 2;
  for (Eigen::Index c = 0; c < in_; ++c)
    for (Eigen::Index ki = 0; ki < kh_; ++ki)
      for (Eigen::Index kj = 0; kj < kw_; ++kj) {
        const double* row = cols.row((c * kh_ + ki) * kw_ + kj).data();
        const Eigen::Index dj = kj - pw;
        const Eigen::Index lo = std::max<Eigen::Index>(0, -dj);
        const Eigen::Index hi = std::min(w, w - dj);
        if (hi <= lo) continue;
        for (Eigen::Index y = 0; y < h; ++y) {
          const Eigen::Index sy = y + ki - ph;
          if (sy < 0 || sy >= h) continue;
          double* dst = dx + (c * h + sy) * w;
          for (Eigen::Index xx = lo; xx < hi; ++xx) dst[xx + dj] += row[y * w + xx];
        }
      }
}

Tensor Conv2d::do_forward(const Tensor& x, Mode) {
  const Eigen::Index b = x.batch(), h = x.dim(2), w = x.dim(3);
  input_ = x;
  Tensor y({b, out_, h, w});
  const auto wm = weight_.value.matrix(out_, in_ * kh_ * kw_);
  RowMatrix cols;
  for (Eigen::Index i = 0; i < b; ++i) {
    im2col(x.data.data() + i * in_ * h * w, h, w, cols);
    Eigen::Map<RowMatrix> yi(y.data.data() + i * out_ * h * w, out_, h * w);
    yi.noalias() = wm * cols;
    yi.colwise() += bias_.value.data;
  }
  return y;
}

Tensor Conv2d::do_backward(const Tensor& g) {
  const Eigen::Index b = input_.batch(), h = input_.dim(2), w = input_.dim(3);
  const auto wm = weight_.value.matrix(out_, in_ * kh_ * kw_);
  Eigen::Map<RowMatrix> dw(weight_.grad.data(), out_, in_ * kh_ * kw_);
  Tensor dx(input_.shape);
  RowMatrix cols, dcols;
  for (Eigen::Index i = 0; i < b; ++i) {
    Eigen::Map<const RowMatrix> gi(g.data.data() + i * out_ * h * w, out_, h * w);
    im2col(input_.data.data() + i * in_ * h * w, h, w, cols);
    dw.noalias() += gi * cols.transpose();
    bias_.grad += gi.rowwise().sum();
    dcols.noalias() = wm.transpose() * gi;
    col2im(dcols, h, w, dx.data.data() + i * in_ * h * w);
  }
  return dx;
}

}  // namespace wasncal::nn
