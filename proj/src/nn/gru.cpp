#include <cmath>

#include "wasncal/nn/layers.hpp"

namespace wasncal::nn {

namespace {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  return 1.0 / (1.0 + (-a).exp());
}

}  // namespace

Gru::Gru(Eigen::Index input_size, Eigen::Index hidden_size, bool return_sequences)
    : in_(input_size), hidden_(hidden_size), return_sequences_(return_sequences) {
  if (in_ < 1 || hidden_ < 1) throw ShapeError("gru needs positive input and hidden sizes");
  w_ih_ = make_param("w_ih", {3 * hidden_, in_});
  w_hh_ = make_param("w_hh", {3 * hidden_, hidden_});
  b_ih_ = make_param("b_ih", {3 * hidden_});
  b_hh_ = make_param("b_hh", {3 * hidden_});
}

Shape Gru::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != in_ || input[0] < 1)
    shape_fail("expected (T, " + std::to_string(in_) + "), got " + shape_string(input));
  if (return_sequences_) return {input[0], hidden_};
  return {hidden_};
}

void Gru::initialize(Rng& rng) {
  for (int g = 0; g < 3; ++g) {
    Eigen::VectorXd block(hidden_ * in_);
    glorot_uniform(block, in_, hidden_, rng);
    w_ih_.value.data.segment(g * hidden_ * in_, hidden_ * in_) = block;
  }
  auto whh = w_hh_.value.matrix(3 * hidden_, hidden_);
  for (int g = 0; g < 3; ++g) whh.middleRows(g * hidden_, hidden_) = random_orthogonal(hidden_, rng);
  b_ih_.value.data.setZero();
  b_hh_.value.data.setZero();
}

Tensor Gru::do_forward(const Tensor& x, Mode) {
  const Eigen::Index b = x.batch(), t_len = x.dim(1), h = hidden_;
  input_ = x;
  const auto wih = w_ih_.value.matrix(3 * h, in_);
  const auto whh = w_hh_.value.matrix(3 * h, h);

  // input projections for every (batch, time) row at once: row = b * T + t
  RowMatrix gx = x.matrix(b * t_len, in_) * wih.transpose();
  gx.rowwise() += b_ih_.value.data.transpose();

  r_.assign(t_len, RowMatrix());
  z_.assign(t_len, RowMatrix());
  n_.assign(t_len, RowMatrix());
  hn_.assign(t_len, RowMatrix());
  h_prev_.assign(t_len, RowMatrix());

  Tensor y = return_sequences_ ? Tensor({b, t_len, h}) : Tensor({b, h});
  RowMatrix state = RowMatrix::Zero(b, h);
  RowMatrix gxt(b, 3 * h);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (Eigen::Index i = 0; i < b; ++i) gxt.row(i) = gx.row(i * t_len + t);
    RowMatrix gh = state * whh.transpose();
    gh.rowwise() += b_hh_.value.data.transpose();
    h_prev_[t] = state;
    r_[t] = sigmoid((gxt.leftCols(h) + gh.leftCols(h)).array()).matrix();
    z_[t] = sigmoid((gxt.middleCols(h, h) + gh.middleCols(h, h)).array()).matrix();
    hn_[t] = gh.rightCols(h);
    n_[t] = (gxt.rightCols(h).array() + r_[t].array() * hn_[t].array()).tanh().matrix();
    state = ((1.0 - z_[t].array()) * n_[t].array() + z_[t].array() * state.array()).matrix();
    if (return_sequences_)
      for (Eigen::Index i = 0; i < b; ++i) y.data.segment((i * t_len + t) * h, h) = state.row(i).transpose();
  }
  if (!return_sequences_) y.matrix(b, h) = state;
  return y;
}

Tensor Gru::do_backward(const Tensor& g) {
  const Eigen::Index b = input_.batch(), t_len = input_.dim(1), h = hidden_;
  const auto wih = w_ih_.value.matrix(3 * h, in_);
  const auto whh = w_hh_.value.matrix(3 * h, h);
  Eigen::Map<RowMatrix> dwhh(w_hh_.grad.data(), 3 * h, h);

  RowMatrix dgx(b * t_len, 3 * h);
  RowMatrix dh = RowMatrix::Zero(b, h);
  if (!return_sequences_) dh = g.matrix(b, h);
  RowMatrix dgh(b, 3 * h);
  for (Eigen::Index t = t_len - 1; t >= 0; --t) {
    if (return_sequences_)
      for (Eigen::Index i = 0; i < b; ++i) dh.row(i) += g.data.segment((i * t_len + t) * h, h).transpose();
    const auto r = r_[t].array();
    const auto z = z_[t].array();
    const auto n = n_[t].array();
    const Eigen::ArrayXXd dn = dh.array() * (1.0 - z);
    const Eigen::ArrayXXd dz = dh.array() * (h_prev_[t].array() - n);
    const Eigen::ArrayXXd dan = dn * (1.0 - n.square());
    const Eigen::ArrayXXd dar = dan * hn_[t].array() * r * (1.0 - r);
    const Eigen::ArrayXXd daz = dz * z * (1.0 - z);

    dgh.leftCols(h) = dar.matrix();
    dgh.middleCols(h, h) = daz.matrix();
    dgh.rightCols(h) = (dan * r).matrix();
    for (Eigen::Index i = 0; i < b; ++i) {
      dgx.row(i * t_len + t).head(h) = dar.row(i).matrix();
      dgx.row(i * t_len + t).segment(h, h) = daz.row(i).matrix();
      dgx.row(i * t_len + t).tail(h) = dan.row(i).matrix();
    }
    dwhh.noalias() += dgh.transpose() * h_prev_[t];
    b_hh_.grad += dgh.colwise().sum().transpose();
    dh = (dh.array() * z).matrix();
    dh.noalias() += dgh * whh;
  }
  Eigen::Map<RowMatrix>(w_ih_.grad.data(), 3 * h, in_).noalias() +=
      dgx.transpose() * input_.matrix(b * t_len, in_);
  b_ih_.grad += dgx.colwise().sum().transpose();
  Tensor dx(input_.shape);
  dx.matrix(b * t_len, in_).noalias() = dgx * wih;
  return dx;
}

}  // namespace wasncal::nn
