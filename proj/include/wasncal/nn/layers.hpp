#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wasncal/json_io.hpp"
#include "wasncal/nn/tensor.hpp"
#include "wasncal/random.hpp"

namespace wasncal::nn {

enum class Mode { Train, Eval };

/// Trainable weight or non-trainable buffer (batchnorm running statistics).
struct Parameter {
  std::string name;
  Tensor value;
  Eigen::VectorXd grad;
  bool trainable = true;
};

/// A layer maps a batch tensor to a batch tensor. Shapes passed to
/// output_shape() exclude the batch dimension.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual json hyperparams() const { return json::object(); }
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual void initialize(Rng& /*rng*/) {}

  /// Validates the input shape, then runs the layer.
  Tensor forward(const Tensor& x, Mode mode);
  /// Accumulates parameter gradients and returns the input gradient.
  Tensor backward(const Tensor& grad_out);

  json spec() const;
  const std::string& name() const { return name_; }
  void set_name(std::string name);

 protected:
  virtual Tensor do_forward(const Tensor& x, Mode mode) = 0;
  virtual Tensor do_backward(const Tensor& grad_out) = 0;
  [[noreturn]] void shape_fail(const std::string& msg) const;

  Parameter make_param(const std::string& leaf, Shape shape, bool trainable = true) const;

  std::string name_ = "layer";
  Shape last_input_shape_;
  Shape last_output_shape_;
  bool ready_for_backward_ = false;
  Mode last_mode_ = Mode::Eval;
};

/// y = x W^T + b, x of shape (in).
class Dense : public Layer {
 public:
  Dense(Eigen::Index in, Eigen::Index out);
  std::string kind() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  json hyperparams() const override { return {{"in", in_}, {"out", out_}}; }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  void initialize(Rng& rng) override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  Eigen::Index in_, out_;
  Parameter weight_, bias_;
  Tensor input_;
};

class Relu : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Shape output_shape(const Shape& input) const override { return input; }

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  Tensor output_;
};

/// Softmax over the last dimension.
class Softmax : public Layer {
 public:
  std::string kind() const override { return "softmax"; }
  Shape output_shape(const Shape& input) const override;

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  Tensor output_;
};

/// Inverted dropout; identity in eval mode. Masks can be frozen so repeated
/// train-mode passes see the same mask (gradient checking).
class Dropout : public Layer {
 public:
  explicit Dropout(double p);
  std::string kind() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  json hyperparams() const override { return {{"p", p_}}; }
  void initialize(Rng& rng) override { mask_rng_.seed(rng()); }

  void set_frozen(bool frozen) { frozen_ = frozen; }
  void reseed(std::uint64_t seed) { mask_rng_.seed(seed); }

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  double p_;
  bool frozen_ = false;
  Rng mask_rng_;
  Eigen::VectorXd mask_;
  bool mask_active_ = false;
};

/// Normalizes over every axis except axis 1 (channels); running statistics
/// follow r <- momentum r + (1 - momentum) batch.
class BatchNorm : public Layer {
 public:
  explicit BatchNorm(Eigen::Index channels, double momentum = 0.9, double eps = 1e-5);
  std::string kind() const override { return "batchnorm"; }
  Shape output_shape(const Shape& input) const override;
  json hyperparams() const override { return {{"channels", channels_}, {"momentum", momentum_}, {"eps", eps_}}; }
  std::vector<Parameter*> parameters() override { return {&gamma_, &beta_, &running_mean_, &running_var_}; }
  void initialize(Rng& rng) override;

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  Eigen::Index channels_;
  double momentum_, eps_;
  Parameter gamma_, beta_, running_mean_, running_var_;
  Tensor xhat_;
  Eigen::VectorXd inv_std_;
};

/// (C, H, W) -> (C, floor(H/ph), floor(W/pw)).
class MaxPool2d : public Layer {
 public:
  MaxPool2d(Eigen::Index pool_h, Eigen::Index pool_w);
  std::string kind() const override { return "maxpool2d"; }
  Shape output_shape(const Shape& input) const override;
  json hyperparams() const override { return {{"pool_h", ph_}, {"pool_w", pw_}}; }

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  Eigen::Index ph_, pw_;
  std::vector<Eigen::Index> argmax_;
};

/// (C, T) -> (2C): per-channel mean followed by per-channel standard deviation.
class StatisticsPool : public Layer {
 public:
  std::string kind() const override { return "statistics-pool"; }
  Shape output_shape(const Shape& input) const override;

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  Tensor input_;
  Eigen::VectorXd mean_, std_;
};

class Reshape : public Layer {
 public:
  explicit Reshape(Shape target);
  std::string kind() const override { return "reshape"; }
  Shape output_shape(const Shape& input) const override;
  json hyperparams() const override { return {{"shape", target_}}; }

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  Shape target_;
};

/// (A, B) -> (B, A); turns conv1d (channels, time) output into a GRU sequence.
class Transpose : public Layer {
 public:
  std::string kind() const override { return "transpose"; }
  Shape output_shape(const Shape& input) const override;

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;
};

/// (C_in, T) -> (C_out, T), "same" padding, stride 1.
class Conv1d : public Layer {
 public:
  Conv1d(Eigen::Index in_channels, Eigen::Index out_channels, Eigen::Index kernel);
  std::string kind() const override { return "conv1d"; }
  Shape output_shape(const Shape& input) const override;
  json hyperparams() const override {
    return {{"in_channels", in_}, {"out_channels", out_}, {"kernel", k_}};
  }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  void initialize(Rng& rng) override;

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  void im2col(const double* x, Eigen::Index t_len, RowMatrix& cols) const;
  void col2im(const RowMatrix& cols, Eigen::Index t_len, double* dx) const;

  Eigen::Index in_, out_, k_;
  Parameter weight_, bias_;
  Tensor input_;
};

/// (C_in, H, W) -> (C_out, H, W), "same" padding on both axes, stride 1.
class Conv2d : public Layer {
 public:
  Conv2d(Eigen::Index in_channels, Eigen::Index out_channels, Eigen::Index kernel_h, Eigen::Index kernel_w);
  std::string kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& input) const override;
  json hyperparams() const override {
    return {{"in_channels", in_}, {"out_channels", out_}, {"kernel_h", kh_}, {"kernel_w", kw_}};
  }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  void initialize(Rng& rng) override;

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  void im2col(const double* x, Eigen::Index h, Eigen::Index w, RowMatrix& cols) const;
  void col2im(const RowMatrix& cols, Eigen::Index h, Eigen::Index w, double* dx) const;

  Eigen::Index in_, out_, kh_, kw_;
  Parameter weight_, bias_;
  Tensor input_;
};

/// Single-layer GRU over (T, input) sequences, gate order (r, z, n):
///   r = sigma(W_ir x + b_ir + W_hr h + b_hr)
///   z = sigma(W_iz x + b_iz + W_hz h + b_hz)
///   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
///   h' = (1 - z) * n + z * h
/// Emits the whole sequence (T, H) or only the last state (H).
class Gru : public Layer {
 public:
  Gru(Eigen::Index input_size, Eigen::Index hidden_size, bool return_sequences);
  std::string kind() const override { return "gru"; }
  Shape output_shape(const Shape& input) const override;
  json hyperparams() const override {
    return {{"input_size", in_}, {"hidden_size", hidden_}, {"return_sequences", return_sequences_}};
  }
  std::vector<Parameter*> parameters() override { return {&w_ih_, &w_hh_, &b_ih_, &b_hh_}; }
  void initialize(Rng& rng) override;

 protected:
  Tensor do_forward(const Tensor& x, Mode mode) override;
  Tensor do_backward(const Tensor& grad_out) override;

 private:
  Eigen::Index in_, hidden_;
  bool return_sequences_;
  Parameter w_ih_, w_hh_, b_ih_, b_hh_;
  Tensor input_;
  // per time step, each batch x hidden
  std::vector<RowMatrix> r_, z_, n_, hn_, h_prev_;
};

/// Builds a layer from {"kind": ..., hyperparams...}.
std::unique_ptr<Layer> make_layer(const json& spec);

/// Glorot-uniform fill, limit sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Eigen::Ref<Eigen::VectorXd> values, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

/// Random orthogonal n x n matrix (QR of a Gaussian matrix, sign-corrected).
RowMatrix random_orthogonal(Eigen::Index n, Rng& rng);

}  // namespace wasncal::nn
