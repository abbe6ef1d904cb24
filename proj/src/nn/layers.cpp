#include "wasncal/nn/layers.hpp"

#include <cmath>
#include <limits>

namespace wasncal::nn {

// ---- Layer -----------------------------------------------------------------

Tensor Layer::forward(const Tensor& x, Mode mode) {
  if (x.rank() < 1) shape_fail("input has no batch dimension");
  output_shape(x.sample_shape());  // throws on mismatch
  Tensor y = do_forward(x, mode);
  last_input_shape_ = x.shape;
  last_output_shape_ = y.shape;
  ready_for_backward_ = true;
  last_mode_ = mode;
  return y;
}

Tensor Layer::backward(const Tensor& grad_out) {
  if (!ready_for_backward_) throw StateError("layer " + name_ + " (" + kind() + "): backward called before forward");
  if (grad_out.shape != last_output_shape_)
    shape_fail("gradient shape " + shape_string(grad_out.shape) + " does not match output shape " +
               shape_string(last_output_shape_));
  return do_backward(grad_out);
}

json Layer::spec() const {
  json j = hyperparams();
  j["kind"] = kind();
  return j;
}

void Layer::set_name(std::string name) {
  name_ = std::move(name);
  for (Parameter* p : parameters()) {
    const auto dot = p->name.rfind('.');
    p->name = name_ + "." + (dot == std::string::npos ? p->name : p->name.substr(dot + 1));
  }
}

void Layer::shape_fail(const std::string& msg) const {
  throw ShapeError("layer " + name_ + " (" + kind() + "): " + msg);
}

Parameter Layer::make_param(const std::string& leaf, Shape shape, bool trainable) const {
  Parameter p;
  p.name = name_ + "." + leaf;
  p.value = Tensor(std::move(shape));
  p.grad = Eigen::VectorXd::Zero(p.value.size());
  p.trainable = trainable;
  return p;
}

void glorot_uniform(Eigen::Ref<Eigen::VectorXd> values, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index i = 0; i < values.size(); ++i) values[i] = uniform(rng, -limit, limit);
}

RowMatrix random_orthogonal(Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = standard_normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

// ---- Dense -----------------------------------------------------------------

Dense::Dense(Eigen::Index in, Eigen::Index out) : in_(in), out_(out) {
  if (in < 1 || out < 1) throw ShapeError("dense layer needs positive in/out widths");
  weight_ = make_param("weight", {out, in});
  bias_ = make_param("bias", {out});
}

Shape Dense::output_shape(const Shape& input) const {
  if (input.size() != 1 || input[0] != in_)
    shape_fail("expected input (" + std::to_string(in_) + "), got " + shape_string(input));
  return {out_};
}

void Dense::initialize(Rng& rng) {
  glorot_uniform(weight_.value.data, in_, out_, rng);
  bias_.value.data.setZero();
}

Tensor Dense::do_forward(const Tensor& x, Mode) {
  input_ = x;
  Tensor y({x.batch(), out_});
  y.flat().noalias() = x.flat() * weight_.value.matrix(out_, in_).transpose();
  y.flat().rowwise() += bias_.value.data.transpose();
  return y;
}

Tensor Dense::do_backward(const Tensor& g) {
  const auto w = weight_.value.matrix(out_, in_);
  Eigen::Map<RowMatrix>(weight_.grad.data(), out_, in_).noalias() += g.flat().transpose() * input_.flat();
  bias_.grad += g.flat().colwise().sum().transpose();
  Tensor dx(input_.shape);
  dx.flat().noalias() = g.flat() * w;
  return dx;
}

// ---- Relu ------------------------------------------------------------------

Tensor Relu::do_forward(const Tensor& x, Mode) {
  output_ = Tensor(x.shape, x.data.cwiseMax(0.0));
  return output_;
}

Tensor Relu::do_backward(const Tensor& g) {
  return Tensor(g.shape, (output_.data.array() > 0.0).select(g.data, 0.0));
}

// ---- Softmax ---------------------------------------------------------------

Shape Softmax::output_shape(const Shape& input) const {
  if (input.empty() || input.back() < 1) shape_fail("softmax needs a non-empty last dimension");
  return input;
}

Tensor Softmax::do_forward(const Tensor& x, Mode) {
  const Eigen::Index c = x.shape.back();
  Tensor y(x.shape);
  auto in = x.matrix(x.size() / c, c);
  auto out = y.matrix(x.size() / c, c);
  out = (in.colwise() - in.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  output_ = y;
  return y;
}

Tensor Softmax::do_backward(const Tensor& g) {
  const Eigen::Index c = g.shape.back();
  const Eigen::Index rows = g.size() / c;
  Tensor dx(g.shape);
  auto y = output_.matrix(rows, c);
  auto dy = g.matrix(rows, c);
  const Eigen::VectorXd dot = y.cwiseProduct(dy).rowwise().sum();
  dx.matrix(rows, c) = y.cwiseProduct(dy.colwise() - dot);
  return dx;
}

// ---- Dropout ---------------------------------------------------------------

Dropout::Dropout(double p) : p_(p) {
  if (!(p >= 0.0 && p < 1.0)) throw ShapeError("dropout probability must be in [0, 1), got " + std::to_string(p));
}

Tensor Dropout::do_forward(const Tensor& x, Mode mode) {
  if (mode == Mode::Eval || p_ == 0.0) {
    mask_active_ = false;
    return x;
  }
  if (!(frozen_ && mask_.size() == x.size())) {
    mask_.resize(x.size());
    std::bernoulli_distribution keep(1.0 - p_);
    const double scale = 1.0 / (1.0 - p_);
    for (Eigen::Index i = 0; i < mask_.size(); ++i) mask_[i] = keep(mask_rng_) ? scale : 0.0;
  }
  mask_active_ = true;
  return Tensor(x.shape, x.data.cwiseProduct(mask_));
}

Tensor Dropout::do_backward(const Tensor& g) {
  if (!mask_active_) return g;
  return Tensor(g.shape, g.data.cwiseProduct(mask_));
}

// ---- BatchNorm -------------------------------------------------------------

BatchNorm::BatchNorm(Eigen::Index channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
  if (channels < 1) throw ShapeError("batchnorm needs at least one channel");
  gamma_ = make_param("gamma", {channels});
  beta_ = make_param("beta", {channels});
  running_mean_ = make_param("running_mean", {channels}, false);
  running_var_ = make_param("running_var", {channels}, false);
  gamma_.value.data.setOnes();
  running_var_.value.data.setOnes();
}

Shape BatchNorm::output_shape(const Shape& input) const {
  if (input.empty() || input[0] != channels_)
    shape_fail("expected " + std::to_string(channels_) + " channels on axis 1, got " + shape_string(input));
  return input;
}

void BatchNorm::initialize(Rng&) {
  gamma_.value.data.setOnes();
  beta_.value.data.setZero();
  running_mean_.value.data.setZero();
  running_var_.value.data.setOnes();
}

Tensor BatchNorm::do_forward(const Tensor& x, Mode mode) {
  const Eigen::Index b = x.batch();
  const Eigen::Index s = x.size() / (b * channels_);
  const Eigen::Index n = b * s;
  Tensor y(x.shape);
  xhat_ = Tensor(x.shape);
  inv_std_.resize(channels_);
  for (Eigen::Index c = 0; c < channels_; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < b; ++i) sum += x.data.segment((i * channels_ + c) * s, s).sum();
      mean = sum / static_cast<double>(n);
      double sq = 0.0;
      for (Eigen::Index i = 0; i < b; ++i)
        sq += (x.data.segment((i * channels_ + c) * s, s).array() - mean).square().sum();
      var = sq / static_cast<double>(n);
      const double unbiased = n > 1 ? sq / static_cast<double>(n - 1) : var;
      running_mean_.value.data[c] = momentum_ * running_mean_.value.data[c] + (1.0 - momentum_) * mean;
      running_var_.value.data[c] = momentum_ * running_var_.value.data[c] + (1.0 - momentum_) * unbiased;
    } else {
      mean = running_mean_.value.data[c];
      var = running_var_.value.data[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    const double g = gamma_.value.data[c], bt = beta_.value.data[c];
    for (Eigen::Index i = 0; i < b; ++i) {
      const Eigen::Index off = (i * channels_ + c) * s;
      xhat_.data.segment(off, s) = (x.data.segment(off, s).array() - mean) * inv;
      y.data.segment(off, s) = (g * xhat_.data.segment(off, s).array() + bt).matrix();
    }
  }
  return y;
}

Tensor BatchNorm::do_backward(const Tensor& g) {
  const Eigen::Index b = g.batch();
  const Eigen::Index s = g.size() / (b * channels_);
  const double n = static_cast<double>(b * s);
  Tensor dx(g.shape);
  for (Eigen::Index c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
      const Eigen::Index off = (i * channels_ + c) * s;
      sum_dy += g.data.segment(off, s).sum();
      sum_dy_xhat += g.data.segment(off, s).dot(xhat_.data.segment(off, s));
    }
    gamma_.grad[c] += sum_dy_xhat;
    beta_.grad[c] += sum_dy;
    const double gm = gamma_.value.data[c];
    const double inv = inv_std_[c];
    for (Eigen::Index i = 0; i < b; ++i) {
      const Eigen::Index off = (i * channels_ + c) * s;
      if (last_mode_ == Mode::Train) {
        dx.data.segment(off, s) =
            (gm * inv / n) *
            (n * g.data.segment(off, s).array() - sum_dy - xhat_.data.segment(off, s).array() * sum_dy_xhat).matrix();
      } else {
        dx.data.segment(off, s) = gm * inv * g.data.segment(off, s);
      }
    }
  }
  return dx;
}

// ---- MaxPool2d -------------------------------------------------------------

MaxPool2d::MaxPool2d(Eigen::Index pool_h, Eigen::Index pool_w) : ph_(pool_h), pw_(pool_w) {
  if (pool_h < 1 || pool_w < 1) throw ShapeError("maxpool2d needs positive pool sizes");
}

Shape MaxPool2d::output_shape(const Shape& input) const {
  if (input.size() != 3) shape_fail("expected (C, H, W), got " + shape_string(input));
  const Shape out{input[0], input[1] / ph_, input[2] / pw_};
  if (out[1] < 1 || out[2] < 1) shape_fail("input " + shape_string(input) + " smaller than the pool window");
  return out;
}

Tensor MaxPool2d::do_forward(const Tensor& x, Mode) {
  const Eigen::Index b = x.batch(), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Eigen::Index ho = h / ph_, wo = w / pw_;
  Tensor y({b, c, ho, wo});
  argmax_.assign(static_cast<std::size_t>(y.size()), 0);
  Eigen::Index o = 0;
  for (Eigen::Index bc = 0; bc < b * c; ++bc) {
    const double* plane = x.data.data() + bc * h * w;
    for (Eigen::Index i = 0; i < ho; ++i)
      for (Eigen::Index j = 0; j < wo; ++j, ++o) {
        Eigen::Index best = (i * ph_) * w + j * pw_;
        for (Eigen::Index di = 0; di < ph_; ++di)
          for (Eigen::Index dj = 0; dj < pw_; ++dj) {
            const Eigen::Index idx = (i * ph_ + di) * w + (j * pw_ + dj);
            if (plane[idx] > plane[best]) best = idx;
          }
        y.data[o] = plane[best];
        argmax_[static_cast<std::size_t>(o)] = bc * h * w + best;
      }
  }
  return y;
}

Tensor MaxPool2d::do_backward(const Tensor& g) {
  Tensor dx(last_input_shape_);
  for (Eigen::Index o = 0; o < g.size(); ++o) dx.data[argmax_[static_cast<std::size_t>(o)]] += g.data[o];
  return dx;
}

// ---- StatisticsPool --------------------------------------------------------

namespace {
constexpr double kStdFloor = 1e-10;
}

Shape StatisticsPool::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] < 1) shape_fail("expected (C, T), got " + shape_string(input));
  return {2 * input[0]};
}

Tensor StatisticsPool::do_forward(const Tensor& x, Mode) {
  const Eigen::Index b = x.batch(), c = x.dim(1), t = x.dim(2);
  input_ = x;
  auto rows = x.matrix(b * c, t);
  mean_ = rows.rowwise().mean();
  std_ = ((rows.colwise() - mean_).array().square().rowwise().mean() + kStdFloor).sqrt().matrix();
  Tensor y({b, 2 * c});
  for (Eigen::Index i = 0; i < b; ++i) {
    y.data.segment(i * 2 * c, c) = mean_.segment(i * c, c);
    y.data.segment(i * 2 * c + c, c) = std_.segment(i * c, c);
  }
  return y;
}

Tensor StatisticsPool::do_backward(const Tensor& g) {
  const Eigen::Index b = input_.batch(), c = input_.dim(1), t = input_.dim(2);
  Tensor dx(input_.shape);
  auto rows = input_.matrix(b * c, t);
  auto out = dx.matrix(b * c, t);
  const double inv_t = 1.0 / static_cast<double>(t);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index ch = 0; ch < c; ++ch) {
      const Eigen::Index r = i * c + ch;
      const double gm = g.data[i * 2 * c + ch];
      const double gs = g.data[i * 2 * c + c + ch];
      out.row(r) = (gm * inv_t + gs * inv_t / std_[r] * (rows.row(r).array() - mean_[r])).matrix();
    }
  return dx;
}

// ---- Reshape / Transpose ---------------------------------------------------

Reshape::Reshape(Shape target) : target_(std::move(target)) {}

Shape Reshape::output_shape(const Shape& input) const {
  if (numel(input) != numel(target_))
    shape_fail("cannot reshape " + shape_string(input) + " to " + shape_string(target_));
  return target_;
}

Tensor Reshape::do_forward(const Tensor& x, Mode) {
  Shape s{x.batch()};
  s.insert(s.end(), target_.begin(), target_.end());
  return Tensor(s, x.data);
}

Tensor Reshape::do_backward(const Tensor& g) { return Tensor(last_input_shape_, g.data); }

Shape Transpose::output_shape(const Shape& input) const {
  if (input.size() != 2) shape_fail("expected a rank-2 example, got " + shape_string(input));
  return {input[1], input[0]};
}

namespace {
Tensor swap_last_two(const Tensor& x) {
  const Eigen::Index b = x.batch(), p = x.dim(1), q = x.dim(2);
  Tensor y({b, q, p});
  for (Eigen::Index i = 0; i < b; ++i)
    Eigen::Map<RowMatrix>(y.data.data() + i * p * q, q, p) =
        Eigen::Map<const RowMatrix>(x.data.data() + i * p * q, p, q).transpose();
  return y;
}
}  // namespace

Tensor Transpose::do_forward(const Tensor& x, Mode) { return swap_last_two(x); }
Tensor Transpose::do_backward(const Tensor& g) { return swap_last_two(g); }

// ---- factory ---------------------------------------------------------------

std::unique_ptr<Layer> make_layer(const json& spec) {
  const std::string kind = spec.at("kind").get<std::string>();
  auto idx = [&](const char* key) { return spec.at(key).get<Eigen::Index>(); };
  if (kind == "dense") return std::make_unique<Dense>(idx("in"), idx("out"));
  if (kind == "relu") return std::make_unique<Relu>();
  if (kind == "softmax") return std::make_unique<Softmax>();
  if (kind == "dropout") return std::make_unique<Dropout>(spec.at("p").get<double>());
  if (kind == "batchnorm")
    return std::make_unique<BatchNorm>(idx("channels"), spec.value("momentum", 0.9), spec.value("eps", 1e-5));
  if (kind == "maxpool2d") return std::make_unique<MaxPool2d>(idx("pool_h"), idx("pool_w"));
  if (kind == "statistics-pool") return std::make_unique<StatisticsPool>();
  if (kind == "reshape") return std::make_unique<Reshape>(spec.at("shape").get<Shape>());
  if (kind == "transpose") return std::make_unique<Transpose>();
  if (kind == "conv1d") return std::make_unique<Conv1d>(idx("in_channels"), idx("out_channels"), idx("kernel"));
  if (kind == "conv2d")
    return std::make_unique<Conv2d>(idx("in_channels"), idx("out_channels"), idx("kernel_h"), idx("kernel_w"));
  if (kind == "gru")
    return std::make_unique<Gru>(idx("input_size"), idx("hidden_size"), spec.at("return_sequences").get<bool>());
  throw ConfigError("unknown layer kind: " + kind);
}

}  // namespace wasncal::nn
