#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "wasncal/nn/adam.hpp"
#include "wasncal/nn/checkpoint.hpp"
#include "wasncal/nn/gradcheck.hpp"
#include "wasncal/nn/loss.hpp"
#include "wasncal/nn/network.hpp"

using namespace wasncal;
using namespace wasncal::nn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = scale * standard_normal(rng);
  return t;
}

std::vector<int> random_labels(Eigen::Index n, int classes, Rng& rng) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = d(rng);
  return y;
}

void init(Layer& layer, std::uint64_t seed = 1) {
  Rng rng = make_rng(seed, "test.init");
  layer.initialize(rng);
}

// A small network touching every layer kind on the CRNN and R-vector paths.
json tiny_mixed_architecture() {
  return {{"name", "tiny"},
          {"input_shape", {1, 8, 6}},
          {"aux_width", 3},
          {"tap", 0},
          {"trunk",
           {{{"kind", "conv2d"}, {"in_channels", 1}, {"out_channels", 2}, {"kernel_h", 3}, {"kernel_w", 3}},
            {{"kind", "batchnorm"}, {"channels", 2}},
            {{"kind", "relu"}},
            {{"kind", "maxpool2d"}, {"pool_h", 2}, {"pool_w", 2}},
            {{"kind", "reshape"}, {"shape", {8, 3}}},
            {{"kind", "conv1d"}, {"in_channels", 8}, {"out_channels", 4}, {"kernel", 3}},
            {{"kind", "transpose"}},
            {{"kind", "gru"}, {"input_size", 4}, {"hidden_size", 5}, {"return_sequences", true}},
            {{"kind", "gru"}, {"input_size", 5}, {"hidden_size", 5}, {"return_sequences", false}}}},
          {"head",
           {{{"kind", "dense"}, {"in", 8}, {"out", 6}},
            {{"kind", "relu"}},
            {{"kind", "dropout"}, {"p", 0.3}},
            {{"kind", "dense"}, {"in", 6}, {"out", 4}}}}};
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.sample_shape() == Shape{3, 4});
  CHECK(t.flat().rows() == 2);
  CHECK(t.flat().cols() == 12);
  CHECK_THROWS_AS(Tensor({2, 2}, Eigen::VectorXd::Zero(5)), ShapeError);
  CHECK_THROWS_AS(t.matrix(5, 5), ShapeError);
}

TEST_CASE("dense layer with identity weights is the identity") {
  Dense d(4, 4);
  d.weight().value.matrix(4, 4) = RowMatrix::Identity(4, 4);
  d.bias().value.data.setZero();
  Rng rng = make_rng(0, "id");
  const Tensor x = random_tensor({3, 4}, rng);
  CHECK((d.forward(x, Mode::Eval).data - x.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dense gradient under a quadratic loss matches the closed form") {
  Rng rng = make_rng(1, "quad");
  Dense d(5, 3);
  init(d);
  const Eigen::Index b = 7;
  const Tensor x = random_tensor({b, 5}, rng);
  const Tensor target = random_tensor({b, 3}, rng);
  const Tensor y = d.forward(x, Mode::Train);
  // L = (1/B) sum ||x W^T - y||^2
  const RowMatrix resid = y.flat() - target.flat();
  d.backward(Tensor::from_matrix(2.0 / b * resid));
  const RowMatrix expected = (x.flat().transpose() * resid * 2.0 / b).transpose();
  CHECK((Eigen::Map<RowMatrix>(d.weight().grad.data(), 3, 5) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero loss gradient gives zero parameter gradients") {
  Network net(tiny_mixed_architecture(), 3);
  Rng rng = make_rng(2, "zero");
  const Tensor x = random_tensor({2, 1, 8, 6}, rng);
  const Tensor aux = random_tensor({2, 3}, rng);
  net.zero_grad();
  const Tensor logits = net.forward(x, Mode::Train, &aux);
  net.backward(Tensor(logits.shape));
  for (Parameter* p : net.parameters()) CHECK(p->grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward before forward is a state error") {
  Dense d(2, 2);
  CHECK_THROWS_AS(d.backward(Tensor({1, 2})), StateError);
  Network net(tiny_mixed_architecture(), 3);
  CHECK_THROWS_AS(net.backward(Tensor({1, 4})), StateError);
  Rng rng = make_rng(3, "state");
  const Tensor x = random_tensor({1, 1, 8, 6}, rng);
  const Tensor aux = random_tensor({1, 3}, rng);
  net.forward(x, Mode::Eval, &aux);
  CHECK_THROWS_AS(net.backward(Tensor({1, 4})), StateError);
}

TEST_CASE("shape errors name the offending layer") {
  json arch = {{"name", "bad"},
               {"input_shape", {10}},
               {"trunk", json::array()},
               {"head", {{{"kind", "dense"}, {"in", 10}, {"out", 5}}, {{"kind", "dense"}, {"in", 6}, {"out", 2}}}}};
  try {
    Network net(arch, 0);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("head.1.dense") != std::string::npos);
  }
  arch["head"][1]["in"] = 5;
  Network ok(arch, 0);
  CHECK_THROWS_AS(ok.forward(Tensor({2, 11}), Mode::Eval), ShapeError);
  CHECK_THROWS_AS(Dropout(1.0), ShapeError);
  CHECK_THROWS_AS(make_layer({{"kind", "lstm"}}), ConfigError);
}

TEST_CASE("softmax cross-entropy") {
  SUBCASE("uniform logits give ln C") {
    const auto r = softmax_cross_entropy(Tensor({4, 32}), {0, 5, 17, 31});
    CHECK(r.loss == doctest::Approx(std::log(32.0)).epsilon(1e-12));
  }
  SUBCASE("a huge correct logit drives the loss to zero") {
    Tensor z({1, 32});
    z.data[7] = 1e4;
    const auto r = softmax_cross_entropy(z, {7});
    CHECK(r.loss < 1e-12);
    CHECK(std::isfinite(r.loss));
  }
  SUBCASE("gradient is (softmax - onehot) / B and matches finite differences") {
    Rng rng = make_rng(4, "ce");
    Tensor z = random_tensor({5, 6}, rng, 3.0);
    const auto labels = random_labels(5, 6, rng);
    const auto r = softmax_cross_entropy(z, labels);
    RowMatrix expected = softmax_rows(z.flat());
    for (int i = 0; i < 5; ++i) expected(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    expected /= 5.0;
    CHECK((r.grad.flat() - expected).cwiseAbs().maxCoeff() < 1e-14);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const double saved = z.data[k];
      z.data[k] = saved + 1e-5;
      const double up = softmax_cross_entropy(z, labels).loss;
      z.data[k] = saved - 1e-5;
      const double down = softmax_cross_entropy(z, labels).loss;
      z.data[k] = saved;
      const double num = (up - down) / 2e-5;
      worst = std::max(worst, std::abs(num - r.grad.data[k]) / std::max({std::abs(num), std::abs(r.grad.data[k]), 1e-7}));
    }
    CHECK(worst <= 1e-4);
  }
  SUBCASE("labels outside [0, C) are rejected") {
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor({1, 4}), {4}), DomainError);
    CHECK_THROWS_AS(softmax_cross_entropy(Tensor({1, 4}), {-1}), DomainError);
  }
}

TEST_CASE("softmax rows are probability vectors") {
  Rng rng = make_rng(5, "softmax");
  const Tensor z = random_tensor({200, 32}, rng, 5.0);
  const RowMatrix p = softmax_rows(z.flat());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    CHECK(std::abs(p.row(i).sum() - 1.0) <= 1e-6);
    CHECK(p.row(i).minCoeff() > 0.0);
    CHECK(p.row(i).maxCoeff() < 1.0);
  }
  Softmax layer;
  const Tensor y = layer.forward(z, Mode::Eval);
  CHECK((y.flat() - p).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("adam") {
  Parameter p;
  p.name = "w";
  p.value = Tensor({3}, Eigen::Vector3d(1.0, -2.0, 0.5));
  p.grad = Eigen::VectorXd::Zero(3);
  std::vector<Parameter*> params{&p};

  SUBCASE("zero gradient leaves parameters unchanged and counts the step") {
    auto s = make_adam_state(params);
    adam_step(params, s);
    CHECK(s.step == 1);
    CHECK(p.value.data == Eigen::Vector3d(1.0, -2.0, 0.5));
  }
  SUBCASE("first step is lr * g / (|g| + eps)") {
    auto s = make_adam_state(params);
    p.grad = Eigen::Vector3d(0.3, -4.0, 1e-3);
    const Eigen::VectorXd before = p.value.data;
    adam_step(params, s);
    for (int i = 0; i < 3; ++i) {
      const double g = p.grad[i];
      CHECK(before[i] - p.value.data[i] == doctest::Approx(3e-4 * g / (std::abs(g) + 1e-8)).epsilon(1e-9));
    }
  }
  SUBCASE("constant gradient: steps approach lr * sign(g)") {
    auto s = make_adam_state(params);
    p.grad = Eigen::Vector3d(0.3, -4.0, 2.0);
    Eigen::VectorXd before;
    for (int k = 0; k < 500; ++k) {
      before = p.value.data;
      adam_step(params, s);
    }
    const Eigen::VectorXd step = before - p.value.data;
    CHECK(step[0] == doctest::Approx(3e-4).epsilon(1e-6));
    CHECK(step[1] == doctest::Approx(-3e-4).epsilon(1e-6));
  }
  SUBCASE("NaN gradient is a divergence naming the parameter") {
    auto s = make_adam_state(params);
    p.grad[1] = std::numeric_limits<double>::quiet_NaN();
    try {
      adam_step(params, s);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(std::string(e.what()).find("w") != std::string::npos);
    }
    CHECK(s.step == 0);
  }
}

TEST_CASE("every layer kind passes the gradient check in isolation") {
  Rng rng = make_rng(6, "layers");
  GradCheckOptions opt;
  auto check = [&](Layer& layer, const Tensor& x) {
    init(layer);
    const double err = layer_gradient_check(layer, x, opt);
    INFO(layer.kind());
    CHECK(err <= 1e-4);
  };
  {
    Dense l(6, 4);
    check(l, random_tensor({3, 6}, rng));
  }
  {
    Relu l;
    check(l, random_tensor({3, 10}, rng));
  }
  {
    Softmax l;
    check(l, random_tensor({3, 2, 5}, rng));
  }
  {
    Dropout l(0.5);
    check(l, random_tensor({4, 12}, rng));
  }
  {
    Conv1d l(3, 4, 5);
    check(l, random_tensor({2, 3, 9}, rng));
  }
  {
    Conv1d l(3, 2, 1);
    check(l, random_tensor({2, 3, 4}, rng));
  }
  {
    Conv2d l(2, 3, 7, 3);
    check(l, random_tensor({2, 2, 9, 5}, rng));
  }
  {
    MaxPool2d l(4, 2);
    check(l, random_tensor({2, 2, 9, 5}, rng));
  }
  {
    BatchNorm l(3);
    check(l, random_tensor({4, 3}, rng));
  }
  {
    BatchNorm l(3);
    check(l, random_tensor({3, 3, 4, 2}, rng));
  }
  {
    Gru l(4, 5, true);
    check(l, random_tensor({2, 6, 4}, rng));
  }
  {
    Gru l(4, 5, false);
    check(l, random_tensor({3, 7, 4}, rng));
  }
  {
    StatisticsPool l;
    check(l, random_tensor({2, 4, 9}, rng));
  }
  {
    Reshape l({6, 2});
    check(l, random_tensor({2, 3, 4}, rng));
  }
  {
    Transpose l;
    check(l, random_tensor({2, 3, 4}, rng));
  }
}

TEST_CASE("full network gradient check with frozen dropout") {
  Network net(tiny_mixed_architecture(), 11);
  Rng rng = make_rng(7, "net");
  const Tensor x = random_tensor({4, 1, 8, 6}, rng);
  const Tensor aux = random_tensor({4, 3}, rng);
  const auto labels = random_labels(4, 4, rng);
  CHECK(net.num_trainable() >= 200);
  CHECK(gradient_check(net, x, labels, &aux) <= 1e-4);
}

TEST_CASE("statistics pooling emits mean then standard deviation") {
  StatisticsPool pool;
  Tensor x({1, 2, 4});
  x.data << 1, 2, 3, 4, 5, 5, 5, 5;
  const Tensor y = pool.forward(x, Mode::Eval);
  CHECK(y.shape == Shape{1, 4});
  CHECK(y.data[0] == doctest::Approx(2.5));
  CHECK(y.data[1] == doctest::Approx(5.0));
  CHECK(y.data[2] == doctest::Approx(std::sqrt(1.25)));
  CHECK(y.data[3] < 1e-4);
  CHECK(pool.output_shape({128, 37}) == Shape{256});
}

TEST_CASE("GRU forwards only its last state when asked") {
  Gru seq(3, 4, true), last(3, 4, false);
  init(seq, 5);
  init(last, 5);
  Rng rng = make_rng(8, "gru");
  const Tensor x = random_tensor({2, 6, 3}, rng);
  const Tensor ys = seq.forward(x, Mode::Eval);
  const Tensor yl = last.forward(x, Mode::Eval);
  CHECK(yl.shape == Shape{2, 4});
  for (int b = 0; b < 2; ++b)
    CHECK((ys.data.segment((b * 6 + 5) * 4, 4) - yl.data.segment(b * 4, 4)).cwiseAbs().maxCoeff() == 0.0);
  // orthogonal recurrent blocks
  auto whh = last.parameters()[1]->value.matrix(12, 4);
  for (int g = 0; g < 3; ++g) {
    const RowMatrix blk = whh.middleRows(g * 4, 4);
    CHECK((blk * blk.transpose() - RowMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("max pooling uses floor semantics") {
  MaxPool2d pool(4, 2);
  CHECK(pool.output_shape({16, 109, 298}) == Shape{16, 27, 149});
  CHECK(pool.output_shape({16, 27, 149}) == Shape{16, 6, 74});
  CHECK_THROWS_AS(pool.output_shape({1, 3, 5}), ShapeError);
}

TEST_CASE("dropout and batchnorm modes") {
  Rng rng = make_rng(9, "modes");
  const Tensor x = random_tensor({8, 50}, rng);
  Dropout d(0.5);
  init(d);
  CHECK(d.forward(x, Mode::Eval).data == x.data);
  const Tensor a = d.forward(x, Mode::Train);
  const Eigen::Index zeros = (a.data.array() == 0.0).count();
  CHECK(zeros > 100);
  CHECK(zeros < 300);

  BatchNorm bn(50);
  const Tensor shifted(x.shape, (x.data.array() + 3.0).matrix());
  const Tensor yt = bn.forward(shifted, Mode::Train);
  CHECK(std::abs(yt.flat().col(0).mean()) < 1e-12);
  auto params = bn.parameters();
  const Eigen::VectorXd running_mean = params[2]->value.data;
  CHECK(running_mean[0] == doctest::Approx(0.1 * shifted.flat().col(0).mean()));
  bn.backward(yt);
  CHECK(params[2]->value.data == running_mean);
  CHECK(params[2]->grad.cwiseAbs().maxCoeff() == 0.0);
  // eval mode uses the running statistics
  const Tensor ye = bn.forward(shifted, Mode::Eval);
  const double expected = (shifted.data[0] - running_mean[0]) / std::sqrt(params[3]->value.data[0] + 1e-5);
  CHECK(ye.data[0] == doctest::Approx(expected));
}

TEST_CASE("fixed seed gives identical initialization and dropout masks") {
  Network a(tiny_mixed_architecture(), 21), b(tiny_mixed_architecture(), 21), c(tiny_mixed_architecture(), 22);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->value.data == pb[i]->value.data);
    if (pa[i]->trainable && pa[i]->value.data != pc[i]->value.data) any_diff = true;
  }
  CHECK(any_diff);
  Rng rng = make_rng(10, "det");
  const Tensor x = random_tensor({3, 1, 8, 6}, rng);
  const Tensor aux = random_tensor({3, 3}, rng);
  CHECK(a.forward(x, Mode::Train, &aux).data == b.forward(x, Mode::Train, &aux).data);
}

TEST_CASE("checkpoint round trip") {
  Network net(tiny_mixed_architecture(), 31);
  Rng rng = make_rng(11, "ckpt");
  const Tensor x = random_tensor({3, 1, 8, 6}, rng);
  const Tensor aux = random_tensor({3, 3}, rng);
  // move the batchnorm buffers off their defaults
  net.forward(x, Mode::Train, &aux);
  const Tensor before = net.forward(x, Mode::Eval, &aux);
  const auto path = std::filesystem::temp_directory_path() / "wasncal_test.ckpt";
  save_checkpoint(path, net, {{"epochs", 3}});
  auto loaded = load_checkpoint(path);
  CHECK(loaded.header.at("extra").at("epochs") == 3);
  CHECK(loaded.header.at("version") == kCheckpointVersion);
  const Tensor after = loaded.network->forward(x, Mode::Eval, &aux);
  CHECK(after.data == before.data);
  CHECK(loaded.network->tap_output().shape == Shape{3, 6});

  std::ofstream(path, std::ios::binary) << "garbage";
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
}
