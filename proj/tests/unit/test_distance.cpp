#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wasncal/distance/classes.hpp"
#include "wasncal/distance/fusion.hpp"
#include "wasncal/distance/gp.hpp"
#include "wasncal/distance/metrics.hpp"
#include "wasncal/distance/models.hpp"
#include "wasncal/distance/training.hpp"
#include "wasncal/nn/gradcheck.hpp"

using namespace wasncal;
using namespace wasncal::dist;

namespace {

nn::Tensor random_tensor(nn::Shape shape, Rng& rng) {
  nn::Tensor t(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = standard_normal(rng);
  return t;
}

std::vector<int> random_labels(Eigen::Index n, int classes, Rng& rng) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = d(rng);
  return y;
}

// Features that encode the distance through a smooth monotone curve per bin,
// loosely mimicking averaged diffuseness rising with distance.
Dataset toy_distance_set(int n, std::uint64_t seed, double noise = 0.02) {
  const DistanceClassGrid grid;
  Rng rng = make_rng(seed, "toy");
  Dataset d;
  const Eigen::Index f = 12;
  d.feature_shape = {f};
  d.features.resize(n, f);
  for (int i = 0; i < n; ++i) {
    const double dist = uniform(rng, 0.03, 3.0);
    for (Eigen::Index k = 0; k < f; ++k) {
      const double rate = 0.5 + 0.25 * static_cast<double>(k);
      d.features(i, k) = 1.0 - std::exp(-rate * dist) + noise * standard_normal(rng);
    }
    d.labels.push_back(grid.quantize(dist));
    d.distances.push_back(dist);
    d.groups.push_back(i);
  }
  return d;
}

}  // namespace

TEST_CASE("distance quantization") {
  const DistanceClassGrid g;
  CHECK(g.width() == doctest::Approx(0.0958064516).epsilon(1e-9));
  CHECK(g.quantize(0.03) == 0);
  CHECK(g.quantize(3.2) == 31);
  CHECK(g.quantize(1.5) == static_cast<int>(std::floor(1.47 / g.width())));
  CHECK(g.quantize(1.5) == 15);
  CHECK(g.quantize(3.0) == 30);
  CHECK(g.quantize(0.01) == 0);
  CHECK_THROWS_AS(g.quantize(0.0), DomainError);
  CHECK_THROWS_AS(g.quantize(-1.0), DomainError);
}

TEST_CASE("dequantization") {
  const DistanceClassGrid g;
  CHECK(*g.class_to_distance(0) == doctest::Approx(0.03 + g.width() / 2));
  CHECK(*g.class_to_distance(0) == doctest::Approx(0.0779).epsilon(1e-3));
  CHECK_FALSE(g.class_to_distance(31).has_value());
  for (int k = 0; k < 31; ++k) CHECK(g.quantize(*g.class_to_distance(k)) == k);
  Rng rng = make_rng(0, "deq");
  for (int i = 0; i < 10000; ++i) {
    const double d = uniform(rng, 0.03, 3.0);
    CHECK(std::abs(*g.class_to_distance(g.quantize(d)) - d) <= g.width() / 2 + 1e-12);
  }
  Eigen::VectorXd post = Eigen::VectorXd::Constant(32, 0.01);
  post[31] = 0.69;
  const auto e = estimate_from_posterior(post, g);
  CHECK(e.oor());
  CHECK(e.cls == 31);
}

TEST_CASE("model architectures match the published shapes") {
  SUBCASE("mlp") {
    MlpOptions o;
    o.use_rvector = true;
    const json a = mlp_architecture(o);
    CHECK(a["head"][0]["in"] == 109 + 512);
    o.use_rvector = false;
    const json b = mlp_architecture(o);
    int hidden = 0;
    for (const auto& l : b["head"])
      if (l["kind"] == "dense" && l["out"] == 1024) ++hidden;
    CHECK(hidden == 3);
    CHECK(b["head"][2]["kind"] == "dropout");
    CHECK(b["head"][2]["p"] == 0.5);
    nn::Network net(b, 0);
    CHECK(net.num_classes() == 32);
  }
  SUBCASE("crnn") {
    CrnnOptions o;
    o.use_rvector = true;
    nn::Network net = build_distance_model(o, 1);
    CHECK(net.trunk_width() == 256);
    CHECK(net.architecture()["head"][0]["in"] == 256 + 512);
    Rng rng = make_rng(1, "crnn");
    const nn::Tensor x = random_tensor({1, 1, 109, 298}, rng);
    const nn::Tensor aux = random_tensor({1, 512}, rng);
    const nn::Tensor y = net.forward(x, nn::Mode::Eval, &aux);
    CHECK(y.shape == nn::Shape{1, 32});

    o.time_pooling = CrnnTimePooling::Deferred;
    const json d = crnn_architecture(o);
    CHECK(d["trunk"][6]["pool_w"] == 1);
    CHECK(d["trunk"][13]["pool_w"] == 4);
    CHECK(d["trunk"][14]["shape"] == json({32 * 6, 74}));
    CHECK(nn::Network(d, 1).trunk_width() == 256);
  }
  SUBCASE("r-vector extractor") {
    for (Eigen::Index frames : {50, 298}) {
      RvectorOptions o;
      o.frames = frames;
      o.num_rir_classes = 50;
      nn::Network net = build_rvector_extractor(o, 2);
      CHECK(net.trunk_width() == 256);
      CHECK(net.num_classes() == 50);
      Rng rng = make_rng(2, "rvec");
      const nn::Tensor emb = net.embed(random_tensor({2, 23, frames}, rng));
      CHECK(emb.shape == nn::Shape{2, 512});
      CHECK(emb.data.minCoeff() >= 0.0);
    }
    RvectorOptions bad;
    bad.num_rir_classes = 1;
    CHECK_THROWS_AS(rvector_architecture(bad), ShapeError);
  }
}

TEST_CASE("all three architectures pass the gradient check at reduced widths") {
  Rng rng = make_rng(3, "gc");
  SUBCASE("mlp with r-vector and dropout") {
    MlpOptions o;
    o.features = 9;
    o.use_rvector = true;
    o.rvector_width = 5;
    o.hidden = 12;
    nn::Network net = build_distance_model(o, 4);
    const nn::Tensor x = random_tensor({4, 9}, rng), aux = random_tensor({4, 5}, rng);
    CHECK(nn::gradient_check(net, x, random_labels(4, 32, rng), &aux) <= 1e-4);
  }
  SUBCASE("crnn with r-vector") {
    CrnnOptions o;
    o.features = 17;
    o.frames = 9;
    o.use_rvector = true;
    o.rvector_width = 4;
    o.width_scale = 1.0 / 16.0;
    nn::Network net = build_distance_model(o, 5);
    const nn::Tensor x = random_tensor({3, 1, 17, 9}, rng), aux = random_tensor({3, 4}, rng);
    CHECK(nn::gradient_check(net, x, random_labels(3, 32, rng), &aux) <= 1e-4);
  }
  SUBCASE("r-vector extractor") {
    RvectorOptions o;
    o.frames = 7;
    o.num_rir_classes = 5;
    o.width_scale = 1.0 / 32.0;
    nn::Network net = build_rvector_extractor(o, 6);
    const nn::Tensor x = random_tensor({3, 23, 7}, rng);
    CHECK(nn::gradient_check(net, x, random_labels(3, 5, rng)) <= 1e-4);
  }
}

TEST_CASE("the CRNN is sensitive to time order") {
  CrnnOptions o;
  o.features = 17;
  o.frames = 12;
  o.width_scale = 1.0 / 8.0;
  nn::Network net = build_distance_model(o, 7);
  Rng rng = make_rng(8, "perm");
  const nn::Tensor x = random_tensor({1, 1, 17, 12}, rng);
  nn::Tensor reversed = x;
  for (Eigen::Index f = 0; f < 17; ++f)
    for (Eigen::Index t = 0; t < 12; ++t) reversed.data[f * 12 + t] = x.data[f * 12 + (11 - t)];
  const nn::Tensor a = net.forward(x, nn::Mode::Eval);
  const nn::Tensor b = net.forward(reversed, nn::Mode::Eval);
  CHECK((a.data - b.data).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("fusion rule") {
  const DistanceClassGrid g;
  auto f = fuse_node_estimates(std::vector<int>{7, 7, 9}, g);
  CHECK(f.kind == FusedEstimate::Kind::Numeric);
  CHECK(f.cls == 7);
  CHECK(*f.distance == doctest::Approx(*g.class_to_distance(7)));
  CHECK(fuse_node_estimates(std::vector<int>{9, 7, 9}, g).cls == 9);
  CHECK(fuse_node_estimates(std::vector<int>{3, 12, 25}, g).kind == FusedEstimate::Kind::Discard);
  CHECK(fuse_node_estimates(std::vector<int>{7, 7, 31}, g).kind == FusedEstimate::Kind::OoR);
  CHECK_THROWS_AS(fuse_node_estimates(std::vector<int>{1, 1}, g), DomainError);
}

TEST_CASE("distance metrics") {
  const DistanceClassGrid g;
  CHECK(mae({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK(mae({1.1, 2.1, 0.6}, {1.0, 2.0, 0.5}) == doctest::Approx(0.1));
  CHECK_THROWS_AS(mae({}, {}), DomainError);

  using K = FusedEstimate::Kind;
  const auto s = summarize_mae({{K::Numeric, 1.0, 1.2}, {K::Numeric, 2.0, 3.5}, {K::OoR, 0.0, 2.0},
                                {K::Discard, 0.0, 1.0}, {K::Numeric, 0.5, 0.4}},
                               g);
  CHECK(s.used == 2);
  CHECK(s.mae == doctest::Approx(0.15));
  CHECK(s.oor_truth == 1);
  CHECK(s.missed_as_oor == 1);
  CHECK(s.discards == 1);

  CHECK(oor_f1({true, false, true}, {true, false, true}) == 1.0);
  CHECK(oor_f1({false, false, false}, {true, false, true}) == 0.0);
  CHECK(oor_f1({true, true, false, false}, {true, false, true, false}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(oor_f1({true}, {false}), DomainError);

  Eigen::VectorXd th(4);
  th << 0.0, 0.1, 0.25, 10.0;
  const Eigen::VectorXd cdf = error_cdf({0.05, 0.2, 0.1, 0.3}, th);
  CHECK(cdf[0] == 0.0);
  CHECK(cdf[1] == 0.5);
  CHECK(cdf[2] == 0.75);
  CHECK(cdf[3] == 1.0);
}

TEST_CASE("gaussian process baseline") {
  Rng rng = make_rng(9, "gp");
  const Eigen::Index n = 30;
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = uniform(rng, 0.0, 1.0);
    y[i] = 0.03 + 2.9 * x[i] * x[i];
  }
  SUBCASE("noise-free GP interpolates its training targets") {
    GpModel gp(x, y, {1.0, 0.3, 2.0, 0.0});
    for (Eigen::Index i = 0; i < n; ++i) CHECK(gp.predict(x[i]) == doctest::Approx(y[i]).epsilon(1e-4));
  }
  SUBCASE("squared-exponential kernel matrix is symmetric positive definite") {
    Eigen::VectorXd pts = Eigen::VectorXd::LinSpaced(15, 0.0, 1.0);
    const Eigen::MatrixXd k = GpModel::kernel(pts, pts, 0.2, 2.0);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK(gamma_exponential(0.3, 0.2, 2.0) == doctest::Approx(std::exp(-(0.3 / 0.2) * (0.3 / 0.2))));
  }
  SUBCASE("fit, clamp and errors") {
    const GpModel gp = gp_fit(x, y);
    CHECK(gp.hyper().gamma > 0.0);
    CHECK(gp.hyper().gamma <= 2.0);
    CHECK(gp.predict(0.5) == doctest::Approx(0.03 + 2.9 * 0.25).epsilon(0.05));
    CHECK(gp.predict(50.0) >= 0.03);
    CHECK(gp.predict(-50.0) <= 3.0);
    CHECK_THROWS_AS(gp_fit(x.head(9), y.head(9)), DomainError);
    CHECK_THROWS_AS(GpModel(x, y, {1.0, 0.3, 2.5, 0.01}), DomainError);
  }
  SUBCASE("matched environment beats a mixed one") {
    // two "rooms" with different diffuseness-distance curves
    auto curve = [](double d, double room) { return 1.0 - std::exp(-d * room); };
    Eigen::VectorXd xa(80), ya(80);
    for (Eigen::Index i = 0; i < 80; ++i) {
      ya[i] = uniform(rng, 0.03, 3.0);
      xa[i] = curve(ya[i], 0.8) + 0.01 * standard_normal(rng);
    }
    const GpModel gp = gp_fit(xa, ya);
    std::vector<double> err_matched, err_cross;
    for (int i = 0; i < 200; ++i) {
      const double d = uniform(rng, 0.03, 3.0);
      err_matched.push_back(std::abs(gp.predict(curve(d, 0.8) + 0.01 * standard_normal(rng)) - d));
      const double room = i % 2 ? 0.8 : 1.6;
      err_cross.push_back(std::abs(gp.predict(curve(d, room) + 0.01 * standard_normal(rng)) - d));
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    CHECK(mean(err_matched) < mean(err_cross));
  }
}

TEST_CASE("training on a toy set beats the uniform guess, and is deterministic") {
  const Dataset data = toy_distance_set(200, 1);
  MlpOptions o;
  o.features = 12;
  o.hidden = 64;
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 11;
  cfg.adam.lr = 1e-3;
  nn::Network a = build_distance_model(o, 12);
  const auto ra = train_distance_model(a, data, nullptr, cfg);
  CHECK(ra.train_loss.back() < std::log(32.0));
  CHECK(ra.train_loss.back() < ra.train_loss.front());

  nn::Network b = build_distance_model(o, 12);
  const auto rb = train_distance_model(b, data, nullptr, cfg);
  CHECK(ra.train_loss == rb.train_loss);
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.data == pb[i]->value.data);
}

TEST_CASE("validation keeps the best epoch; shuffled labels learn nothing") {
  const DistanceClassGrid g;
  const Dataset full = toy_distance_set(1200, 2);
  Rng split_rng = make_rng(3, "split");
  auto [train, val] = split_by_group(full, 0.25, split_rng);
  CHECK(val.size() == 300);
  MlpOptions o;
  o.features = 12;
  o.hidden = 64;
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 13;
  cfg.adam.lr = 1e-3;

  nn::Network net = build_distance_model(o, 14);
  const auto r = train_distance_model(net, train, &val, cfg);
  const double val_mae = selection_mae(estimate_distances(net, val, g), val.distances, g);
  CHECK(val_mae == doctest::Approx(r.best_score).epsilon(1e-12));
  CHECK(val_mae < 0.4);

  Dataset shuffled = train;
  Rng shuffle_rng = make_rng(4, "labels");
  std::shuffle(shuffled.labels.begin(), shuffled.labels.end(), shuffle_rng);
  nn::Network control = build_distance_model(o, 14);
  cfg.keep_best = false;
  train_distance_model(control, shuffled, nullptr, cfg);
  // Random pairs on [0.03, 3]: |U - V| averages L/3 ~ 0.99; the best
  // constant guess (the median) still gives L/4 ~ 0.74.
  const double control_mae = selection_mae(estimate_distances(control, val, g), val.distances, g);
  CHECK(control_mae > 0.6);
  CHECK(val_mae < 0.5 * control_mae);
}

TEST_CASE("non-finite loss is a divergence") {
  const Dataset data = toy_distance_set(40, 5);
  MlpOptions o;
  o.features = 12;
  o.hidden = 8;
  nn::Network net = build_distance_model(o, 15);
  net.parameters()[0]->value.data[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train_distance_model(net, data, nullptr, cfg), DivergenceError);
}
