#include "wasncal/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wasncal/nn/loss.hpp"

namespace wasncal::nn {

namespace {

struct Entry {
  double* value;
  double analytic;
};

double rel_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

std::vector<std::size_t> pick(std::size_t total, int want, Rng& rng) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  if (want >= 0 && static_cast<std::size_t>(want) < total) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(want));
  }
  return idx;
}

template <typename LossFn>
double compare(std::vector<Entry>& entries, const LossFn& loss, const GradCheckOptions& o, Rng& rng) {
  // central differences carry roundoff of about eps_mach |L| / epsilon; gaps
  // far below that scale say nothing about the analytic gradient
  const double roundoff = std::numeric_limits<double>::epsilon() * std::abs(loss()) / o.epsilon;
  const double floor = std::max(o.denom_floor, 1e5 * roundoff);
  double worst = 0.0;
  for (std::size_t k : pick(entries.size(), o.num_samples, rng)) {
    double* v = entries[k].value;
    const double saved = *v;
    *v = saved + o.epsilon;
    const double up = loss();
    *v = saved - o.epsilon;
    const double down = loss();
    *v = saved;
    worst = std::max(worst, rel_error(entries[k].analytic, (up - down) / (2.0 * o.epsilon), floor));
  }
  return worst;
}

}  // namespace

double gradient_check(Network& net, const Tensor& x, const std::vector<int>& labels, const Tensor* aux,
                      GradCheckOptions options) {
  auto params = net.parameters();
  std::vector<Eigen::VectorXd> snapshot;
  for (Parameter* p : params) snapshot.push_back(p->value.data);

  // draw the dropout masks once, then keep them
  net.set_dropout_frozen(false);
  net.forward(x, Mode::Train, aux);
  net.set_dropout_frozen(true);
  auto restore_buffers = [&] {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (!params[i]->trainable) params[i]->value.data = snapshot[i];
  };

  restore_buffers();
  net.zero_grad();
  const auto res = softmax_cross_entropy(net.forward(x, Mode::Train, aux), labels);
  net.backward(res.grad);

  std::vector<Entry> entries;
  for (Parameter* p : params)
    if (p->trainable)
      for (Eigen::Index i = 0; i < p->value.size(); ++i) entries.push_back({&p->value.data[i], p->grad[i]});

  auto loss = [&] { return softmax_cross_entropy(net.forward(x, Mode::Train, aux), labels).loss; };
  Rng rng = make_rng(options.seed, "gradcheck");
  const double worst = compare(entries, loss, options, rng);

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.data = snapshot[i];
  net.set_dropout_frozen(false);
  net.zero_grad();
  return worst;
}

double layer_gradient_check(Layer& layer, const Tensor& x, GradCheckOptions options) {
  auto params = layer.parameters();
  std::vector<Eigen::VectorXd> snapshot;
  for (Parameter* p : params) snapshot.push_back(p->value.data);
  auto restore_buffers = [&] {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (!params[i]->trainable) params[i]->value.data = snapshot[i];
  };

  if (auto* d = dynamic_cast<Dropout*>(&layer)) {
    d->set_frozen(false);
    layer.forward(x, Mode::Train);
    d->set_frozen(true);
  }
  Tensor input = x;
  const Tensor y0 = layer.forward(input, Mode::Train);
  restore_buffers();
  Rng rng = make_rng(options.seed, "gradcheck.layer");
  Eigen::VectorXd weights(y0.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights[i] = standard_normal(rng);

  for (Parameter* p : params) p->grad.setZero();
  layer.forward(input, Mode::Train);
  const Tensor dx = layer.backward(Tensor(y0.shape, weights));

  std::vector<Entry> entries;
  for (Parameter* p : params)
    if (p->trainable)
      for (Eigen::Index i = 0; i < p->value.size(); ++i) entries.push_back({&p->value.data[i], p->grad[i]});
  for (Eigen::Index i = 0; i < input.size(); ++i) entries.push_back({&input.data[i], dx.data[i]});

  auto loss = [&] { return layer.forward(input, Mode::Train).data.dot(weights); };
  const double worst = compare(entries, loss, options, rng);

  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value.data = snapshot[i];
    params[i]->grad.setZero();
  }
  if (auto* d = dynamic_cast<Dropout*>(&layer)) d->set_frozen(false);
  return worst;
}

}  // namespace wasncal::nn
