#include "wasncal/distance/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "wasncal/nn/loss.hpp"

namespace wasncal::dist {

void Dataset::check() const {
  const auto n = static_cast<std::size_t>(size());
  if (features.cols() != nn::numel(feature_shape)) throw DomainError("dataset: feature width does not match shape");
  if (labels.size() != n) throw DomainError("dataset: label count mismatch");
  if (!distances.empty() && distances.size() != n) throw DomainError("dataset: distance count mismatch");
  if (!groups.empty() && groups.size() != n) throw DomainError("dataset: group count mismatch");
  if (aux.cols() > 0 && aux.rows() != size()) throw DomainError("dataset: aux row count mismatch");
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.feature_shape = feature_shape;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.aux.resize(has_aux() ? static_cast<Eigen::Index>(rows.size()) : 0, aux.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    const auto k = static_cast<Eigen::Index>(i);
    out.features.row(k) = features.row(r);
    if (has_aux()) out.aux.row(k) = aux.row(r);
    out.labels.push_back(labels[static_cast<std::size_t>(r)]);
    if (!distances.empty()) out.distances.push_back(distances[static_cast<std::size_t>(r)]);
    if (!groups.empty()) out.groups.push_back(groups[static_cast<std::size_t>(r)]);
  }
  return out;
}

nn::Tensor Dataset::batch_features(const std::vector<Eigen::Index>& rows) const {
  nn::Shape shape{static_cast<Eigen::Index>(rows.size())};
  shape.insert(shape.end(), feature_shape.begin(), feature_shape.end());
  nn::Tensor t(shape);
  auto m = t.flat();
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
  return t;
}

nn::Tensor Dataset::batch_aux(const std::vector<Eigen::Index>& rows) const {
  nn::Tensor t({static_cast<Eigen::Index>(rows.size()), aux.cols()});
  auto m = t.flat();
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = aux.row(rows[i]);
  return t;
}

void Dataset::append(const Dataset& other) {
  if (size() == 0 && feature_shape.empty()) {
    *this = other;
    return;
  }
  if (other.feature_shape != feature_shape || other.aux.cols() != aux.cols())
    throw DomainError("dataset append: incompatible layouts");
  const auto n = size();
  features.conservativeResize(n + other.size(), Eigen::NoChange);
  features.bottomRows(other.size()) = other.features;
  if (has_aux()) {
    aux.conservativeResize(n + other.size(), Eigen::NoChange);
    aux.bottomRows(other.size()) = other.aux;
  }
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  distances.insert(distances.end(), other.distances.begin(), other.distances.end());
  groups.insert(groups.end(), other.groups.begin(), other.groups.end());
}

std::pair<Dataset, Dataset> split_by_group(const Dataset& data, double fraction, Rng& rng) {
  if (data.groups.empty()) throw DomainError("split_by_group: dataset has no group ids");
  const std::set<long> unique(data.groups.begin(), data.groups.end());
  std::vector<long> ids(unique.begin(), unique.end());
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ids.size())));
  const std::set<long> val_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<Eigen::Index> a, b;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    (val_ids.count(data.groups[static_cast<std::size_t>(i)]) ? b : a).push_back(i);
  return {data.subset(a), data.subset(b)};
}

TrainResult train_classifier(nn::Network& net, const Dataset& train, const Dataset* validation,
                             const TrainConfig& config, const ScoreFn& score) {
  train.check();
  if (train.size() == 0) throw DomainError("training set is empty");
  if (config.batch_size < 1) throw ConfigError("batch size must be positive");
  auto params = net.trainable_parameters();
  auto state = nn::make_adam_state(params, config.adam);
  net.reseed_dropout(derive_seed(config.seed, "dropout"));

  TrainResult result;
  std::vector<Eigen::VectorXd> best;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = make_rng(config.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    long batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      // batchnorm needs at least two examples for batch statistics
      if (stop - start < 2 && batches > 0) break;
      const std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
      std::vector<int> labels;
      for (auto r : rows) labels.push_back(train.labels[static_cast<std::size_t>(r)]);
      const nn::Tensor x = train.batch_features(rows);
      const nn::Tensor aux = train.has_aux() ? train.batch_aux(rows) : nn::Tensor();
      net.zero_grad();
      const auto res = nn::softmax_cross_entropy(net.forward(x, nn::Mode::Train, train.has_aux() ? &aux : nullptr),
                                                 labels);
      if (!std::isfinite(res.loss))
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
      net.backward(res.grad);
      nn::adam_step(params, state);
      loss_sum += res.loss;
      ++batches;
    }
    result.train_loss.push_back(loss_sum / static_cast<double>(std::max<long>(1, batches)));
    double val = std::numeric_limits<double>::quiet_NaN();
    if (validation && validation->size() > 0) {
      val = score(net, *validation);
      result.val_score.push_back(val);
      if (result.best_epoch < 0 || val < result.best_score) {
        result.best_epoch = epoch;
        result.best_score = val;
        if (config.keep_best) {
          best.clear();
          for (nn::Parameter* p : net.parameters()) best.push_back(p->value.data);
        }
      }
    }
    if (config.on_epoch) config.on_epoch(epoch, result.train_loss.back(), val);
  }
  if (config.keep_best && !best.empty()) {
    auto all = net.parameters();
    for (std::size_t i = 0; i < all.size(); ++i) all[i]->value.data = best[i];
  }
  return result;
}

nn::RowMatrix predict_posteriors(nn::Network& net, const Dataset& data, Eigen::Index batch_size) {
  nn::RowMatrix out(data.size(), net.num_classes());
  for (Eigen::Index start = 0; start < data.size(); start += batch_size) {
    const Eigen::Index stop = std::min(data.size(), start + batch_size);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(stop - start));
    std::iota(rows.begin(), rows.end(), start);
    const nn::Tensor x = data.batch_features(rows);
    const nn::Tensor aux = data.has_aux() ? data.batch_aux(rows) : nn::Tensor();
    const nn::Tensor logits = net.forward(x, nn::Mode::Eval, data.has_aux() ? &aux : nullptr);
    out.middleRows(start, stop - start) = nn::softmax_rows(logits.flat());
  }
  return out;
}

std::vector<DistanceEstimate> estimate_distances(nn::Network& net, const Dataset& data, const DistanceClassGrid& grid) {
  const nn::RowMatrix post = predict_posteriors(net, data);
  std::vector<DistanceEstimate> out;
  out.reserve(static_cast<std::size_t>(post.rows()));
  for (Eigen::Index i = 0; i < post.rows(); ++i) out.push_back(estimate_from_posterior(post.row(i).transpose(), grid, i));
  return out;
}

double selection_mae(const std::vector<DistanceEstimate>& estimates, const std::vector<double>& truths,
                     const DistanceClassGrid& grid) {
  if (estimates.size() != truths.size()) throw DomainError("selection_mae: length mismatch");
  double total = 0.0;
  long n = 0;
  // a wrong in-range/OoR decision costs the gap to r_max, both ways
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const bool oor = truths[i] > grid.r_max;
    if (estimates[i].distance)
      total += oor ? grid.r_max - std::min(*estimates[i].distance, grid.r_max) : std::abs(*estimates[i].distance - truths[i]);
    else if (!oor)
      total += grid.r_max - truths[i];
    ++n;
  }
  if (n == 0) throw DomainError("selection_mae: no examples");
  return total / static_cast<double>(n);
}

double classification_accuracy(nn::Network& net, const Dataset& data) {
  const nn::RowMatrix post = predict_posteriors(net, data);
  long correct = 0;
  for (Eigen::Index i = 0; i < post.rows(); ++i) {
    Eigen::Index k = 0;
    post.row(i).maxCoeff(&k);
    if (k == data.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(std::max<Eigen::Index>(1, post.rows()));
}

TrainResult train_distance_model(nn::Network& net, const Dataset& train, const Dataset* validation,
                                 const TrainConfig& config, const DistanceClassGrid& grid) {
  if (validation && validation->distances.size() != static_cast<std::size_t>(validation->size()))
    throw DomainError("validation set needs true distances");
  return train_classifier(net, train, validation, config, [&](nn::Network& n, const Dataset& v) {
    return selection_mae(estimate_distances(n, v, grid), v.distances, grid);
  });
}

}  // namespace wasncal::dist
