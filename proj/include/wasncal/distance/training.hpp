#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "wasncal/distance/classes.hpp"
#include "wasncal/nn/adam.hpp"
#include "wasncal/nn/network.hpp"
#include "wasncal/random.hpp"

namespace wasncal::dist {

/// In-memory labelled examples, one row per example.
struct Dataset {
  nn::Shape feature_shape;        // per example
  nn::RowMatrix features;         // N x numel(feature_shape)
  nn::RowMatrix aux;              // N x R (R-vectors) or N x 0
  std::vector<int> labels;
  std::vector<double> distances;  // true distances; empty for non-distance tasks
  std::vector<long> groups;       // scene id; examples of one scene share it

  Eigen::Index size() const { return features.rows(); }
  bool has_aux() const { return aux.cols() > 0; }
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
  nn::Tensor batch_features(const std::vector<Eigen::Index>& rows) const;
  nn::Tensor batch_aux(const std::vector<Eigen::Index>& rows) const;
  void append(const Dataset& other);
  void check() const;
};

/// Moves a `fraction` of the groups (scenes) into the second set.
std::pair<Dataset, Dataset> split_by_group(const Dataset& data, double fraction, Rng& rng);

struct TrainConfig {
  int epochs = 50;
  Eigen::Index batch_size = 32;
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
  /// Restore the parameters of the best validation epoch at the end.
  bool keep_best = true;
  std::function<void(int epoch, double train_loss, double val_score)> on_epoch;
};

struct TrainResult {
  std::vector<double> train_loss;  // mean mini-batch loss per epoch
  std::vector<double> val_score;   // lower is better; empty without validation
  int best_epoch = -1;
  double best_score = 0.0;
};

using ScoreFn = std::function<double(nn::Network&, const Dataset&)>;

/// Mini-batch Adam on softmax cross-entropy. Deterministic given config.seed.
TrainResult train_classifier(nn::Network& net, const Dataset& train, const Dataset* validation,
                             const TrainConfig& config, const ScoreFn& score);

/// Eval-mode class posteriors, N x C.
nn::RowMatrix predict_posteriors(nn::Network& net, const Dataset& data, Eigen::Index batch_size = 128);

/// Per-example estimates (argmax-class midpoints).
std::vector<DistanceEstimate> estimate_distances(nn::Network& net, const Dataset& data, const DistanceClassGrid& grid);

/// Model-selection error: mean absolute error where a wrong in-range/OoR
/// decision costs the gap between the in-range distance and r_max.
double selection_mae(const std::vector<DistanceEstimate>& estimates, const std::vector<double>& truths,
                     const DistanceClassGrid& grid);

double classification_accuracy(nn::Network& net, const Dataset& data);

/// train_classifier scored by selection_mae on the validation set.
TrainResult train_distance_model(nn::Network& net, const Dataset& train, const Dataset* validation,
                                 const TrainConfig& config, const DistanceClassGrid& grid = {});

}  // namespace wasncal::dist
