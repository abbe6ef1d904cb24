#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wasncal/calib/types.hpp"
#include "wasncal/distance/classes.hpp"
#include "wasncal/distance/fusion.hpp"
#include "wasncal/distance/training.hpp"
#include "wasncal/dsp/cdr.hpp"
#include "wasncal/dsp/mfcc.hpp"
#include "wasncal/harness/config.hpp"
#include "wasncal/nn/network.hpp"
#include "wasncal/scene/signals.hpp"

namespace wasncal::harness {

enum class SetKind { DistanceTrain, DistanceEval, RvectorTrain, GpRoom, Calibration, DoaProbe };

/// A named scene collection. Distance sets list their in-range scenes first,
/// then the out-of-range ones; GP sets list training scenes, then matched
/// test scenes.
struct SetId {
  SetKind kind = SetKind::DistanceTrain;
  scene::SignalKind signal = scene::SignalKind::WhiteNoise;
  double t60 = 0.0;  // calibration and DoA probe sets only

  std::string name() const;
  bool per_event() const { return kind == SetKind::Calibration || kind == SetKind::DoaProbe; }
};

struct NoiseCondition {
  enum class Kind { Clean, Fixed, Training };
  Kind kind = Kind::Clean;
  double snr_db = std::numeric_limits<double>::infinity();

  static NoiseCondition clean() { return {}; }
  static NoiseCondition fixed(double db) { return {Kind::Fixed, db}; }
  /// Integer SNR drawn per scene from [5, 30] dB.
  static NoiseCondition training() { return {Kind::Training, 0.0}; }
  std::string name() const;
};

struct FeatureConfig {
  dsp::DiffusenessConfig diffuseness;
  dsp::MfccConfig mfcc;
};

/// Features of one source-node constellation: diffuseness of the three
/// opposite pairs and MFCCs of microphone 0, all rounded to float32 so that
/// values read back from disk equal freshly computed ones.
struct PairFeatures {
  long scene = 0;
  int node = 0;
  int source = 0;
  double distance = 0.0;
  bool oor = false;
  double t60 = 0.0;
  double snr_db = std::numeric_limits<double>::infinity();
  int label = -1;  // room class in R-vector sets
  std::array<Eigen::VectorXd, 3> averages;  // per-bin time averages
  std::array<double, 3> zeta{};
  std::array<Eigen::MatrixXf, 3> maps;      // bins x frames; empty unless loaded
  Eigen::MatrixXf mfcc;                     // 23 x frames; empty unless loaded
};

using FeatureSet = std::vector<PairFeatures>;

/// Features of samples [begin, end) of a node recording. With `snr_db`
/// finite, white noise at that SNR (measured over the segment) is added first.
PairFeatures featurize_segment(const scene::SignalBuffer& node, Eigen::Index begin, Eigen::Index end,
                               const FeatureConfig& config, double snr_db = std::numeric_limits<double>::infinity(),
                               Rng* noise_rng = nullptr);

/// Scenes of a set, each from stream ("scene/<set>", index) of the root seed.
std::vector<scene::SceneSpec> sample_set(const ExperimentConfig& config, const SetId& set);
/// Number of in-range scenes at the front of a distance set, or of training
/// scenes at the front of a GP set.
int primary_count(const ExperimentConfig& config, const SetId& set);

/// Three examples per record (pair-major). The MLP takes the per-bin averages
/// (or only the R-vector when diffuseness is off); the CRNN takes the maps,
/// which must be loaded. Labels come from the class grid.
dist::Dataset make_distance_dataset(const ModelSpec& spec, const FeatureSet& records, const nn::RowMatrix* rvectors,
                                    const dist::DistanceClassGrid& grid = {});

/// R-vectors of records with loaded MFCCs, N x R.
nn::RowMatrix embed_rvectors(nn::Network& extractor, const FeatureSet& records, Eigen::Index batch_size = 64);

/// Per-node decisions of consecutive triples of per-pair estimates.
std::vector<dist::FusedEstimate> fuse_triples(const std::vector<dist::DistanceEstimate>& estimates,
                                              const dist::DistanceClassGrid& grid);

/// Run directory holding every artifact of an experiment:
///   config.json, scenes/<set>.json, features/<set>/<noise>/manifest.jsonl
///   plus tensors, observations/<set>.json, models/<name>.ckpt, metrics/.
/// Each accessor loads an artifact when present and regenerates (and
/// stores) it otherwise, so deleting downstream files and re-running yields
/// identical results.
class Workspace {
 public:
  explicit Workspace(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path metrics_dir() const { return root_ / "metrics"; }
  const FeatureConfig& feature_config() const { return features_config_; }
  scene::SourceSignalProvider& provider() { return *provider_; }

  const std::vector<scene::SceneSpec>& scenes(const SetId& set);
  /// One record per scene (distance, R-vector, GP sets) or per node and event
  /// (calibration and probe sets), averages only.
  const FeatureSet& features(const SetId& set, const NoiseCondition& noise);
  /// Copies of the given records with maps and/or MFCCs read from disk.
  FeatureSet load_full(const SetId& set, const NoiseCondition& noise, const std::vector<std::size_t>& records,
                       bool maps, bool mfcc);
  /// SRP-PHAT observations of every scene of a calibration or probe set.
  const std::vector<calib::DoAObservationSet>& observations(const SetId& set);

  /// Trained model for a cell: loaded from models/<name>.ckpt or trained
  /// now (ConfigError naming the cell when training inline is disabled).
  nn::Network& model(const ModelSpec& spec);
  bool has_model(const ModelSpec& spec) const;
  nn::Network& rvector_extractor(scene::SignalKind signal);
  /// R-vectors of all records of a set under a noise condition.
  const nn::RowMatrix& rvectors(const SetId& set, const NoiseCondition& noise, scene::SignalKind extractor_signal);

  /// Per-pair estimates of the given records (three per record).
  std::vector<dist::DistanceEstimate> predict(const ModelSpec& spec, const SetId& set, const NoiseCondition& noise,
                                              const std::vector<std::size_t>& records);

  /// Indices 0..n-1 of a set's records, optionally only the primary part.
  std::vector<std::size_t> records(const SetId& set, const NoiseCondition& noise, bool primary_only);

  /// Evenly thinned records for the CRNN when `crnn_max_pairs` caps it.
  std::vector<std::size_t> capped(const ModelSpec& spec, std::vector<std::size_t> records) const;

  /// Training and evaluation sets of a model.
  SetId train_set(const ModelSpec& spec) const;
  SetId eval_set(const ModelSpec& spec) const;
  NoiseCondition train_noise(const ModelSpec& spec) const;

 private:
  void featurize(const SetId& set, const NoiseCondition& noise);
  std::filesystem::path feature_dir(const SetId& set, const NoiseCondition& noise) const;
  void train_model(const ModelSpec& spec, const std::filesystem::path& path);
  void train_rvector_extractor(scene::SignalKind signal, const std::filesystem::path& path);

  ExperimentConfig config_;
  std::filesystem::path root_;
  FeatureConfig features_config_;
  std::unique_ptr<scene::SourceSignalProvider> provider_;
  std::map<std::string, std::vector<scene::SceneSpec>> scenes_;
  std::map<std::string, FeatureSet> features_;
  std::map<std::string, std::vector<calib::DoAObservationSet>> observations_;
  std::map<std::string, std::unique_ptr<nn::Network>> models_;
  std::map<std::string, nn::RowMatrix> rvectors_;
};

}  // namespace wasncal::harness
