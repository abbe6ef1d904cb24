#include "wasncal/harness/calibration_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "wasncal/calib/align.hpp"
#include "wasncal/calib/scale.hpp"
#include "wasncal/errors.hpp"
#include "wasncal/scene/render.hpp"

namespace wasncal::harness {

using Eigen::Index;

DoaErrorModel fit_doa_error_model(const std::vector<double>& errors_rad, double outlier_deg) {
  if (errors_rad.empty()) throw MeasurementUnavailable("no DoA errors to fit a noise model to");
  const double limit = outlier_deg * calib::kDeg;
  std::complex<double> sum = 0.0;
  long inliers = 0;
  for (double e : errors_rad)
    if (std::abs(e) <= limit) {
      sum += std::polar(1.0, e);
      ++inliers;
    }
  DoaErrorModel m;
  m.count = static_cast<long>(errors_rad.size());
  m.outlier_fraction = 1.0 - static_cast<double>(inliers) / static_cast<double>(errors_rad.size());
  if (inliers > 0) {
    const double r = std::min(1.0, std::abs(sum) / static_cast<double>(inliers));
    m.noise_std_deg = r > 0.0 ? std::sqrt(-2.0 * std::log(r)) / calib::kDeg : outlier_deg;
  }
  return m;
}

Eigen::MatrixXd fused_distance_matrix(const std::vector<dist::DistanceEstimate>& estimates, Index num_nodes,
                                      Index num_sources, const dist::DistanceClassGrid& grid) {
  if (static_cast<Index>(estimates.size()) != 3 * num_nodes * num_sources)
    throw DomainError("fused distances: three estimates per node and source expected");
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(num_nodes, num_sources, std::numeric_limits<double>::quiet_NaN());
  for (Index i = 0; i < num_sources; ++i)
    for (Index j = 0; j < num_nodes; ++j) {
      const auto k = static_cast<std::size_t>(3 * (i * num_nodes + j));
      const auto f = dist::fuse_node_estimates({estimates[k], estimates[k + 1], estimates[k + 2]}, grid);
      if (f.kind == dist::FusedEstimate::Kind::Numeric) d(j, i) = *f.distance;
    }
  return d;
}

ScenarioOutcome calibrate_scenario(const calib::DoAObservationSet& observations, const Eigen::MatrixXd& distances,
                                   const std::optional<calib::Geometry>& truth, const calib::RansacConfig& ransac) {
  ScenarioOutcome out;
  if (truth) out.report.truth = *truth;
  try {
    out.report.result = calib::ransac_calibrate(observations, ransac);
  } catch (const CalibrationFailure& e) {
    out.failure = std::string("calibration: ") + e.what();
    return out;
  } catch (const DomainError& e) {
    out.failure = std::string("calibration: ") + e.what();
    return out;
  }
  auto& result = out.report.result;
  double v = 0.0;
  try {
    v = calib::scale_factor(result.geometry, calib::restrict_to_sources(distances, result.located));
  } catch (const ScaleUnavailable& e) {
    out.failure = std::string("scale: ") + e.what();
    return out;
  }
  result.scale = v;
  out.report.scaled = result.geometry.scaled(v);
  if (truth) {
    out.report.aligned = calib::align_to(*out.report.scaled, *truth);
    out.mpe = calib::mpe(out.report.aligned->nodes, truth->nodes);
    out.report.mpe = out.mpe;
  }
  return out;
}

ScenarioOutcome calibrate_scene(const scene::SceneSpec& scene, const CalibrateOptions& options, nn::Network* model,
                                const ModelSpec* spec, nn::Network* extractor) {
  const calib::Geometry truth = calib::geometry_from_scene(scene);
  const bool need_signals = !options.synthetic_doa_deg || !options.ground_truth_distances;
  std::vector<scene::SignalBuffer> signals;
  if (need_signals) {
    scene::DefaultSignalProvider provider(options.speech_dir);
    signals = scene::render_node_signals(scene, provider);
  }

  calib::DoAObservationSet obs;
  if (options.synthetic_doa_deg) {
    Rng rng = make_rng(options.seed, "synthetic-doa");
    obs = calib::synth_doa_observations(truth, {*options.synthetic_doa_deg, 0.0}, rng);
  } else {
    obs = calib::estimate_observations(scene, signals, calib::SrpPhatDoa{});
  }

  Eigen::MatrixXd distances;
  if (options.ground_truth_distances) {
    distances = truth.distances();
  } else {
    if (model == nullptr || spec == nullptr) throw ConfigError("calibrate: a distance model is required");
    if (spec->rvector && extractor == nullptr) throw ConfigError("calibrate: the model needs an R-vector extractor");
    FeatureSet records;
    for (std::size_t i = 0; i < scene.sources.size(); ++i)
      for (std::size_t j = 0; j < scene.nodes.size(); ++j) {
        const auto& e = scene.sources[i];
        Index begin = static_cast<Index>(std::llround(e.start * scene.sample_rate));
        if (!scene.node_offsets.empty()) begin += scene.node_offsets[j];
        const Index length = signals[j].length();
        begin = std::clamp<Index>(begin, 0, length);
        const Index end = std::min(length, begin + static_cast<Index>(std::llround(e.duration * scene.sample_rate)));
        PairFeatures f = featurize_segment(signals[j], begin, end, options.features);
        f.distance = (e.position - scene.nodes[j].center).norm();
        records.push_back(std::move(f));
      }
    nn::RowMatrix rv;
    if (spec->rvector) rv = embed_rvectors(*extractor, records);
    const auto data = make_distance_dataset(*spec, records, spec->rvector ? &rv : nullptr);
    distances = fused_distance_matrix(dist::estimate_distances(*model, data, {}), truth.num_nodes(),
                                      truth.num_sources());
  }

  calib::RansacConfig ransac = options.ransac;
  ransac.seed = derive_seed(options.seed, "ransac");
  auto out = calibrate_scenario(obs, distances, truth, ransac);
  out.report.extra["doa"] = options.synthetic_doa_deg ? "synthetic" : "srp-phat";
  out.report.extra["distances"] = options.ground_truth_distances ? "ground-truth" : "model";
  return out;
}

}  // namespace wasncal::harness
