#include "wasncal/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "wasncal/calib/align.hpp"
#include "wasncal/distance/gp.hpp"
#include "wasncal/distance/metrics.hpp"
#include "wasncal/errors.hpp"
#include "wasncal/harness/calibration_pipeline.hpp"
#include "wasncal/harness/log.hpp"
#include "wasncal/harness/parallel.hpp"

namespace wasncal::harness {

namespace fs = std::filesystem;
using Eigen::Index;

namespace {

const dist::DistanceClassGrid kGrid{};

MetricsRecord make_record(const Workspace& ws, const std::string& experiment, const std::string& metric, json labels,
                          json value) {
  return {experiment, metric, std::move(labels), std::move(value), ws.config().hash()};
}

json model_labels(const ModelSpec& m) {
  return {{"model", m.name()}, {"label", m.label()}, {"signal", scene::to_string(m.signal)}};
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(6);
  return out;
}

void save(Workspace& ws, const std::string& stem, const std::vector<MetricsRecord>& records) {
  write_records(ws.metrics_dir() / (stem + ".json"), records);
  write_records_csv(ws.metrics_dir() / (stem + "_records.csv"), records);
}

// Per-pair outcome of an estimate against its true distance.
dist::Outcome pair_outcome(const dist::DistanceEstimate& e, double truth) {
  dist::Outcome o;
  o.truth = truth;
  o.kind = e.oor() ? dist::FusedEstimate::Kind::OoR : dist::FusedEstimate::Kind::Numeric;
  if (!e.oor()) o.estimate = *e.distance;
  return o;
}

// Error of a per-pair estimate of an in-range truth; calling it OoR costs the gap to r_max.
double pair_error(const dist::DistanceEstimate& e, double truth) {
  return e.oor() ? std::abs(kGrid.r_max - truth) : std::abs(*e.distance - truth);
}

std::optional<double> f1_or_empty(const std::vector<bool>& predicted, const std::vector<bool>& truth) {
  if (std::find(truth.begin(), truth.end(), true) == truth.end()) return std::nullopt;
  return dist::oor_f1(predicted, truth);
}

// MAE summary, or nothing when no in-range truth received a numeric estimate.
std::optional<dist::MaeSummary> try_mae(const std::vector<dist::Outcome>& outcomes) {
  for (const auto& o : outcomes)
    if (o.kind == dist::FusedEstimate::Kind::Numeric && o.truth <= kGrid.r_max) return dist::summarize_mae(outcomes, kGrid);
  return std::nullopt;
}

std::optional<double> mae_value(const std::optional<dist::MaeSummary>& s) {
  return s ? std::optional<double>(s->mae) : std::nullopt;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(6) << *v;
  return os.str();
}

}  // namespace

Eigen::VectorXd cdf_thresholds(double max_error, double step) {
  const auto n = static_cast<Index>(std::floor(max_error / step + 1e-9)) + 1;
  Eigen::VectorXd t(n);
  for (Index i = 0; i < n; ++i) t[i] = static_cast<double>(i) * step;
  return t;
}

std::vector<MetricsRecord> run_table1(Workspace& ws) {
  const auto& cfg = ws.config();
  std::vector<MetricsRecord> records;
  std::ofstream csv = open_csv(ws.metrics_dir() / "table1.csv");
  csv << "architecture,diffuseness,rvector";
  for (auto s : cfg.table1.signals) csv << ",mae_" << scene::to_string(s);
  csv << '\n';
  for (const auto& row : cfg.table1.rows) {
    csv << (row.arch == dist::Arch::Mlp ? "MLP" : "CRNN") << ',' << (row.diffuseness ? "yes" : "no") << ','
        << (row.rvector ? "yes" : "no");
    for (auto signal : cfg.table1.signals) {
      ModelSpec spec = row;
      spec.signal = signal;
      spec.oor = false;
      const SetId set = ws.eval_set(spec);
      const auto noise = NoiseCondition::clean();
      const auto recs = ws.capped(spec, ws.records(set, noise, true));
      progress("table1 " + spec.name());
      const auto est = ws.predict(spec, set, noise, recs);
      const auto& feats = ws.features(set, noise);
      std::vector<dist::Outcome> outcomes;
      for (std::size_t k = 0; k < est.size(); ++k) outcomes.push_back(pair_outcome(est[k], feats[recs[k / 3]].distance));
      const auto summary = mae_value(try_mae(outcomes));
      json labels = model_labels(spec);
      labels["arch"] = row.arch == dist::Arch::Mlp ? "mlp" : "crnn";
      labels["diffuseness"] = row.diffuseness;
      labels["rvector"] = row.rvector;
      records.push_back(make_record(ws, "table1", "mae", labels, optional_json(summary)));
      csv << ',' << csv_number(summary);
    }
    csv << '\n';
  }
  save(ws, "table1", records);
  return records;
}

std::vector<MetricsRecord> run_table4(Workspace& ws) {
  const auto& cfg = ws.config();
  ModelSpec spec = cfg.table4.model;
  spec.oor = true;
  const SetId set = ws.eval_set(spec);
  std::vector<MetricsRecord> records;
  std::ofstream csv = open_csv(ws.metrics_dir() / "table4.csv");
  csv << "model,signal_kind,snr,fusion,mae,f1,discards\n";
  for (double snr : cfg.table4.snr_db) {
    const auto noise = NoiseCondition::fixed(snr);
    const auto recs = ws.capped(spec, ws.records(set, noise, false));
    progress("table4 " + spec.name() + " at " + std::to_string(snr) + " dB");
    const auto est = ws.predict(spec, set, noise, recs);
    const auto& feats = ws.features(set, noise);

    std::vector<dist::Outcome> pair_outcomes, node_outcomes;
    std::vector<bool> pair_pred, pair_truth, node_pred, node_truth;
    for (std::size_t k = 0; k < est.size(); ++k) {
      const auto& f = feats[recs[k / 3]];
      pair_outcomes.push_back(pair_outcome(est[k], f.distance));
      pair_pred.push_back(est[k].oor());
      pair_truth.push_back(f.oor);
    }
    const auto fused = fuse_triples(est, kGrid);
    long discards = 0;
    for (std::size_t r = 0; r < fused.size(); ++r) {
      const auto& f = feats[recs[r]];
      dist::Outcome o;
      o.kind = fused[r].kind;
      o.truth = f.distance;
      if (fused[r].distance) o.estimate = *fused[r].distance;
      node_outcomes.push_back(o);
      if (fused[r].kind == dist::FusedEstimate::Kind::Discard) {
        ++discards;
        continue;
      }
      node_pred.push_back(fused[r].kind == dist::FusedEstimate::Kind::OoR);
      node_truth.push_back(f.oor);
    }
    for (bool fusion : {false, true}) {
      const auto summary = mae_value(try_mae(fusion ? node_outcomes : pair_outcomes));
      const auto f1 = fusion ? f1_or_empty(node_pred, node_truth) : f1_or_empty(pair_pred, pair_truth);
      json labels = model_labels(spec);
      labels["snr_db"] = snr;
      labels["fusion"] = fusion;
      records.push_back(make_record(ws, "table4", "mae", labels, optional_json(summary)));
      records.push_back(make_record(ws, "table4", "f1", labels, optional_json(f1)));
      records.push_back(make_record(ws, "table4", "discards", labels, fusion ? discards : 0));
      csv << spec.name() << ',' << scene::to_string(spec.signal) << ',' << snr << ',' << (fusion ? "yes" : "no") << ','
          << csv_number(summary) << ',' << csv_number(f1) << ',' << (fusion ? discards : 0) << '\n';
    }
  }
  save(ws, "table4", records);
  return records;
}

std::vector<MetricsRecord> run_error_cdf(Workspace& ws) {
  const auto& cfg = ws.config();
  const ModelSpec spec = cfg.error_cdf.model;
  const auto noise = NoiseCondition::clean();
  const SetId eval = ws.eval_set(spec);
  const auto recs = ws.capped(spec, ws.records(eval, noise, true));
  progress("error-cdf " + spec.name());
  const auto est = ws.predict(spec, eval, noise, recs);
  const auto& eval_feats = ws.features(eval, noise);

  std::vector<double> model_errors;
  for (std::size_t k = 0; k < est.size(); ++k) model_errors.push_back(pair_error(est[k], eval_feats[recs[k / 3]].distance));

  // GP on the averaged diffuseness of one room.
  const SetId room{SetKind::GpRoom, spec.signal};
  const auto& room_feats = ws.features(room, noise);
  const auto n_train = static_cast<std::size_t>(cfg.counts.gp_pairs);
  if (n_train == 0 || room_feats.size() <= n_train) throw ConfigError("error-cdf: gp_pairs and gp_matched_pairs must be positive");
  auto zeta_and_distance = [](const FeatureSet& f, const std::vector<std::size_t>& idx) {
    Eigen::VectorXd x(3 * static_cast<Index>(idx.size())), y(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int p = 0; p < 3; ++p) {
        x[3 * static_cast<Index>(i) + p] = f[idx[i]].zeta[static_cast<std::size_t>(p)];
        y[3 * static_cast<Index>(i) + p] = f[idx[i]].distance;
      }
    return std::pair{x, y};
  };
  std::vector<std::size_t> train_idx, matched_idx;
  for (std::size_t i = 0; i < room_feats.size(); ++i) (i < n_train ? train_idx : matched_idx).push_back(i);
  const auto [gx, gy] = zeta_and_distance(room_feats, train_idx);
  progress("error-cdf: fitting the GP on " + std::to_string(gx.size()) + " pairs");
  const dist::GpModel gp = dist::gp_fit(gx, gy);
  auto gp_errors = [&](const FeatureSet& f, const std::vector<std::size_t>& idx) {
    const auto [x, y] = zeta_and_distance(f, idx);
    const Eigen::VectorXd pred = gp.predict(x);
    std::vector<double> e(static_cast<std::size_t>(x.size()));
    for (Index i = 0; i < x.size(); ++i) e[static_cast<std::size_t>(i)] = std::abs(pred[i] - y[i]);
    return e;
  };
  const auto matched_errors = gp_errors(room_feats, matched_idx);
  const auto cross_errors = gp_errors(eval_feats, recs);

  const Eigen::VectorXd thr = cdf_thresholds(cfg.error_cdf.max_error, cfg.error_cdf.step);
  const std::vector<std::pair<std::string, const std::vector<double>*>> methods{
      {spec.name(), &model_errors}, {"gp-matched", &matched_errors}, {"gp-cross", &cross_errors}};
  std::vector<MetricsRecord> records;
  std::vector<Eigen::VectorXd> curves;
  for (const auto& [name, errors] : methods) {
    const Eigen::VectorXd cdf = dist::error_cdf(*errors, thr);
    curves.push_back(cdf);
    json points = json::array();
    for (Index i = 0; i < thr.size(); ++i) points.push_back({thr[i], cdf[i]});
    double mean = 0.0;
    for (double e : *errors) mean += e;
    mean /= static_cast<double>(errors->size());
    const json labels{{"method", name}, {"signal", scene::to_string(spec.signal)}};
    records.push_back(make_record(ws, "error-cdf", "error-cdf", labels, points));
    records.push_back(make_record(ws, "error-cdf", "mae", labels, mean));
  }
  std::ofstream csv = open_csv(ws.metrics_dir() / "error_cdf.csv");
  csv << "error_m";
  for (const auto& m : methods) csv << ',' << m.first;
  csv << '\n';
  for (Index i = 0; i < thr.size(); ++i) {
    csv << thr[i];
    for (const auto& c : curves) csv << ',' << c[i];
    csv << '\n';
  }
  save(ws, "error_cdf", records);
  return records;
}

std::vector<MetricsRecord> run_table5(Workspace& ws) {
  const auto& cfg = ws.config();
  const ModelSpec spec = cfg.table5.model;
  const bool need_model = std::find(cfg.table5.distances.begin(), cfg.table5.distances.end(), DistanceSource::Model) !=
                          cfg.table5.distances.end();
  std::vector<MetricsRecord> records;
  std::map<std::pair<int, double>, std::optional<double>> grid;
  const fs::path report_dir = ws.metrics_dir() / "table5";
  fs::create_directories(report_dir);

  for (double t60 : cfg.table5.t60) {
    const SetId set{SetKind::Calibration, scene::SignalKind::SpeechSurrogate, t60};
    const auto& specs = ws.scenes(set);
    std::vector<calib::Geometry> truths;
    for (const auto& s : specs) truths.push_back(calib::geometry_from_scene(s));

    // Model distances first: their feature pass also stores SRP-PHAT observations.
    std::vector<Eigen::MatrixXd> model_distances;
    if (need_model) {
      const auto noise = NoiseCondition::clean();
      const auto& feats = ws.features(set, noise);
      const auto est = ws.predict(spec, set, noise, ws.records(set, noise, false));
      std::size_t offset = 0;
      for (std::size_t s = 0; s < specs.size(); ++s) {
        const auto k = static_cast<Index>(specs[s].nodes.size()), n = static_cast<Index>(specs[s].sources.size());
        const std::vector<dist::DistanceEstimate> part(est.begin() + static_cast<std::ptrdiff_t>(offset),
                                                       est.begin() + static_cast<std::ptrdiff_t>(offset + 3 * k * n));
        model_distances.push_back(fused_distance_matrix(part, k, n, kGrid));
        offset += static_cast<std::size_t>(3 * k * n);
      }
      if (offset != 3 * feats.size()) throw DomainError("table5: estimate count mismatch");
    }

    std::vector<calib::DoAObservationSet> obs;
    json labels_t{{"t60", t60}, {"doa", to_string(cfg.table5.doa)}};
    if (cfg.table5.doa == DoaSource::Estimated) {
      obs = ws.observations(set);
    } else {
      const SetId probe{SetKind::DoaProbe, scene::SignalKind::SpeechSurrogate, t60};
      const auto& probe_obs = ws.observations(probe);
      const auto& probe_scenes = ws.scenes(probe);
      std::vector<double> errors;
      for (std::size_t s = 0; s < probe_obs.size(); ++s) {
        const auto e = calib::doa_errors(probe_obs[s], calib::geometry_from_scene(probe_scenes[s]));
        errors.insert(errors.end(), e.begin(), e.end());
      }
      const DoaErrorModel model = fit_doa_error_model(errors, cfg.table5.outlier_deg);
      records.push_back(make_record(ws, "table5", "doa-noise-std-deg", labels_t, model.noise_std_deg));
      records.push_back(make_record(ws, "table5", "doa-outlier-fraction", labels_t, model.outlier_fraction));
      for (std::size_t s = 0; s < specs.size(); ++s) {
        Rng rng = make_rng(cfg.seed, "synthetic-doa/" + set.name(), s);
        obs.push_back(calib::synth_doa_observations(truths[s], model.synth(), rng));
      }
    }

    for (auto source : cfg.table5.distances) {
      std::vector<ScenarioOutcome> outcomes(specs.size());
      progress("table5 " + set.name() + " " + to_string(source));
      parallel_for(specs.size(), [&](std::size_t s) {
        const Eigen::MatrixXd d = source == DistanceSource::GroundTruth ? truths[s].distances() : model_distances[s];
        calib::RansacConfig rc;
        rc.seed = derive_seed(cfg.seed, "ransac/" + set.name(), s);
        outcomes[s] = calibrate_scenario(obs[s], d, truths[s], rc);
      });
      std::vector<calib::Points> est, truth;
      long failures = 0;
      for (std::size_t s = 0; s < outcomes.size(); ++s) {
        auto report = calib::to_json(outcomes[s].report);
        if (!outcomes[s].failure.empty()) report["failure"] = outcomes[s].failure;
        write_json_file(report_dir / (set.name() + "-" + to_string(source) + "-s" + std::to_string(s) + ".json"), report);
        if (!outcomes[s].mpe) {
          ++failures;
          continue;
        }
        est.push_back(outcomes[s].report.aligned->nodes);
        truth.push_back(truths[s].nodes);
      }
      json labels = labels_t;
      labels["distances"] = to_string(source);
      std::optional<double> value;
      if (!est.empty()) value = calib::mpe(est, truth);
      grid[{static_cast<int>(source), t60}] = value;
      records.push_back(make_record(ws, "table5", "mpe", labels, optional_json(value)));
      records.push_back(make_record(ws, "table5", "failures", labels, failures));
    }
  }

  std::ofstream csv = open_csv(ws.metrics_dir() / "table5.csv");
  csv << "distances";
  for (double t : cfg.table5.t60) csv << ",mpe_t60_" << t;
  csv << '\n';
  for (auto source : cfg.table5.distances) {
    csv << to_string(source);
    for (double t : cfg.table5.t60) csv << ',' << csv_number(grid[{static_cast<int>(source), t}]);
    csv << '\n';
  }
  save(ws, "table5", records);
  return records;
}

Plan make_plan(const ExperimentConfig& cfg) {
  Plan p;
  auto add_set = [&](const SetId& s) {
    for (const auto& e : p.scene_sets)
      if (e.name() == s.name()) return;
    p.scene_sets.push_back(s);
  };
  auto add_features = [&](const SetId& s, const NoiseCondition& n) {
    add_set(s);
    for (const auto& [es, en] : p.feature_sets)
      if (es.name() == s.name() && en.name() == n.name()) return;
    p.feature_sets.emplace_back(s, n);
  };
  auto add_model = [&](const ModelSpec& m) {
    if (m.rvector) add_features({SetKind::RvectorTrain, m.signal}, NoiseCondition::clean());
    add_features({SetKind::DistanceTrain, m.signal}, m.oor ? NoiseCondition::training() : NoiseCondition::clean());
    for (const auto& e : p.models)
      if (e.name() == m.name()) return;
    p.models.push_back(m);
  };
  if (cfg.runs("table1"))
    for (const auto& row : cfg.table1.rows)
      for (auto signal : cfg.table1.signals) {
        ModelSpec m = row;
        m.signal = signal;
        m.oor = false;
        add_model(m);
        add_features({SetKind::DistanceEval, signal}, NoiseCondition::clean());
      }
  if (cfg.runs("table4")) {
    ModelSpec m = cfg.table4.model;
    m.oor = true;
    add_model(m);
    for (double snr : cfg.table4.snr_db) add_features({SetKind::DistanceEval, m.signal}, NoiseCondition::fixed(snr));
  }
  if (cfg.runs("error-cdf")) {
    add_model(cfg.error_cdf.model);
    add_features({SetKind::DistanceEval, cfg.error_cdf.model.signal}, NoiseCondition::clean());
    add_features({SetKind::GpRoom, cfg.error_cdf.model.signal}, NoiseCondition::clean());
  }
  if (cfg.runs("table5")) {
    const bool need_model = std::find(cfg.table5.distances.begin(), cfg.table5.distances.end(),
                                      DistanceSource::Model) != cfg.table5.distances.end();
    if (need_model) add_model(cfg.table5.model);
    for (double t60 : cfg.table5.t60) {
      const SetId calib_set{SetKind::Calibration, scene::SignalKind::SpeechSurrogate, t60};
      add_set(calib_set);
      if (need_model) add_features(calib_set, NoiseCondition::clean());
      if (cfg.table5.doa == DoaSource::Estimated) {
        p.observation_sets.push_back(calib_set);
      } else {
        const SetId probe{SetKind::DoaProbe, scene::SignalKind::SpeechSurrogate, t60};
        add_set(probe);
        p.observation_sets.push_back(probe);
      }
    }
  }
  return p;
}

std::vector<MetricsRecord> run_stage(Workspace& ws, Stage stage) {
  const auto& cfg = ws.config();
  std::vector<MetricsRecord> out;
  auto append = [&](std::vector<MetricsRecord> r) { out.insert(out.end(), r.begin(), r.end()); };
  if (stage == Stage::EvalDistance) {
    if (cfg.runs("table1")) append(run_table1(ws));
    if (cfg.runs("table4")) append(run_table4(ws));
    if (cfg.runs("error-cdf")) append(run_error_cdf(ws));
  } else if (stage == Stage::EvalCalibration) {
    if (cfg.runs("table5")) append(run_table5(ws));
  } else {
    throw ConfigError("run_stage: " + to_string(stage) + " is not an evaluation stage");
  }
  return out;
}

}  // namespace wasncal::harness
