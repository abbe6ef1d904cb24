#include "wasncal/harness/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "wasncal/calib/doa.hpp"
#include "wasncal/dsp/features_io.hpp"
#include "wasncal/errors.hpp"
#include "wasncal/harness/log.hpp"
#include "wasncal/harness/parallel.hpp"
#include "wasncal/harness/records.hpp"
#include "wasncal/nn/checkpoint.hpp"
#include "wasncal/scene/io.hpp"
#include "wasncal/scene/render.hpp"
#include "wasncal/scene/sampling.hpp"

namespace wasncal::harness {

namespace fs = std::filesystem;
using Eigen::Index;

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

std::string record_stem(std::size_t r) { return "r" + std::to_string(r); }

// Rounds through float32 so stored and recomputed features agree bit for bit.
Eigen::VectorXd through_float(const Eigen::VectorXd& v) { return v.cast<float>().cast<double>(); }

std::pair<Index, Index> event_span(const scene::SceneSpec& s, std::size_t node, std::size_t source, Index length) {
  const auto& e = s.sources[source];
  Index begin = static_cast<Index>(std::llround(e.start * s.sample_rate));
  if (!s.node_offsets.empty()) begin += s.node_offsets[node];
  const Index len = static_cast<Index>(std::llround(e.duration * s.sample_rate));
  begin = std::clamp<Index>(begin, 0, length);
  return {begin, std::min(begin + len, length)};
}

json observations_to_json(const calib::DoAObservationSet& obs) {
  json rows = json::array();
  for (Index j = 0; j < obs.azimuths.rows(); ++j) {
    json row = json::array();
    for (Index i = 0; i < obs.azimuths.cols(); ++i) row.push_back(obs.valid(j, i) ? json(obs.azimuths(j, i)) : json(nullptr));
    rows.push_back(row);
  }
  return rows;
}

calib::DoAObservationSet observations_from_json(const json& rows) {
  calib::DoAObservationSet obs;
  const auto k = static_cast<Index>(rows.size());
  const auto n = k ? static_cast<Index>(rows[0].size()) : 0;
  obs.azimuths = Eigen::MatrixXd::Zero(k, n);
  obs.valid = calib::Mask::Constant(k, n, false);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < n; ++i) {
      const json& v = rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      if (v.is_null()) continue;
      obs.azimuths(j, i) = v.get<double>();
      obs.valid(j, i) = true;
    }
  return obs;
}

}  // namespace

std::string SetId::name() const {
  switch (kind) {
    case SetKind::DistanceTrain:
      return "dist-train-" + scene::to_string(signal);
    case SetKind::DistanceEval:
      return "dist-eval-" + scene::to_string(signal);
    case SetKind::RvectorTrain:
      return "rvec-train-" + scene::to_string(signal);
    case SetKind::GpRoom:
      return "gp-room-" + scene::to_string(signal);
    case SetKind::Calibration:
      return "calib-t" + fixed2(t60);
    case SetKind::DoaProbe:
      return "doa-probe-t" + fixed2(t60);
  }
  return "unknown";
}

std::string NoiseCondition::name() const {
  switch (kind) {
    case Kind::Clean:
      return "clean";
    case Kind::Fixed:
      return "snr" + fixed2(snr_db);
    case Kind::Training:
      return "snr-train";
  }
  return "unknown";
}

PairFeatures featurize_segment(const scene::SignalBuffer& node, Index begin, Index end, const FeatureConfig& config,
                               double snr_db, Rng* noise_rng) {
  if (begin < 0 || end > node.length() || end <= begin) throw DomainError("featurize: segment outside the recording");
  if (node.channels() != scene::ArrayNode::kNumMics) throw DomainError("featurize: six-channel node recording expected");
  scene::SignalBuffer seg{node.samples.middleCols(begin, end - begin), node.sample_rate};
  PairFeatures out;
  if (std::isfinite(snr_db)) {
    if (noise_rng == nullptr) throw DomainError("featurize: sensor noise needs a random stream");
    seg = scene::add_awgn(seg, snr_db, *noise_rng);
    out.snr_db = snr_db;
  }
  const auto pairs = scene::ArrayNode::opposite_pairs();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto map = dsp::pair_diffuseness(seg.channel(pairs[p].first), seg.channel(pairs[p].second), config.diffuseness);
    out.maps[p] = map.values.cast<float>();
    const Eigen::MatrixXd rounded = out.maps[p].cast<double>();
    out.averages[p] = through_float(rounded.rowwise().mean());
    out.zeta[p] = rounded.mean();
  }
  out.mfcc = dsp::mfcc(seg.channel(0), config.mfcc).cast<float>();
  return out;
}

int primary_count(const ExperimentConfig& config, const SetId& set) {
  switch (set.kind) {
    case SetKind::DistanceTrain:
      return config.counts.train_pairs;
    case SetKind::DistanceEval:
      return config.counts.eval_pairs;
    case SetKind::GpRoom:
      return config.counts.gp_pairs;
    case SetKind::RvectorTrain:
      return config.counts.rvector_rooms * config.counts.rvector_pairs_per_room;
    case SetKind::Calibration:
      return config.counts.calib_scenes;
    case SetKind::DoaProbe:
      return config.counts.doa_scenes;
  }
  return 0;
}

std::vector<scene::SceneSpec> sample_set(const ExperimentConfig& config, const SetId& set) {
  const std::string stream = "scene/" + set.name();
  const auto signal = config.resolve(set.signal);
  std::vector<scene::SceneSpec> out;
  auto finish = [&](scene::SceneSpec s, std::size_t i) {
    s.rng_seed = derive_seed(config.seed, "signal/" + set.name(), i);
    out.push_back(std::move(s));
  };

  if (set.per_event()) {
    scene::CalibrationSceneConfig cc;
    cc.t60 = {set.t60, set.t60};
    cc.signal_kind = config.resolve(scene::SignalKind::SpeechSurrogate);
    if (set.kind == SetKind::DoaProbe) cc.num_sources = config.counts.doa_sources;
    const int n = primary_count(config, set);
    for (int i = 0; i < n; ++i) {
      Rng rng = make_rng(config.seed, stream, static_cast<std::uint64_t>(i));
      finish(scene::sample_calibration_scene(rng, cc), static_cast<std::size_t>(i));
    }
    return out;
  }

  scene::DistanceSceneConfig dc = set.kind == SetKind::RvectorTrain ? scene::DistanceSceneConfig::rvector()
                                                                    : scene::DistanceSceneConfig::distance_estimator();
  dc.signal_kind = signal;
  int total = primary_count(config, set);
  int primary = total;
  if (set.kind == SetKind::DistanceTrain) total += config.counts.oor_train;
  if (set.kind == SetKind::DistanceEval) total += config.counts.oor_eval;
  if (set.kind == SetKind::GpRoom) {
    total += config.counts.gp_matched_pairs;
    primary = total;  // every GP scene is in range
    dc.room_x = {config.error_cdf.gp_room_x, config.error_cdf.gp_room_x};
    dc.room_y = {config.error_cdf.gp_room_y, config.error_cdf.gp_room_y};
    dc.t60 = {config.error_cdf.gp_t60, config.error_cdf.gp_t60};
  }
  const auto base = dc;
  for (int i = 0; i < total; ++i) {
    auto c = base;
    if (set.kind == SetKind::RvectorTrain) {
      // One room class per consecutive block of scenes.
      const int room = i / std::max(1, config.counts.rvector_pairs_per_room);
      Rng room_rng = make_rng(config.seed, "room/" + set.name(), static_cast<std::uint64_t>(room));
      const double x = base.room_x.sample(room_rng), y = base.room_y.sample(room_rng), t = base.t60.sample(room_rng);
      c.room_x = {x, x};
      c.room_y = {y, y};
      c.t60 = {t, t};
    }
    c.oor_ratio = i >= primary ? 1.0 : 0.0;
    Rng rng = make_rng(config.seed, stream, static_cast<std::uint64_t>(i));
    finish(scene::sample_distance_scene(rng, c), static_cast<std::size_t>(i));
  }
  return out;
}

dist::Dataset make_distance_dataset(const ModelSpec& spec, const FeatureSet& records, const nn::RowMatrix* rvectors,
                                    const dist::DistanceClassGrid& grid) {
  if (records.empty()) throw DomainError("distance dataset: no records");
  if (spec.rvector && (rvectors == nullptr || rvectors->rows() != static_cast<Index>(records.size())))
    throw DomainError("distance dataset: one R-vector per record required");
  const Index n = 3 * static_cast<Index>(records.size());
  dist::Dataset d;
  const Index r_width = spec.rvector ? rvectors->cols() : 0;
  if (spec.arch == dist::Arch::Crnn) {
    const auto& m = records.front().maps[0];
    if (m.size() == 0) throw DomainError("distance dataset: CRNN input needs loaded diffuseness maps");
    d.feature_shape = {1, m.rows(), m.cols()};
  } else {
    d.feature_shape = {spec.diffuseness ? records.front().averages[0].size() : r_width};
  }
  const Index width = nn::numel(d.feature_shape);
  d.features.resize(n, width);
  const bool aux = spec.rvector && spec.diffuseness;
  d.aux.resize(aux ? n : 0, aux ? r_width : 0);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    for (int p = 0; p < 3; ++p) {
      const Index row = 3 * static_cast<Index>(r) + p;
      if (spec.arch == dist::Arch::Crnn) {
        const auto& m = rec.maps[static_cast<std::size_t>(p)];
        if (m.rows() * m.cols() != width) throw ShapeError("distance dataset: diffuseness maps differ in size");
        for (Index f = 0; f < m.rows(); ++f)
          for (Index t = 0; t < m.cols(); ++t) d.features(row, f * m.cols() + t) = m(f, t);
      } else if (spec.diffuseness) {
        d.features.row(row) = rec.averages[static_cast<std::size_t>(p)].transpose();
      } else {
        d.features.row(row) = rvectors->row(static_cast<Index>(r));
      }
      if (aux) d.aux.row(row) = rvectors->row(static_cast<Index>(r));
      d.labels.push_back(grid.quantize(rec.distance));
      d.distances.push_back(rec.distance);
      d.groups.push_back(rec.scene);
    }
  }
  d.check();
  return d;
}

nn::RowMatrix embed_rvectors(nn::Network& extractor, const FeatureSet& records, Index batch_size) {
  nn::RowMatrix out;
  for (std::size_t begin = 0; begin < records.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(records.size(), begin + static_cast<std::size_t>(batch_size));
    const auto& first = records[begin].mfcc;
    if (first.size() == 0) throw DomainError("R-vectors need loaded MFCCs");
    nn::Tensor x({static_cast<Index>(end - begin), first.rows(), first.cols()});
    Index k = 0;
    for (std::size_t r = begin; r < end; ++r) {
      const auto& m = records[r].mfcc;
      if (m.rows() != first.rows() || m.cols() != first.cols()) throw ShapeError("R-vectors: MFCC sizes differ");
      for (Index c = 0; c < m.rows(); ++c)
        for (Index t = 0; t < m.cols(); ++t) x.data[k++] = m(c, t);
    }
    const nn::Tensor e = extractor.embed(x);
    const Index width = e.size() / static_cast<Index>(end - begin);
    if (out.size() == 0) out.resize(static_cast<Index>(records.size()), width);
    for (std::size_t r = begin; r < end; ++r)
      out.row(static_cast<Index>(r)) = e.data.segment(static_cast<Index>(r - begin) * width, width).transpose();
  }
  return out;
}

std::vector<dist::FusedEstimate> fuse_triples(const std::vector<dist::DistanceEstimate>& estimates,
                                              const dist::DistanceClassGrid& grid) {
  if (estimates.size() % 3 != 0) throw DomainError("fusion: estimates come in triples");
  std::vector<dist::FusedEstimate> out;
  for (std::size_t i = 0; i < estimates.size(); i += 3)
    out.push_back(dist::fuse_node_estimates({estimates[i], estimates[i + 1], estimates[i + 2]}, grid));
  return out;
}

// ---------------------------------------------------------------------------

Workspace::Workspace(ExperimentConfig config) : config_(std::move(config)), root_(config_.out_dir) {
  fs::create_directories(root_);
  fs::create_directories(metrics_dir());
  const fs::path copy = root_ / "config.json";
  if (fs::exists(copy)) {
    const json existing = read_json_file(copy);
    if (document_hash(existing) != config_.hash())
      throw ConfigError("run directory " + root_.string() + " belongs to a different config; use another --out");
  } else {
    write_json_file(copy, config_.document);
  }
  provider_ = std::make_unique<scene::DefaultSignalProvider>(config_.speech_dir);
}

const std::vector<scene::SceneSpec>& Workspace::scenes(const SetId& set) {
  const auto key = set.name();
  if (auto it = scenes_.find(key); it != scenes_.end()) return it->second;
  const fs::path path = root_ / "scenes" / (key + ".json");
  std::vector<scene::SceneSpec> out;
  if (fs::exists(path)) {
    const json doc = read_json_file(path);
    for (const auto& s : doc.at("scenes")) out.push_back(scene::scene_from_json(s));
  } else {
    progress("simulate " + key);
    out = sample_set(config_, set);
    json doc{{"set", key}, {"seed", config_.seed}, {"scenes", json::array()}};
    for (const auto& s : out) doc["scenes"].push_back(scene::to_json(s));
    fs::create_directories(path.parent_path());
    write_json_file(path, doc);
  }
  return scenes_[key] = std::move(out);
}

fs::path Workspace::feature_dir(const SetId& set, const NoiseCondition& noise) const {
  return root_ / "features" / set.name() / noise.name();
}

void Workspace::featurize(const SetId& set, const NoiseCondition& noise) {
  const auto& specs = scenes(set);
  const fs::path dir = feature_dir(set, noise);
  fs::create_directories(dir);
  const std::string key = set.name() + "/" + noise.name();
  progress("featurize " + key);
  const bool want_obs = set.per_event() && noise.kind == NoiseCondition::Kind::Clean &&
                        !fs::exists(root_ / "observations" / (set.name() + ".json"));

  // Record layout: one per scene, or per (scene, source, node) for per-event sets.
  std::vector<std::size_t> first(specs.size() + 1, 0);
  for (std::size_t s = 0; s < specs.size(); ++s)
    first[s + 1] = first[s] + (set.per_event() ? specs[s].nodes.size() * specs[s].sources.size() : 1);
  FeatureSet out(first.back());
  std::vector<calib::DoAObservationSet> obs(want_obs ? specs.size() : 0);
  const calib::SrpPhatDoa doa;

  parallel_for(specs.size(), [&](std::size_t s) {
    const auto& spec = specs[s];
    const auto signals = scene::render_node_signals(spec, *provider_);
    if (want_obs) obs[s] = calib::estimate_observations(spec, signals, doa);
    const std::size_t nodes = set.per_event() ? spec.nodes.size() : 1;
    const std::size_t sources = set.per_event() ? spec.sources.size() : 1;
    for (std::size_t i = 0; i < sources; ++i)
      for (std::size_t j = 0; j < nodes; ++j) {
        const std::size_t r = first[s] + i * nodes + j;
        const std::uint64_t stream_index = r;
        double snr = std::numeric_limits<double>::infinity();
        if (noise.kind == NoiseCondition::Kind::Fixed) snr = noise.snr_db;
        if (noise.kind == NoiseCondition::Kind::Training) {
          Rng snr_rng = make_rng(config_.seed, "snr/" + set.name(), stream_index);
          snr = scene::draw_training_snr_db(snr_rng);
        }
        Rng noise_rng = make_rng(config_.seed, "noise/" + key, stream_index);
        const auto [begin, end] = event_span(spec, j, i, signals[j].length());
        PairFeatures f = featurize_segment(signals[j], begin, end, features_config_, snr, &noise_rng);
        f.scene = static_cast<long>(s);
        f.node = static_cast<int>(j);
        f.source = static_cast<int>(i);
        f.distance = (spec.sources[i].position - spec.nodes[j].center).norm();
        f.oor = f.distance > dist::DistanceClassGrid{}.r_max;
        f.t60 = spec.room.t60;
        if (set.kind == SetKind::RvectorTrain)
          f.label = static_cast<int>(s) / std::max(1, config_.counts.rvector_pairs_per_room);
        const json meta{{"set", set.name()}, {"noise", noise.name()}, {"scene", s}, {"node", j}, {"source", i}};
        for (int p = 0; p < 3; ++p) {
          dsp::DiffusenessMap m;
          m.values = f.maps[static_cast<std::size_t>(p)].cast<double>();
          m.band = features_config_.diffuseness.band();
          m.zeta = f.zeta[static_cast<std::size_t>(p)];
          json pm = meta;
          pm["pair"] = p;
          dsp::write_diffuseness(dir / (record_stem(r) + "_p" + std::to_string(p) + ".f32"), m,
                                 features_config_.diffuseness, pm);
        }
        dsp::write_mfcc(dir / (record_stem(r) + "_mfcc.f32"), f.mfcc.cast<double>(), meta);
        for (auto& m : f.maps) m.resize(0, 0);
        f.mfcc.resize(0, 0);
        out[r] = std::move(f);
      }
  });

  if (want_obs) {
    json doc = json::array();
    for (const auto& o : obs) doc.push_back(observations_to_json(o));
    fs::create_directories(root_ / "observations");
    write_json_file(root_ / "observations" / (set.name() + ".json"), doc);
    observations_[set.name()] = std::move(obs);
  }

  // Per-bin averages as one tensor; the manifest is written last and marks completion.
  const Index bins = out.empty() ? 0 : out[0].averages[0].size();
  RawTensor avg;
  avg.shape = {static_cast<std::int64_t>(out.size()), 3, bins};
  avg.values.reserve(out.size() * 3 * static_cast<std::size_t>(bins));
  for (const auto& f : out)
    for (const auto& a : f.averages)
      for (Index k = 0; k < a.size(); ++k) avg.values.push_back(static_cast<float>(a[k]));
  write_raw_f32(dir / "averages.f32", avg);
  std::ofstream manifest(dir / "manifest.jsonl.tmp");
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto& f = out[r];
    const auto& room = specs[static_cast<std::size_t>(f.scene)].room;
    const std::string stem = record_stem(r);
    json line{{"record", r},
              {"scene", f.scene},
              {"node", f.node},
              {"source", f.source},
              {"distance", f.distance},
              {"oor", f.oor},
              {"t60", f.t60},
              {"room", {room.length_x, room.length_y, room.height}},
              {"snr_db", number_or_null(f.snr_db)},
              {"label", f.label},
              {"zeta", f.zeta},
              {"files", {stem + "_p0.f32", stem + "_p1.f32", stem + "_p2.f32"}},
              {"mfcc", stem + "_mfcc.f32"}};
    manifest << line.dump() << '\n';
  }
  manifest.close();
  fs::rename(dir / "manifest.jsonl.tmp", dir / "manifest.jsonl");
  features_[key] = std::move(out);
}

const FeatureSet& Workspace::features(const SetId& set, const NoiseCondition& noise) {
  const std::string key = set.name() + "/" + noise.name();
  if (auto it = features_.find(key); it != features_.end()) return it->second;
  const fs::path dir = feature_dir(set, noise);
  if (!fs::exists(dir / "manifest.jsonl")) {
    featurize(set, noise);
    return features_.at(key);
  }
  FeatureSet out;
  std::ifstream in(dir / "manifest.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    PairFeatures f;
    f.scene = j.at("scene").get<long>();
    f.node = j.at("node").get<int>();
    f.source = j.at("source").get<int>();
    f.distance = j.at("distance").get<double>();
    f.oor = j.at("oor").get<bool>();
    f.t60 = j.at("t60").get<double>();
    f.snr_db = number_or_inf(j.at("snr_db"));
    f.label = j.at("label").get<int>();
    f.zeta = j.at("zeta").get<std::array<double, 3>>();
    out.push_back(std::move(f));
  }
  const RawTensor avg = read_raw_f32(dir / "averages.f32");
  if (avg.shape.size() != 3 || avg.shape[0] != static_cast<std::int64_t>(out.size()) || avg.shape[1] != 3)
    throw ConfigError("feature averages do not match the manifest in " + dir.string());
  const auto bins = static_cast<Index>(avg.shape[2]);
  std::size_t k = 0;
  for (auto& f : out)
    for (auto& a : f.averages) {
      a.resize(bins);
      for (Index b = 0; b < bins; ++b) a[b] = avg.values[k++];
    }
  return features_[key] = std::move(out);
}

FeatureSet Workspace::load_full(const SetId& set, const NoiseCondition& noise, const std::vector<std::size_t>& records,
                                bool maps, bool mfcc) {
  const FeatureSet& all = features(set, noise);
  const fs::path dir = feature_dir(set, noise);
  FeatureSet out(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const std::size_t r = records.at(i);
    if (r >= all.size()) throw DomainError("load_full: record index out of range");
    PairFeatures f = all[r];
    const std::string stem = record_stem(r);
    if (maps)
      for (int p = 0; p < 3; ++p)
        f.maps[static_cast<std::size_t>(p)] =
            dsp::read_diffuseness(dir / (stem + "_p" + std::to_string(p) + ".f32")).values.cast<float>();
    if (mfcc) f.mfcc = dsp::read_mfcc(dir / (stem + "_mfcc.f32")).cast<float>();
    out[i] = std::move(f);
  });
  return out;
}

const std::vector<calib::DoAObservationSet>& Workspace::observations(const SetId& set) {
  if (!set.per_event()) throw DomainError("observations exist for calibration and probe sets only");
  const auto key = set.name();
  if (auto it = observations_.find(key); it != observations_.end()) return it->second;
  const fs::path path = root_ / "observations" / (key + ".json");
  if (fs::exists(path)) {
    std::vector<calib::DoAObservationSet> out;
    for (const auto& o : read_json_file(path)) out.push_back(observations_from_json(o));
    return observations_[key] = std::move(out);
  }
  // Render without features.
  progress("estimate DoAs " + key);
  const auto& specs = scenes(set);
  std::vector<calib::DoAObservationSet> out(specs.size());
  const calib::SrpPhatDoa doa;
  parallel_for(specs.size(), [&](std::size_t s) {
    out[s] = calib::estimate_observations(specs[s], scene::render_node_signals(specs[s], *provider_), doa);
  });
  json doc = json::array();
  for (const auto& o : out) doc.push_back(observations_to_json(o));
  fs::create_directories(path.parent_path());
  write_json_file(path, doc);
  return observations_[key] = std::move(out);
}

std::vector<std::size_t> Workspace::records(const SetId& set, const NoiseCondition& noise, bool primary_only) {
  std::size_t n = features(set, noise).size();
  if (primary_only && !set.per_event()) n = std::min<std::size_t>(n, static_cast<std::size_t>(primary_count(config_, set)));
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

std::vector<std::size_t> Workspace::capped(const ModelSpec& spec, std::vector<std::size_t> recs) const {
  const auto cap = static_cast<std::size_t>(config_.training.crnn_max_pairs);
  if (spec.arch != dist::Arch::Crnn || cap == 0 || recs.size() <= cap) return recs;
  // Evenly spaced, so out-of-range records at the end stay represented.
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < cap; ++k) out.push_back(recs[k * recs.size() / cap]);
  return out;
}

SetId Workspace::train_set(const ModelSpec& spec) const { return {SetKind::DistanceTrain, spec.signal}; }
SetId Workspace::eval_set(const ModelSpec& spec) const { return {SetKind::DistanceEval, spec.signal}; }
NoiseCondition Workspace::train_noise(const ModelSpec& spec) const {
  return spec.oor ? NoiseCondition::training() : NoiseCondition::clean();
}

bool Workspace::has_model(const ModelSpec& spec) const {
  return models_.count(spec.name()) || fs::exists(root_ / "models" / (spec.name() + ".ckpt"));
}

nn::Network& Workspace::model(const ModelSpec& spec) {
  const auto name = spec.name();
  if (auto it = models_.find(name); it != models_.end()) return *it->second;
  const fs::path path = root_ / "models" / (name + ".ckpt");
  if (!fs::exists(path)) {
    if (!config_.train_inline)
      throw ConfigError("missing checkpoint for cell " + spec.label() + " [" + name + "]: expected " + path.string() +
                        "; run the train stage or set train_inline");
    train_model(spec, path);
  }
  auto loaded = nn::load_checkpoint(path);
  return *(models_[name] = std::move(loaded.network));
}

nn::Network& Workspace::rvector_extractor(scene::SignalKind signal) {
  const std::string name = "rvector-" + scene::to_string(signal);
  if (auto it = models_.find(name); it != models_.end()) return *it->second;
  const fs::path path = root_ / "models" / (name + ".ckpt");
  if (!fs::exists(path)) {
    if (!config_.train_inline)
      throw ConfigError("missing R-vector extractor checkpoint " + path.string() +
                        "; run the train stage or set train_inline");
    train_rvector_extractor(signal, path);
  }
  auto loaded = nn::load_checkpoint(path);
  return *(models_[name] = std::move(loaded.network));
}

const nn::RowMatrix& Workspace::rvectors(const SetId& set, const NoiseCondition& noise,
                                         scene::SignalKind extractor_signal) {
  const std::string key = set.name() + "/" + noise.name() + "/" + scene::to_string(extractor_signal);
  if (auto it = rvectors_.find(key); it != rvectors_.end()) return it->second;
  nn::Network& extractor = rvector_extractor(extractor_signal);
  const auto all = records(set, noise, false);
  progress("R-vectors " + key);
  nn::RowMatrix out;
  const std::size_t chunk = 512;
  for (std::size_t b = 0; b < all.size(); b += chunk) {
    const std::vector<std::size_t> part(all.begin() + static_cast<std::ptrdiff_t>(b),
                                        all.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), b + chunk)));
    const nn::RowMatrix e = embed_rvectors(extractor, load_full(set, noise, part, false, true));
    if (out.size() == 0) out.resize(static_cast<Index>(all.size()), e.cols());
    out.middleRows(static_cast<Index>(b), e.rows()) = e;
  }
  return rvectors_[key] = std::move(out);
}

namespace {

nn::RowMatrix select_rows(const nn::RowMatrix& m, const std::vector<std::size_t>& rows) {
  nn::RowMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

json train_result_json(const dist::TrainResult& r) {
  return {{"train_loss", r.train_loss}, {"val_score", r.val_score}, {"best_epoch", r.best_epoch},
          {"best_score", r.best_score}};
}

}  // namespace

void Workspace::train_model(const ModelSpec& spec, const fs::path& path) {
  const std::string name = spec.name();
  const SetId set = train_set(spec);
  const NoiseCondition noise = train_noise(spec);
  const auto recs = capped(spec, records(set, noise, !spec.oor));
  const FeatureSet data = spec.arch == dist::Arch::Crnn ? load_full(set, noise, recs, true, false)
                                                        : [&] {
                                                            FeatureSet d;
                                                            for (auto r : recs) d.push_back(features(set, noise)[r]);
                                                            return d;
                                                          }();
  nn::RowMatrix rv;
  if (spec.rvector) rv = select_rows(rvectors(set, noise, spec.signal), recs);
  const dist::Dataset all = make_distance_dataset(spec, data, spec.rvector ? &rv : nullptr);
  Rng split_rng = make_rng(config_.seed, "split/" + name);
  auto [train, validation] = dist::split_by_group(all, config_.training.validation_fraction, split_rng);

  const std::uint64_t init_seed = derive_seed(config_.seed, "init/" + name);
  const Index r_width = spec.rvector ? rv.cols() : 0;
  const Index bins = data.front().averages[0].size();
  nn::Network net = [&] {
    if (spec.arch == dist::Arch::Crnn) {
      dist::CrnnOptions o;
      o.features = bins;
      o.frames = data.front().maps[0].cols();
      o.use_rvector = spec.rvector;
      o.rvector_width = r_width;
      o.width_scale = config_.training.crnn_width_scale;
      return dist::build_distance_model(o, init_seed);
    }
    dist::MlpOptions o;
    o.features = spec.diffuseness ? bins : r_width;
    o.use_rvector = spec.diffuseness && spec.rvector;
    o.rvector_width = r_width;
    return dist::build_distance_model(o, init_seed);
  }();

  dist::TrainConfig tc;
  tc.epochs = config_.training.epochs;
  tc.batch_size = config_.training.batch_size;
  tc.adam.lr = config_.training.learning_rate;
  tc.seed = derive_seed(config_.seed, "train/" + name);
  tc.on_epoch = [&](int epoch, double loss, double val) {
    progress("train " + name + " epoch " + std::to_string(epoch) + " loss " + std::to_string(loss) + " val " +
             std::to_string(val));
  };
  progress("train " + name + " on " + std::to_string(train.size()) + " examples");
  const dist::TrainResult result =
      dist::train_distance_model(net, train, validation.size() ? &validation : nullptr, tc);
  fs::create_directories(path.parent_path());
  nn::save_checkpoint(path, net,
                      {{"model", to_json(spec)},
                       {"config_hash", config_.hash()},
                       {"train_examples", train.size()},
                       {"validation_examples", validation.size()},
                       {"result", train_result_json(result)}});
}

void Workspace::train_rvector_extractor(scene::SignalKind signal, const fs::path& path) {
  const SetId set{SetKind::RvectorTrain, signal};
  const NoiseCondition noise = NoiseCondition::clean();
  const FeatureSet data = load_full(set, noise, records(set, noise, false), false, true);
  if (data.empty()) throw ConfigError("R-vector training set is empty");
  const auto& m0 = data.front().mfcc;
  dist::Dataset all;
  all.feature_shape = {m0.rows(), m0.cols()};
  all.features.resize(static_cast<Index>(data.size()), m0.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto& m = data[r].mfcc;
    for (Index c = 0; c < m.rows(); ++c)
      for (Index t = 0; t < m.cols(); ++t) all.features(static_cast<Index>(r), c * m.cols() + t) = m(c, t);
    all.labels.push_back(data[r].label);
    all.groups.push_back(data[r].scene);
  }
  const std::string name = "rvector-" + scene::to_string(signal);
  Rng split_rng = make_rng(config_.seed, "split/" + name);
  auto [train, validation] = dist::split_by_group(all, config_.training.validation_fraction, split_rng);

  dist::RvectorOptions o;
  o.mfcc = m0.rows();
  o.frames = m0.cols();
  o.num_rir_classes = std::max(1, config_.counts.rvector_rooms);
  o.width_scale = config_.training.rvector_width_scale;
  nn::Network net = dist::build_rvector_extractor(o, derive_seed(config_.seed, "init/" + name));
  dist::TrainConfig tc;
  tc.epochs = config_.training.rvector_epochs;
  tc.batch_size = config_.training.batch_size;
  tc.adam.lr = config_.training.learning_rate;
  tc.seed = derive_seed(config_.seed, "train/" + name);
  tc.on_epoch = [&](int epoch, double loss, double val) {
    progress("train " + name + " epoch " + std::to_string(epoch) + " loss " + std::to_string(loss) + " val " +
             std::to_string(val));
  };
  const dist::ScoreFn error_rate = [](nn::Network& n, const dist::Dataset& d) {
    return 1.0 - dist::classification_accuracy(n, d);
  };
  progress("train " + name + " on " + std::to_string(train.size()) + " examples");
  const dist::TrainResult result =
      dist::train_classifier(net, train, validation.size() ? &validation : nullptr, tc, error_rate);
  fs::create_directories(path.parent_path());
  nn::save_checkpoint(path, net,
                      {{"kind", "rvector-extractor"},
                       {"signal", scene::to_string(signal)},
                       {"config_hash", config_.hash()},
                       {"rooms", o.num_rir_classes},
                       {"validation_accuracy", validation.size() ? 1.0 - result.best_score : 0.0},
                       {"result", train_result_json(result)}});
}

std::vector<dist::DistanceEstimate> Workspace::predict(const ModelSpec& spec, const SetId& set,
                                                       const NoiseCondition& noise,
                                                       const std::vector<std::size_t>& recs) {
  nn::Network& net = model(spec);
  const nn::RowMatrix* all_rv = spec.rvector ? &rvectors(set, noise, spec.signal) : nullptr;
  std::vector<dist::DistanceEstimate> out;
  const std::size_t chunk = spec.arch == dist::Arch::Crnn ? 128 : recs.size();
  for (std::size_t b = 0; b < recs.size(); b += std::max<std::size_t>(chunk, 1)) {
    const std::vector<std::size_t> part(recs.begin() + static_cast<std::ptrdiff_t>(b),
                                        recs.begin() + static_cast<std::ptrdiff_t>(std::min(recs.size(), b + chunk)));
    FeatureSet data;
    if (spec.arch == dist::Arch::Crnn) {
      data = load_full(set, noise, part, true, false);
    } else {
      const auto& f = features(set, noise);
      for (auto r : part) data.push_back(f[r]);
    }
    nn::RowMatrix rv;
    if (all_rv) rv = select_rows(*all_rv, part);
    const auto d = make_distance_dataset(spec, data, all_rv ? &rv : nullptr);
    const auto e = dist::estimate_distances(net, d, {});
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

}  // namespace wasncal::harness
