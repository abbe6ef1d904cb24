#include "wasncal/harness/config.hpp"

#include <algorithm>
#include <fstream>

#include "wasncal/errors.hpp"
#include "wasncal/harness/records.hpp"

namespace wasncal::harness {

namespace {

template <typename E>
struct Names {
  E value;
  const char* name;
};

constexpr Names<Scale> kScales[] = {{Scale::Desk, "desk"}, {Scale::Full, "full"}};
constexpr Names<Stage> kStages[] = {{Stage::Simulate, "simulate"},           {Stage::Featurize, "featurize"},
                                    {Stage::Train, "train"},                 {Stage::EvalDistance, "eval-distance"},
                                    {Stage::EvalCalibration, "eval-calib"}, {Stage::Report, "report"}};

template <typename E, std::size_t N>
std::string name_of(const Names<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "unknown";
}

template <typename E, std::size_t N>
E parse(const Names<E> (&table)[N], const std::string& s, const char* what) {
  for (const auto& e : table)
    if (s == e.name) return e.value;
  throw ConfigError(std::string("unknown ") + what + ": " + s);
}

json model(const char* arch, bool diff, bool rvec, const char* signal, bool oor) {
  return {{"arch", arch}, {"diffuseness", diff}, {"rvector", rvec}, {"signal", signal}, {"oor", oor}};
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad or missing \"") + key + "\": " + e.what());
  }
}

scene::SignalKind signal_of(const json& j) { return scene::signal_kind_from_string(j.get<std::string>()); }

}  // namespace

std::string to_string(Scale s) { return name_of(kScales, s); }
std::string to_string(Stage s) { return name_of(kStages, s); }
std::string to_string(DistanceSource s) { return s == DistanceSource::GroundTruth ? "ground-truth" : "model"; }
std::string to_string(DoaSource s) { return s == DoaSource::Estimated ? "estimated" : "synthetic"; }
Scale scale_from_string(const std::string& s) { return parse(kScales, s, "scale"); }
Stage stage_from_string(const std::string& s) {
  if (s == "eval-calibration") return Stage::EvalCalibration;
  return parse(kStages, s, "stage");
}

std::string ModelSpec::name() const {
  std::string n = arch == dist::Arch::Mlp ? "mlp" : "crnn";
  if (diffuseness) n += "-diff";
  if (rvector) n += "-rvec";
  n += "-" + scene::to_string(signal);
  if (oor) n += "-oor";
  return n;
}

std::string ModelSpec::label() const {
  std::string l = arch == dist::Arch::Mlp ? "MLP (" : "CRNN (";
  if (diffuseness) l += "diffuseness";
  if (diffuseness && rvector) l += " + ";
  if (rvector) l += "R-vector";
  return l + ")";
}

json to_json(const ModelSpec& m) {
  return {{"arch", m.arch == dist::Arch::Mlp ? "mlp" : "crnn"},
          {"diffuseness", m.diffuseness},
          {"rvector", m.rvector},
          {"signal", scene::to_string(m.signal)},
          {"oor", m.oor}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec m;
  const auto arch = get<std::string>(j, "arch");
  if (arch == "mlp")
    m.arch = dist::Arch::Mlp;
  else if (arch == "crnn")
    m.arch = dist::Arch::Crnn;
  else
    throw ConfigError("config: unknown architecture " + arch);
  m.diffuseness = j.value("diffuseness", true);
  m.rvector = j.value("rvector", false);
  if (j.contains("signal")) m.signal = signal_of(j.at("signal"));
  m.oor = j.value("oor", false);
  if (!m.diffuseness && !m.rvector) throw ConfigError("config: a model needs diffuseness or R-vector input");
  if (!m.diffuseness && m.arch == dist::Arch::Crnn) throw ConfigError("config: the CRNN needs diffuseness input");
  return m;
}

bool ExperimentConfig::runs(const std::string& experiment) const {
  return std::find(experiments.begin(), experiments.end(), experiment) != experiments.end();
}

scene::SignalKind ExperimentConfig::resolve(scene::SignalKind kind) const {
  if (kind == scene::SignalKind::WhiteNoise) return kind;
  return speech_dir ? scene::SignalKind::SpeechFile : scene::SignalKind::SpeechSurrogate;
}

std::string ExperimentConfig::hash() const { return document_hash(document); }

json default_document(Scale scale) {
  const bool full = scale == Scale::Full;
  json rows = json::array({model("mlp", false, true, "white-noise", false), model("mlp", true, false, "white-noise", false),
                           model("mlp", true, true, "white-noise", false), model("crnn", true, false, "white-noise", false),
                           model("crnn", true, true, "white-noise", false)});
  return {
      {"id", full ? "full" : "desk"},
      {"scale", to_string(scale)},
      {"out", full ? "runs/full" : "runs/desk"},
      {"paths", json::object()},
      {"experiments", {"table1", "table4", "table5", "error-cdf"}},
      {"counts",
       {{"train_pairs", full ? 10000 : 2000},
        {"eval_pairs", full ? 10000 : 1000},
        {"oor_train", full ? 1000 : 200},
        {"oor_eval", full ? 2500 : 250},
        {"calib_scenes", full ? 100 : 20},
        {"rvector_rooms", full ? 500 : 50},
        {"rvector_pairs_per_room", 20},
        {"gp_pairs", full ? 1000 : 200},
        {"gp_matched_pairs", full ? 1000 : 200},
        {"doa_scenes", full ? 10 : 4},
        {"doa_sources", full ? 30 : 10}}},
      {"training",
       {{"epochs", full ? 50 : 30},
        {"batch_size", 32},
        {"learning_rate", 3e-4},
        {"validation_fraction", 0.1},
        {"rvector_epochs", full ? 30 : 15},
        {"crnn_width_scale", full ? 1.0 : 0.25},
        {"rvector_width_scale", full ? 1.0 : 0.5},
        {"crnn_max_pairs", full ? 0 : 400}}},
      {"table1", {{"rows", rows}, {"signals", {"white-noise", "speech"}}}},
      {"table4",
       {{"model", full ? model("crnn", true, true, "speech", true) : model("mlp", true, true, "white-noise", true)},
        {"snr_db", {30, 20, 10, 5}}}},
      {"table5",
       {{"t60", {0.2, 0.3, 0.4, 0.5}},
        {"distances", {"ground-truth", "model"}},
        {"doa", full ? "estimated" : "synthetic"},
        {"model", full ? model("crnn", true, true, "speech", true) : model("mlp", true, true, "speech", true)},
        {"outlier_deg", 20.0}}},
      {"error_cdf",
       {{"model", full ? model("crnn", true, true, "speech", false) : model("mlp", true, false, "white-noise", false)},
        {"gp_room", {6.5, 5.5}},
        {"gp_t60", 0.35},
        {"max_error", 1.0},
        {"step", 0.01}}},
      {"train_inline", true},
      {"assertions", json::array()}};
}

ExperimentConfig config_from_json(const json& doc, std::optional<Scale> scale_override,
                                  std::optional<std::uint64_t> seed_override) {
  if (!doc.is_object()) throw ConfigError("config: document must be a JSON object");
  Scale scale = scale_override.value_or(doc.contains("scale") ? scale_from_string(get<std::string>(doc, "scale"))
                                                              : Scale::Desk);
  json merged = default_document(scale);
  merged.merge_patch(doc);
  merged["scale"] = to_string(scale);
  if (seed_override) merged["seed"] = *seed_override;
  if (!merged.contains("seed") || merged["seed"].is_null())
    throw ConfigError("config: a root \"seed\" is mandatory (set it in the document or pass --seed)");
  if (!merged["seed"].is_number_unsigned() && !(merged["seed"].is_number_integer() && merged["seed"].get<long long>() >= 0))
    throw ConfigError("config: \"seed\" must be a non-negative integer");

  ExperimentConfig c;
  c.scale = scale;
  c.seed = merged["seed"].get<std::uint64_t>();
  c.id = get<std::string>(merged, "id");
  c.out_dir = get<std::string>(merged, "out");
  const json& paths = merged.at("paths");
  if (paths.contains("speech_dir") && !paths["speech_dir"].is_null()) {
    c.speech_dir = paths["speech_dir"].get<std::string>();
    if (!std::filesystem::is_directory(*c.speech_dir))
      throw ConfigError("config: speech_dir does not exist: " + c.speech_dir->string());
  }
  c.experiments = get<std::vector<std::string>>(merged, "experiments");
  for (const auto& e : c.experiments)
    if (e != "table1" && e != "table4" && e != "table5" && e != "error-cdf")
      throw ConfigError("config: unknown experiment " + e);

  const json& n = merged.at("counts");
  c.counts.train_pairs = get<int>(n, "train_pairs");
  c.counts.eval_pairs = get<int>(n, "eval_pairs");
  c.counts.oor_train = get<int>(n, "oor_train");
  c.counts.oor_eval = get<int>(n, "oor_eval");
  c.counts.calib_scenes = get<int>(n, "calib_scenes");
  c.counts.rvector_rooms = get<int>(n, "rvector_rooms");
  c.counts.rvector_pairs_per_room = get<int>(n, "rvector_pairs_per_room");
  c.counts.gp_pairs = get<int>(n, "gp_pairs");
  c.counts.gp_matched_pairs = get<int>(n, "gp_matched_pairs");
  c.counts.doa_scenes = get<int>(n, "doa_scenes");
  c.counts.doa_sources = get<int>(n, "doa_sources");
  for (const auto& [k, v] : n.items())
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("config: count " + k + " must be >= 0");

  const json& t = merged.at("training");
  c.training.epochs = get<int>(t, "epochs");
  c.training.batch_size = get<int>(t, "batch_size");
  c.training.learning_rate = get<double>(t, "learning_rate");
  c.training.validation_fraction = get<double>(t, "validation_fraction");
  c.training.rvector_epochs = get<int>(t, "rvector_epochs");
  c.training.crnn_width_scale = get<double>(t, "crnn_width_scale");
  c.training.rvector_width_scale = get<double>(t, "rvector_width_scale");
  c.training.crnn_max_pairs = get<int>(t, "crnn_max_pairs");
  if (c.training.epochs < 1 || c.training.batch_size < 1 || !(c.training.learning_rate > 0.0))
    throw ConfigError("config: training needs epochs >= 1, batch_size >= 1 and a positive learning rate");

  const json& t1 = merged.at("table1");
  for (const auto& r : t1.at("rows")) c.table1.rows.push_back(model_spec_from_json(r));
  for (const auto& s : t1.at("signals")) c.table1.signals.push_back(signal_of(s));

  const json& t4 = merged.at("table4");
  c.table4.model = model_spec_from_json(t4.at("model"));
  c.table4.snr_db = get<std::vector<double>>(t4, "snr_db");

  const json& t5 = merged.at("table5");
  c.table5.t60 = get<std::vector<double>>(t5, "t60");
  for (const auto& d : t5.at("distances")) {
    const auto s = d.get<std::string>();
    if (s == "ground-truth")
      c.table5.distances.push_back(DistanceSource::GroundTruth);
    else if (s == "model")
      c.table5.distances.push_back(DistanceSource::Model);
    else
      throw ConfigError("config: unknown distance source " + s);
  }
  const auto doa = get<std::string>(t5, "doa");
  if (doa != "estimated" && doa != "synthetic") throw ConfigError("config: doa must be estimated or synthetic");
  c.table5.doa = doa == "estimated" ? DoaSource::Estimated : DoaSource::Synthetic;
  c.table5.model = model_spec_from_json(t5.at("model"));
  c.table5.outlier_deg = get<double>(t5, "outlier_deg");
  for (double v : c.table5.t60)
    if (v < 0.05 || v > 2.0) throw ConfigError("config: T60 values must lie in [0.05, 2] s");

  const json& ec = merged.at("error_cdf");
  c.error_cdf.model = model_spec_from_json(ec.at("model"));
  const auto room = get<std::vector<double>>(ec, "gp_room");
  if (room.size() != 2) throw ConfigError("config: gp_room must be [x, y]");
  c.error_cdf.gp_room_x = room[0];
  c.error_cdf.gp_room_y = room[1];
  c.error_cdf.gp_t60 = get<double>(ec, "gp_t60");
  c.error_cdf.max_error = get<double>(ec, "max_error");
  c.error_cdf.step = get<double>(ec, "step");
  if (!(c.error_cdf.step > 0.0) || !(c.error_cdf.max_error > 0.0))
    throw ConfigError("config: error_cdf needs positive step and max_error");

  c.train_inline = get<bool>(merged, "train_inline");
  c.assertions = merged.at("assertions");
  if (!c.assertions.is_array()) throw ConfigError("config: assertions must be an array");
  c.document = merged;
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<Scale> scale_override,
                             std::optional<std::uint64_t> seed_override) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  json doc;
  try {
    doc = read_json_file(path);
  } catch (const json::exception& e) {
    throw ConfigError("config: cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(doc, scale_override, seed_override);
}

}  // namespace wasncal::harness
