#include "wasncal/harness/records.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "wasncal/errors.hpp"

namespace wasncal::harness {

json to_json(const MetricsRecord& r) {
  return {{"experiment", r.experiment},
          {"metric", r.metric},
          {"labels", r.labels},
          {"value", r.value},
          {"config_hash", r.config_hash}};
}

MetricsRecord record_from_json(const json& j) {
  try {
    MetricsRecord r;
    r.experiment = j.at("experiment").get<std::string>();
    r.metric = j.at("metric").get<std::string>();
    r.labels = j.value("labels", json::object());
    r.value = j.at("value");
    r.config_hash = j.at("config_hash").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed metrics record: ") + e.what());
  }
}

std::string document_hash(json document) {
  if (document.is_object()) document.erase("out");
  return config_hash(document);
}

bool verify_hash(const MetricsRecord& r, const json& config_document) {
  return r.config_hash == document_hash(config_document);
}

void write_records(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
  json doc = json::array();
  for (const auto& r : records) doc.push_back(to_json(r));
  write_json_file(path, doc);
}

std::vector<MetricsRecord> read_records(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  if (!doc.is_array()) throw ConfigError("metrics file is not an array: " + path.string());
  std::vector<MetricsRecord> out;
  for (const auto& j : doc) out.push_back(record_from_json(j));
  return out;
}

namespace {

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream os;
    os << std::setprecision(17) << v.get<double>();
    return os.str();
  }
  std::string s = v.dump();
  if (s.find(',') != std::string::npos) s = "\"" + s + "\"";
  return s;
}

}  // namespace

void write_records_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
  std::set<std::string> keys;
  for (const auto& r : records)
    for (const auto& [k, v] : r.labels.items()) keys.insert(k);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "experiment,metric";
  for (const auto& k : keys) out << ',' << k;
  out << ",value\n";
  for (const auto& r : records) {
    out << r.experiment << ',' << r.metric;
    for (const auto& k : keys) out << ',' << (r.labels.contains(k) ? csv_cell(r.labels[k]) : "");
    out << ',' << csv_cell(r.value) << '\n';
  }
}

const MetricsRecord* find_record(const std::vector<MetricsRecord>& records, const std::string& experiment,
                                 const std::string& metric, const json& labels) {
  for (const auto& r : records) {
    if (r.experiment != experiment || r.metric != metric) continue;
    bool match = true;
    for (const auto& [k, v] : labels.items())
      if (!r.labels.contains(k) || r.labels[k] != v) match = false;
    if (match) return &r;
  }
  return nullptr;
}

std::vector<AssertionOutcome> check_assertions(const json& assertions, const std::vector<MetricsRecord>& records) {
  std::vector<AssertionOutcome> out;
  for (const auto& a : assertions) {
    AssertionOutcome o;
    o.assertion = a;
    const auto experiment = a.value("experiment", std::string());
    const auto metric = a.value("metric", std::string());
    const MetricsRecord* r = find_record(records, experiment, metric, a.value("labels", json::object()));
    if (r == nullptr || !r->value.is_number()) {
      o.message = "no numeric record for " + experiment + "/" + metric + " " + a.value("labels", json::object()).dump();
      out.push_back(o);
      continue;
    }
    const double v = r->value.get<double>();
    o.passed = true;
    std::ostringstream msg;
    msg << experiment << '/' << metric << ' ' << r->labels.dump() << " = " << v;
    if (a.contains("max")) {
      o.passed = o.passed && v <= a["max"].get<double>();
      msg << " (max " << a["max"].get<double>() << ')';
    }
    if (a.contains("min")) {
      o.passed = o.passed && v >= a["min"].get<double>();
      msg << " (min " << a["min"].get<double>() << ')';
    }
    o.message = msg.str();
    out.push_back(o);
  }
  return out;
}

}  // namespace wasncal::harness
