#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wasncal/json_io.hpp"

namespace wasncal::harness {

/// One metric value of one experiment cell, bound to the config it came from.
struct MetricsRecord {
  std::string experiment;  // table1, table4, table5, error-cdf
  std::string metric;      // mae, f1, mpe, error-cdf, discards, failures
  json labels = json::object();
  json value;
  std::string config_hash;
};

json to_json(const MetricsRecord& r);
MetricsRecord record_from_json(const json& j);

/// Hash of an experiment document, ignoring where its run directory lives.
std::string document_hash(json document);

/// True when the record's hash is the hash of `config_document`.
bool verify_hash(const MetricsRecord& r, const json& config_document);

void write_records(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_records(const std::filesystem::path& path);

/// Flat CSV: experiment, metric, one column per label key (union, sorted), value.
void write_records_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);

/// First record matching experiment, metric and every given label; null when none.
const MetricsRecord* find_record(const std::vector<MetricsRecord>& records, const std::string& experiment,
                                 const std::string& metric, const json& labels = json::object());

struct AssertionOutcome {
  json assertion;
  bool passed = false;
  std::string message;
};

/// Assertions have the form
///   {"experiment", "metric", "labels": {...}, "max": x} (or "min": x).
/// A missing record fails its assertion.
std::vector<AssertionOutcome> check_assertions(const json& assertions, const std::vector<MetricsRecord>& records);

}  // namespace wasncal::harness
