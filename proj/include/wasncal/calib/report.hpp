#pragma once

#include "wasncal/calib/ransac.hpp"
#include "wasncal/json_io.hpp"

namespace wasncal::calib {

/// Everything a calibration run produces, for the JSON report.
struct CalibrationReport {
  CalibrationResult result;          // unscaled solution
  std::optional<Geometry> scaled;    // after the distance-based scale
  std::optional<Geometry> aligned;   // scaled geometry rigidly matched to the truth
  std::optional<Geometry> truth;
  std::optional<double> mpe;
  json extra = json::object();
};

json to_json(const Geometry& g);
Geometry geometry_from_json(const json& j);
json to_json(const CalibrationReport& report);

}  // namespace wasncal::calib
