#include "wasncal/calib/report.hpp"

#include <cmath>

#include "wasncal/errors.hpp"

namespace wasncal::calib {

namespace {

json points_json(const Points& p) {
  json a = json::array();
  for (Eigen::Index r = 0; r < p.rows(); ++r) a.push_back({p(r, 0), p(r, 1)});
  return a;
}

Points points_from_json(const json& a) {
  Points p(static_cast<Eigen::Index>(a.size()), 2);
  for (std::size_t r = 0; r < a.size(); ++r) {
    p(static_cast<Eigen::Index>(r), 0) = a[r].at(0).get<double>();
    p(static_cast<Eigen::Index>(r), 1) = a[r].at(1).get<double>();
  }
  return p;
}

// NaN entries become null
json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(std::isfinite(m(r, c)) ? json(m(r, c)) : json(nullptr));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

json to_json(const Geometry& g) {
  json j{{"nodes", points_json(g.nodes)},
         {"orientations", std::vector<double>(g.orientations.data(), g.orientations.data() + g.orientations.size())},
         {"sources", points_json(g.sources)}};
  j["scale"] = g.scale ? json(*g.scale) : json(nullptr);
  return j;
}

Geometry geometry_from_json(const json& j) {
  try {
    Geometry g;
    g.nodes = points_from_json(j.at("nodes"));
    const auto o = j.at("orientations").get<std::vector<double>>();
    g.orientations = Eigen::Map<const Eigen::VectorXd>(o.data(), static_cast<Eigen::Index>(o.size()));
    g.sources = points_from_json(j.at("sources"));
    if (j.contains("scale") && !j["scale"].is_null()) g.scale = j["scale"].get<double>();
    if (g.orientations.size() != g.nodes.rows()) throw ConfigError("geometry: one orientation per node expected");
    return g;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("geometry json: ") + e.what());
  }
}

json to_json(const CalibrationReport& report) {
  const auto& r = report.result;
  json j{{"unscaled", to_json(r.geometry)},
         {"objective", r.residual},
         {"iterations", r.iterations},
         {"hypotheses", r.hypotheses},
         {"residuals_rad", matrix_json(r.residuals)}};
  json mask = json::array();
  for (Eigen::Index row = 0; row < r.inliers.rows(); ++row) {
    json line = json::array();
    for (Eigen::Index c = 0; c < r.inliers.cols(); ++c) line.push_back(static_cast<bool>(r.inliers(row, c)));
    mask.push_back(line);
  }
  j["inliers"] = mask;
  j["scale"] = r.scale ? json(*r.scale) : json(nullptr);
  if (report.scaled) j["scaled"] = to_json(*report.scaled);
  if (report.aligned) j["aligned"] = to_json(*report.aligned);
  if (report.truth) j["truth"] = to_json(*report.truth);
  if (report.mpe) j["mpe_m"] = *report.mpe;
  if (!report.extra.empty()) j["extra"] = report.extra;
  return j;
}

}  // namespace wasncal::calib
