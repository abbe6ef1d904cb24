#include "wasncal/calib/ransac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wasncal/errors.hpp"
#include "wasncal/random.hpp"

namespace wasncal::calib {

namespace {

double bearing_residual(const Geometry& g, const DoAObservationSet& obs, Eigen::Index j, const Eigen::Vector2d& s) {
  const Eigen::Vector2d d = s - g.nodes.row(j).transpose();
  return wrap_angle(obs.azimuths(j, 0) - std::atan2(d.y(), d.x()) + g.orientations[j]);
}

}  // namespace

Geometry place_sources(Geometry g, const DoAObservationSet& obs, double threshold_rad) {
  for (Eigen::Index i = 0; i < obs.num_sources(); ++i) {
    const DoAObservationSet one = obs.select_sources({i});
    std::vector<Eigen::Index> seen;
    for (Eigen::Index j = 0; j < obs.num_nodes(); ++j)
      if (one.valid(j, 0)) seen.push_back(j);
    if (seen.size() < 2) continue;

    int best_count = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    Mask best_mask;
    for (std::size_t a = 0; a < seen.size(); ++a)
      for (std::size_t b = a + 1; b < seen.size(); ++b) {
        Mask pair = Mask::Constant(obs.num_nodes(), 1, false);
        pair(seen[a], 0) = pair(seen[b], 0) = true;
        const auto s = triangulate(g, one, 0, &pair);
        if (!s) continue;
        Mask agree = Mask::Constant(obs.num_nodes(), 1, false);
        int count = 0;
        double cost = 0.0;
        for (Eigen::Index j : seen) {
          const double r = std::abs(bearing_residual(g, one, j, *s));
          if (r < threshold_rad) {
            agree(j, 0) = true;
            ++count;
            cost += r * r;
          }
        }
        if (count > best_count || (count == best_count && cost < best_cost)) {
          best_count = count;
          best_cost = cost;
          best_mask = agree;
        }
      }
    if (best_count >= 2) {
      if (const auto s = triangulate(g, one, 0, &best_mask)) g.sources.row(i) = s->transpose();
    } else if (const auto s = triangulate(g, one, 0)) {
      g.sources.row(i) = s->transpose();
    }
  }
  return g;
}

Mask inlier_mask(const Geometry& g, const DoAObservationSet& obs, double threshold_rad, int min_support) {
  const Eigen::MatrixXd r = angular_residuals(g, obs);
  Mask m = Mask::Constant(obs.num_nodes(), obs.num_sources(), false);
  for (Eigen::Index i = 0; i < r.size(); ++i) m.data()[i] = obs.valid.data()[i] && std::abs(r.data()[i]) < threshold_rad;
  for (Eigen::Index i = 0; i < m.cols(); ++i)
    if (m.col(i).count() < min_support) m.col(i).setConstant(false);
  return m;
}

CalibrationResult ransac_calibrate(const DoAObservationSet& obs, const RansacConfig& config) {
  if (config.subset_size < 3 || config.iterations < 1 || !(config.quorum > 0.0 && config.quorum <= 1.0))
    throw ConfigError("ransac: bad subset size, iteration count or quorum");
  const double tau = config.inlier_threshold_deg * kDeg;
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index i = 0; i < obs.num_sources(); ++i)
    if (obs.valid.col(i).count() >= 2) candidates.push_back(i);
  const auto subset = std::min<std::size_t>(static_cast<std::size_t>(config.subset_size), candidates.size());
  const Eigen::Index needed =
      static_cast<Eigen::Index>(std::ceil(config.quorum * static_cast<double>(obs.num_valid()) - 1e-12));

  Geometry best_model;
  Eigen::Index best_count = -1;
  double best_objective = std::numeric_limits<double>::infinity();
  int hypotheses = 0;
  for (int it = 0; it < config.iterations; ++it) {
    Rng rng = make_rng(config.seed, "ransac", static_cast<std::uint64_t>(it));
    std::vector<Eigen::Index> pick = candidates;
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(subset);
    std::sort(pick.begin(), pick.end());
    SolverConfig sc = config.hypothesis_solver;
    sc.seed = derive_seed(config.seed, "ransac.solver", static_cast<std::uint64_t>(it));
    Geometry model;
    try {
      DoAObservationSet sub_obs = obs.select_sources(pick);
      SolveResult sub = solve_geometry(sub_obs, sc);
      // drop the subset's own outliers and fit again
      const Mask keep = inlier_mask(sub.geometry, sub_obs, tau);
      if (keep.count() < sub_obs.num_valid()) {
        sub_obs.valid = keep;
        sub = solve_geometry(sub_obs, sc);
      }
      model.nodes = sub.geometry.nodes;
      model.orientations = sub.geometry.orientations;
    } catch (const DomainError&) {
      continue;
    } catch (const CalibrationFailure&) {
      continue;
    }
    ++hypotheses;
    model.sources = Points::Zero(obs.num_sources(), 2);
    model = place_sources(std::move(model), obs, tau);
    Mask inl = inlier_mask(model, obs, tau, config.min_support);
    // local optimization: a promising model is refit on its own consensus
    if (inl.count() > best_count) {
      for (int round = 0; round < config.local_refits; ++round) {
        DoAObservationSet masked = obs;
        masked.valid = inl;
        try {
          model = solve_geometry(masked, config.local_solver, &model).geometry;
        } catch (const DomainError&) {
          break;
        } catch (const CalibrationFailure&) {
          break;
        }
        model = place_sources(std::move(model), obs, tau);
        const Mask next = inlier_mask(model, obs, tau, config.min_support);
        if (next.count() <= inl.count()) {
          inl = next;
          break;
        }
        inl = next;
      }
    }
    const Eigen::Index count = inl.count();
    const double objective = calibration_objective(model, obs, config.hypothesis_solver.huber_deg);
    if (count > best_count || (count == best_count && objective < best_objective)) {
      best_count = count;
      best_objective = objective;
      best_model = std::move(model);
    }
    // a hypothesis explaining everything cannot be beaten
    if (count == obs.num_valid()) break;
  }
  // the quorum counts every bearing the model explains, verified or not
  const Eigen::Index explained = best_count < 0 ? 0 : inlier_mask(best_model, obs, tau).count();
  if (explained < needed)
    throw CalibrationFailure("ransac: no hypothesis reached the inlier quorum (" + std::to_string(explained) +
                                 " of " + std::to_string(needed) + " required)",
                             best_objective);

  // refit on the consensus set until it stops changing
  Mask consensus = inlier_mask(best_model, obs, tau, config.min_support);
  SolveResult fit;
  for (int round = 0; round < config.max_refits; ++round) {
    DoAObservationSet masked = obs;
    masked.valid = obs.valid.array() && consensus.array();
    try {
      fit = solve_geometry(masked, config.refit_solver, round == 0 ? &best_model : &fit.geometry);
    } catch (const DomainError& e) {
      throw CalibrationFailure(std::string("ransac: consensus set is not identifiable: ") + e.what(), best_objective);
    }
    const Mask next = inlier_mask(fit.geometry, obs, tau, config.min_support);
    if (next == consensus || inlier_mask(fit.geometry, obs, tau).count() < needed) break;
    consensus = next;
  }

  CalibrationResult out;
  out.geometry = fit.geometry;
  out.residual = fit.residual;
  out.inliers = consensus;
  out.residuals = angular_residuals(fit.geometry, obs);
  out.iterations = fit.iterations;
  out.hypotheses = hypotheses;
  out.located.resize(obs.num_sources());
  for (Eigen::Index i = 0; i < obs.num_sources(); ++i) out.located[i] = consensus.col(i).count() >= config.min_support;
  return out;
}

}  // namespace wasncal::calib
