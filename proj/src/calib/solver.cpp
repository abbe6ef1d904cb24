#include "wasncal/calib/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wasncal/errors.hpp"
#include "wasncal/random.hpp"

namespace wasncal::calib {

namespace {

double huber(double r, double delta) {
  const double a = std::abs(r);
  if (delta <= 0.0 || a <= delta) return r * r;
  return 2.0 * delta * a - delta * delta;
}

struct Observation {
  Eigen::Index node;
  Eigen::Index source;
  double azimuth;
};

std::vector<Observation> list_observations(const DoAObservationSet& obs) {
  std::vector<Observation> out;
  for (Eigen::Index i = 0; i < obs.num_sources(); ++i)
    for (Eigen::Index j = 0; j < obs.num_nodes(); ++j)
      if (obs.valid(j, i)) out.push_back({j, i, obs.azimuths(j, i)});
  return out;
}

// Free parameters: poses of nodes 1..K-1 (x, y, then all orientations) and
// every source position.
class Parameterization {
 public:
  Parameterization(Eigen::Index k, Eigen::Index n) : k_(k), n_(n) {}
  Eigen::Index size() const { return 3 * (k_ - 1) + 2 * n_; }
  Eigen::Index node_x(Eigen::Index j) const { return 2 * (j - 1); }
  Eigen::Index node_theta(Eigen::Index j) const { return 2 * (k_ - 1) + (j - 1); }
  Eigen::Index source_x(Eigen::Index i) const { return 3 * (k_ - 1) + 2 * i; }

  Eigen::VectorXd pack(const Geometry& g) const {
    Eigen::VectorXd x(size());
    for (Eigen::Index j = 1; j < k_; ++j) {
      x.segment<2>(node_x(j)) = g.nodes.row(j).transpose();
      x[node_theta(j)] = g.orientations[j];
    }
    for (Eigen::Index i = 0; i < n_; ++i) x.segment<2>(source_x(i)) = g.sources.row(i).transpose();
    return x;
  }

  Geometry unpack(const Eigen::VectorXd& x) const {
    Geometry g;
    g.nodes = Points::Zero(k_, 2);
    g.orientations = Eigen::VectorXd::Zero(k_);
    g.sources.resize(n_, 2);
    for (Eigen::Index j = 1; j < k_; ++j) {
      g.nodes.row(j) = x.segment<2>(node_x(j)).transpose();
      g.orientations[j] = wrap_angle(x[node_theta(j)]);
    }
    for (Eigen::Index i = 0; i < n_; ++i) g.sources.row(i) = x.segment<2>(source_x(i)).transpose();
    return g;
  }

 private:
  Eigen::Index k_, n_;
};

struct RunResult {
  Geometry geometry;
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

class Problem {
 public:
  Problem(const DoAObservationSet& obs, double huber_deg)
      : obs_(list_observations(obs)), par_(obs.num_nodes(), obs.num_sources()), delta_(huber_deg * kDeg) {}

  double cost(const Geometry& g) const {
    double c = 0.0;
    for (std::size_t r = 0; r < obs_.size(); ++r) c += weight(r) * huber(residual(g, obs_[r]), delta_);
    return c;
  }

  /// Geman-McClure cost with scale c: bounded, so outliers stop mattering.
  double robust_cost(const Geometry& g, double c) const {
    double total = 0.0;
    for (const auto& o : obs_) {
      const double e2 = std::pow(residual(g, o), 2);
      total += c * c * e2 / (c * c + e2);
    }
    return total;
  }

  /// Graduated non-convexity: least squares first, then Geman-McClure
  /// weights whose control parameter shrinks towards the plain robust loss.
  RunResult run_gnc(Geometry start, const SolverConfig& config) {
    const double c = config.gnc_scale_deg * kDeg;
    weights_.clear();
    RunResult out = run(std::move(start), config);
    double max_e2 = 0.0;
    for (const auto& o : obs_) max_e2 = std::max(max_e2, std::pow(residual(out.geometry, o), 2));
    double mu = std::max(1.0, 2.0 * max_e2 / (c * c));
    SolverConfig stage = config;
    stage.max_iterations = std::min(config.max_iterations, 200);
    int iterations = out.iterations;
    bool converged = out.converged;
    while (true) {
      weights_.resize(obs_.size());
      for (std::size_t r = 0; r < obs_.size(); ++r) {
        const double e2 = std::pow(residual(out.geometry, obs_[r]), 2);
        weights_[r] = std::pow(mu * c * c / (mu * c * c + e2), 2);
      }
      RunResult next = run(out.geometry, stage);
      iterations += next.iterations;
      converged = next.converged;
      out.geometry = std::move(next.geometry);
      if (mu == 1.0) break;
      mu = std::max(1.0, mu / 1.4);
    }
    weights_.clear();
    out.cost = robust_cost(out.geometry, c);
    out.iterations = iterations;
    out.converged = converged;
    return out;
  }

  RunResult run(Geometry start, const SolverConfig& config) const {
    RunResult out;
    Geometry g = canonicalize(std::move(start));
    double c = cost(g);
    const Eigen::Index p = par_.size();
    const auto m = static_cast<Eigen::Index>(obs_.size());
    Eigen::MatrixXd jac(m, p);
    Eigen::VectorXd res(m);
    double mu = -1.0;
    int it = 0;
    for (; it < config.max_iterations; ++it) {
      if (c < 1e-26) {
        out.converged = true;
        break;
      }
      linearize(g, jac, res);
      const Eigen::MatrixXd a = jac.transpose() * jac;
      const Eigen::VectorXd grad = jac.transpose() * res;
      if (mu < 0.0) mu = 1e-3 * a.diagonal().maxCoeff();
      bool accepted = false;
      while (!accepted) {
        Eigen::MatrixXd damped = a;
        damped.diagonal().array() += mu * (a.diagonal().array() + 1e-9 * a.diagonal().maxCoeff());
        const Eigen::VectorXd step = damped.ldlt().solve(-grad);
        Geometry trial = par_.unpack(par_.pack(g) + step);
        const double s = trial.node_distance_sum();
        if (step.allFinite() && s > 1e-9) {
          trial.nodes /= s;
          trial.sources /= s;
          const double ct = cost(trial);
          if (ct < c) {
            const double rel = (c - ct) / std::max(c, std::numeric_limits<double>::min());
            g = std::move(trial);
            c = ct;
            mu = std::max(mu / 3.0, 1e-15);
            accepted = true;
            if (rel < config.tolerance) out.converged = true;
            continue;
          }
        }
        mu *= 4.0;
        // no descent left at machine precision: a stationary point
        if (mu > 1e12) {
          out.converged = true;
          break;
        }
      }
      if (out.converged) {
        ++it;
        break;
      }
    }
    out.geometry = std::move(g);
    out.cost = c;
    out.iterations = it;
    return out;
  }

  const std::vector<Observation>& observations() const { return obs_; }

 private:
  double weight(std::size_t r) const { return weights_.empty() ? 1.0 : weights_[r]; }

  static double residual(const Geometry& g, const Observation& o) {
    const Eigen::RowVector2d d = g.sources.row(o.source) - g.nodes.row(o.node);
    return wrap_angle(o.azimuth - std::atan2(d.y(), d.x()) + g.orientations[o.node]);
  }

  // IRLS-weighted residuals and Jacobian
  void linearize(const Geometry& g, Eigen::MatrixXd& jac, Eigen::VectorXd& res) const {
    jac.setZero();
    for (std::size_t r = 0; r < obs_.size(); ++r) {
      const auto& o = obs_[r];
      const auto row = static_cast<Eigen::Index>(r);
      const Eigen::RowVector2d d = g.sources.row(o.source) - g.nodes.row(o.node);
      const double rho2 = std::max(d.squaredNorm(), 1e-12);
      const double e = residual(g, o);
      const double w = std::sqrt(weight(r)) *
                       ((delta_ > 0.0 && std::abs(e) > delta_) ? std::sqrt(delta_ / std::abs(e)) : 1.0);
      res[row] = w * e;
      // d atan2(dy, dx) / d(dx, dy) = (-dy, dx) / rho^2
      const Eigen::Vector2d datan(-d.y() / rho2, d.x() / rho2);
      jac.block<1, 2>(row, par_.source_x(o.source)) = -w * datan.transpose();
      if (o.node > 0) {
        jac.block<1, 2>(row, par_.node_x(o.node)) = w * datan.transpose();
        jac(row, par_.node_theta(o.node)) = w;
      }
    }
  }

  std::vector<Observation> obs_;
  Parameterization par_;
  double delta_;
  std::vector<double> weights_;
};

void check_identifiable(const DoAObservationSet& obs) {
  if (obs.azimuths.rows() != obs.valid.rows() || obs.azimuths.cols() != obs.valid.cols())
    throw DomainError("observation matrix and mask differ in shape");
  if (obs.num_nodes() < 3) throw DomainError("geometry calibration needs at least three nodes");
  for (Eigen::Index j = 0; j < obs.num_nodes(); ++j)
    if (obs.valid.row(j).count() < 2)
      throw DomainError("node " + std::to_string(j) + " has fewer than two valid observations");
  Eigen::Index seen = 0;
  for (Eigen::Index i = 0; i < obs.num_sources(); ++i)
    if (obs.valid.col(i).count() >= 2) ++seen;
  if (seen < 3) throw DomainError("geometry calibration needs three sources observed by two or more nodes");
}

}  // namespace

double calibration_objective(const Geometry& g, const DoAObservationSet& obs, double huber_deg) {
  double c = 0.0;
  const Eigen::MatrixXd r = angular_residuals(g, obs);
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (obs.valid.data()[i]) c += huber(r.data()[i], huber_deg * kDeg);
  return c;
}

Eigen::MatrixXd angular_residuals(const Geometry& g, const DoAObservationSet& obs) {
  if (g.num_nodes() != obs.num_nodes() || g.num_sources() != obs.num_sources())
    throw DomainError("geometry and observations disagree in size");
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(obs.num_nodes(), obs.num_sources(), std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < obs.num_sources(); ++i)
    for (Eigen::Index j = 0; j < obs.num_nodes(); ++j)
      if (obs.valid(j, i)) r(j, i) = wrap_angle(obs.azimuths(j, i) - g.azimuth(j, i));
  return r;
}

Geometry canonicalize(Geometry g) {
  if (g.num_nodes() < 2) throw DomainError("canonicalize: need at least two nodes");
  const Eigen::RowVector2d origin = g.nodes.row(0);
  const double theta0 = g.orientations[0];
  Eigen::Matrix2d rot;
  rot << std::cos(theta0), std::sin(theta0), -std::sin(theta0), std::cos(theta0);  // rotation by -theta0
  g.nodes = ((g.nodes.rowwise() - origin) * rot.transpose()).eval();
  g.sources = ((g.sources.rowwise() - origin) * rot.transpose()).eval();
  for (Eigen::Index j = 0; j < g.num_nodes(); ++j) g.orientations[j] = wrap_angle(g.orientations[j] - theta0);
  g.orientations[0] = 0.0;
  g.nodes.row(0).setZero();
  const double s = g.node_distance_sum();
  if (!(s > 0.0)) throw DomainError("canonicalize: all nodes coincide");
  g.nodes /= s;
  g.sources /= s;
  g.scale.reset();
  return g;
}

std::optional<Eigen::Vector2d> triangulate(const Geometry& g, const DoAObservationSet& obs, Eigen::Index source,
                                           const Mask* usable) {
  // each bearing line: normal . (s - n_j) = 0
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  int lines = 0;
  for (Eigen::Index j = 0; j < obs.num_nodes(); ++j) {
    if (!obs.valid(j, source) || (usable && !(*usable)(j, source))) continue;
    const double phi = obs.azimuths(j, source) + g.orientations[j];
    const Eigen::Vector2d normal(-std::sin(phi), std::cos(phi));
    a += normal * normal.transpose();
    b += normal * normal.dot(g.nodes.row(j).transpose());
    ++lines;
  }
  if (lines < 2) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
  if (es.eigenvalues()[0] < 1e-6 * std::max(1.0, es.eigenvalues()[1])) return std::nullopt;
  return Eigen::Vector2d(a.ldlt().solve(b));
}

SolveResult solve_geometry(const DoAObservationSet& obs, const SolverConfig& config, const Geometry* initial) {
  check_identifiable(obs);
  if (config.restarts < (initial ? 0 : 1) || config.max_iterations < 1)
    throw ConfigError("solver needs at least one start and one iteration");
  if (config.gnc_scale_deg < 0.0 || config.huber_deg < 0.0) throw ConfigError("solver: negative loss scale");
  Problem problem(obs, config.gnc_scale_deg > 0.0 ? 0.0 : config.huber_deg);
  const Eigen::Index k = obs.num_nodes(), n = obs.num_sources();
  auto run = [&](Geometry start) {
    return config.gnc_scale_deg > 0.0 ? problem.run_gnc(std::move(start), config) : problem.run(std::move(start), config);
  };

  RunResult best;
  int converged = 0;
  if (initial) {
    if (initial->num_nodes() != k || initial->num_sources() != n)
      throw DomainError("solver: initial geometry does not match the observations");
    best = run(*initial);
    if (best.converged) ++converged;
  }
  for (int r = 0; r < config.restarts; ++r) {
    Rng rng = make_rng(config.seed, "calib.restart", static_cast<std::uint64_t>(r));
    Geometry start;
    start.nodes = Points::Zero(k, 2);
    start.orientations = Eigen::VectorXd::Zero(k);
    for (Eigen::Index j = 1; j < k; ++j) {
      start.nodes.row(j) << uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0);
      start.orientations[j] = uniform(rng, -std::numbers::pi, std::numbers::pi);
    }
    start.sources.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto s = triangulate(start, obs, i);
      if (s && s->norm() < 5.0) {
        start.sources.row(i) = s->transpose();
      } else {
        const double rad = std::sqrt(uniform(rng, 0.0, 1.0)), ang = uniform(rng, -std::numbers::pi, std::numbers::pi);
        start.sources.row(i) << rad * std::cos(ang), rad * std::sin(ang);
      }
    }
    RunResult result = run(std::move(start));
    if (result.converged) ++converged;
    if (result.cost < best.cost) best = std::move(result);
  }
  if (converged == 0 || !std::isfinite(best.cost))
    throw CalibrationFailure("geometry solver did not converge in any restart", best.cost);

  SolveResult out;
  out.geometry = std::move(best.geometry);
  out.residual = best.cost;
  out.residuals = angular_residuals(out.geometry, obs);
  out.iterations = best.iterations;
  out.converged_restarts = converged;
  return out;
}

}  // namespace wasncal::calib
