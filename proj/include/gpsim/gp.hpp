#pragma once

// Zero-mean GP regression on standardized targets: fitting, log marginal
// likelihood and its gradient, multi-start hyperparameter optimization and
// the joint predictive distribution on a query grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gpsim/kernel.hpp"

namespace gpsim {

/// Training inputs with standardized targets; y_mean/y_std undo the scaling.
struct Dataset {
  Points X;
  Eigen::VectorXd y;
  double y_mean = 0.0;
  double y_std = 1.0;

  /// Builds a dataset from raw observations, standardizing them to zero
  /// mean and unit (population) standard deviation. Requires n >= 2 and
  /// non-constant finite targets.
  static Dataset standardize(Points X, const Eigen::VectorXd& y_raw) {
    if (X.rows() != y_raw.size()) throw std::invalid_argument("Dataset: X and y sizes differ");
    if (X.rows() < 2) throw std::invalid_argument("Dataset: need at least two observations");
    if (X.cols() < 1) throw std::invalid_argument("Dataset: inputs need at least one dimension");
    if (!X.allFinite() || !y_raw.allFinite()) throw std::invalid_argument("Dataset: non-finite entry");
    const double mean = y_raw.mean();
    const double sd = std::sqrt((y_raw.array() - mean).square().mean());
    if (!(sd > 0.0)) throw std::invalid_argument("Dataset: targets are constant (zero std)");
    Dataset d;
    d.X = std::move(X);
    d.y = (y_raw.array() - mean) / sd;
    d.y_mean = mean;
    d.y_std = sd;
    return d;
  }

  /// Wraps targets that are already on the model scale (n >= 1).
  static Dataset from_standardized(Points X, Eigen::VectorXd y, double y_mean = 0.0,
                                   double y_std = 1.0) {
    if (X.rows() != y.size() || X.rows() < 1 || X.cols() < 1)
      throw std::invalid_argument("Dataset: inconsistent or empty inputs");
    if (!X.allFinite() || !y.allFinite() || !(y_std > 0.0))
      throw std::invalid_argument("Dataset: non-finite entry or non-positive scale");
    return Dataset{std::move(X), std::move(y), y_mean, y_std};
  }

  [[nodiscard]] Eigen::Index size() const { return X.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return X.cols(); }
  [[nodiscard]] Eigen::VectorXd original_y() const {
    return (y.array() * y_std + y_mean).matrix();
  }
};

struct FittedGP {
  Dataset dataset;
  Hyperparameters hyper;
  Eigen::MatrixXd chol;   // lower factor of K + sigma_n^2 I (+ jitter)
  Eigen::VectorXd alpha;  // (K + sigma_n^2 I)^-1 y
  double jitter = 0.0;
  double lml = 0.0;
};

/// -1/2 y^T alpha - sum log L_ii - n/2 log 2 pi.
inline double log_marginal_likelihood(const FittedGP& fitted) {
  const auto n = static_cast<double>(fitted.dataset.size());
  return -0.5 * fitted.dataset.y.dot(fitted.alpha) -
         fitted.chol.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

inline FittedGP fit(const Dataset& dataset, const Hyperparameters& hyper) {
  detail::require_valid(hyper);
  FittedGP f{dataset, hyper, {}, {}, 0.0, 0.0};
  CholeskyFactor factor = robust_cholesky(covariance_matrix(dataset.X, hyper, true));
  f.chol = std::move(factor.L);
  f.jitter = factor.jitter;
  const Eigen::MatrixXd& chol = f.chol;
  const auto L = chol.triangularView<Eigen::Lower>();
  f.alpha = L.transpose().solve(L.solve(dataset.y));
  f.lml = log_marginal_likelihood(f);
  return f;
}

namespace detail {

inline Eigen::Vector3d lml_gradient_with(const FittedGP& fitted, const KernelGradients& dK) {
  const Eigen::Index n = fitted.dataset.size();
  const Eigen::MatrixXd& chol = fitted.chol;
  const Eigen::MatrixXd L_inv = chol.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
  // Lower triangle of K^-1 = L^-T L^-1; the gradient matrices are symmetric.
  Eigen::MatrixXd K_inv = Eigen::MatrixXd::Zero(n, n);
  K_inv.selfadjointView<Eigen::Lower>().rankUpdate(L_inv.transpose());
  const Eigen::VectorXd& a = fitted.alpha;

  auto trace_product = [&](const Eigen::MatrixXd& D) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      acc += 0.5 * K_inv(j, j) * D(j, j);
      acc += K_inv.col(j).tail(n - j - 1).dot(D.col(j).tail(n - j - 1));
    }
    return 2.0 * acc;
  };
  auto component = [&](const Eigen::MatrixXd& D) {
    return 0.5 * (a.dot(D * a) - trace_product(D));
  };
  const double sn2 = fitted.hyper.noise_variance();
  return {component(dK.d_log_lengthscale), component(dK.d_log_signal_variance),
          0.5 * sn2 * (a.squaredNorm() - K_inv.diagonal().sum())};
}

}  // namespace detail

/// Gradient of the log marginal likelihood with respect to the log-domain
/// hyperparameters: 1/2 tr((alpha alpha^T - K^-1) dK/dtheta).
inline Eigen::Vector3d lml_gradient(const FittedGP& fitted) {
  return detail::lml_gradient_with(fitted, kernel_gradients(fitted.dataset.X, fitted.hyper));
}

/// Raised when every optimizer restart fails; carries one line per restart.
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, std::vector<std::string> diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  [[nodiscard]] const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct OptimizerOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;  // infinity norm
  double max_step = 2.0;             // cap on a single step, log units
  /// Stop once an accepted step improves the objective by less than this
  /// fraction of its magnitude (round-off dominates the gradient there).
  double relative_decrease_tolerance = 2.2e-9;
  /// Upper bound on sigma_n^2 relative to the variance of the training
  /// targets; infinity leaves the noise free.
  double max_noise_ratio = std::numeric_limits<double>::infinity();
};

struct RestartDiagnostic {
  Hyperparameters start;
  Hyperparameters result;
  double start_lml = -std::numeric_limits<double>::infinity();
  double final_lml = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;  // gradient criterion met
  bool stalled = false;    // stopped on relative decrease or a failed line search
  std::string error;
};

struct OptimizationResult {
  Hyperparameters best;
  double best_lml = -std::numeric_limits<double>::infinity();
  std::vector<RestartDiagnostic> restarts;
};

namespace detail {

// The optimizer works on z = (log l, log sigma_f^2, u) with
// u = log(sigma_n^2 / sigma_f^2). Two linear constraints a_i . z <= b_i keep
// the noise between the floor (u >= log kNoiseFloorRatio) and the ceiling
// (z_1 + u <= log(max_noise_ratio * var(y))).
struct SearchConstraints {
  Eigen::Matrix<double, 2, 3> A;
  Eigen::Vector2d b;
};

inline SearchConstraints search_constraints(const Dataset& data, const OptimizerOptions& opt) {
  const double n = static_cast<double>(data.y.size());
  const double var = n > 0 ? (data.y.array() - data.y.mean()).square().sum() / n : 0.0;
  const double ref = var > 0.0 && std::isfinite(var) ? var : 1.0;
  SearchConstraints c;
  c.A << 0.0, 0.0, -1.0, 0.0, 1.0, 1.0;
  c.b << -std::log(kNoiseFloorRatio), std::log(opt.max_noise_ratio * ref);
  return c;
}

inline Eigen::Vector3d to_search_space(const Hyperparameters& h, const SearchConstraints& c) {
  const double lo = -c.b[0], ceiling = c.b[1];
  Eigen::Vector3d z{h.log_lengthscale, h.log_signal_variance,
                    std::max(lo, h.log_noise_variance - h.log_signal_variance)};
  if (z[1] + z[2] > ceiling) z[2] = std::max(lo, ceiling - z[1]);
  if (z[1] + z[2] > ceiling) z[1] = ceiling - z[2];
  return z;
}

inline Hyperparameters from_search_space(const Eigen::Vector3d& z) {
  return {z[0], z[1], z[1] + z[2]};
}

struct Evaluation {
  FittedGP fitted;
  Eigen::Vector3d z;
};

inline Evaluation evaluate_at(const Dataset& data, const Eigen::Vector3d& z) {
  const Hyperparameters h = from_search_space(z);
  if (!h.valid()) throw NumericalError("hyperparameters overflow");
  Evaluation e{fit(data, h), z};
  if (!std::isfinite(e.fitted.lml)) throw NumericalError("non-finite marginal likelihood");
  return e;
}

// Gradient of -lml in search coordinates.
inline Eigen::Vector3d objective_gradient(const Evaluation& e) {
  const Eigen::Vector3d g = lml_gradient(e.fitted);
  if (!g.allFinite()) throw NumericalError("non-finite marginal likelihood gradient");
  return {-g[0], -(g[1] + g[2]), -g[2]};
}

inline bool at_bound(const SearchConstraints& c, const Eigen::Vector3d& z, int i) {
  return c.A.row(i).dot(z) >= c.b[i] - 1e-10 * (1.0 + std::abs(c.b[i]));
}

// Quasi-Newton direction -P g restricted to the best face of the feasible
// cone at z, with P the H-metric projector onto that face. Faces are the
// subsets of constraints currently at their bound; the face whose step is
// feasible and promises the largest decrease wins.
inline Eigen::Vector3d constrained_direction(const SearchConstraints& c, const Eigen::Vector3d& z,
                                             const Eigen::Vector3d& g, const Eigen::Matrix3d& H) {
  std::vector<int> bound;
  for (int i = 0; i < 2; ++i)
    if (at_bound(c, z, i)) bound.push_back(i);
  Eigen::Vector3d best = Eigen::Vector3d::Zero();
  double best_gain = 0.0;
  for (unsigned mask = 0; mask < (1u << bound.size()); ++mask) {
    Eigen::MatrixXd As(0, 3);
    for (std::size_t k = 0; k < bound.size(); ++k)
      if (mask & (1u << k)) {
        As.conservativeResize(As.rows() + 1, 3);
        As.row(As.rows() - 1) = c.A.row(bound[k]);
      }
    Eigen::Vector3d p = -H * g;
    if (As.rows() > 0) {
      const Eigen::MatrixXd AH = As * H;
      p += AH.transpose() * (AH * As.transpose()).ldlt().solve(AH * g);
    }
    bool feasible = true;
    for (int i : bound) feasible = feasible && c.A.row(i).dot(p) <= 1e-12 * p.norm();
    const double gain = -g.dot(p);
    if (feasible && gain > best_gain) {
      best_gain = gain;
      best = p;
    }
  }
  return best;
}

// Largest t with z + t p feasible.
inline double max_feasible_step(const SearchConstraints& c, const Eigen::Vector3d& z, const Eigen::Vector3d& p) {
  double t = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 2; ++i) {
    const double ap = c.A.row(i).dot(p);
    // Directions tangent to a face (up to round-off) do not leave it.
    if (ap > 1e-12 * p.norm()) t = std::min(t, std::max(0.0, (c.b[i] - c.A.row(i).dot(z)) / ap));
  }
  return t;
}

inline double median_pairwise_distance(const Points& X) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(X.rows() * (X.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = i + 1; j < X.rows(); ++j) d.push_back((X.row(i) - X.row(j)).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

// Active-set BFGS with a backtracking Armijo search. Trial points only need
// the likelihood; the gradient is formed once a step is accepted.
inline RestartDiagnostic bfgs(const Dataset& data, const Hyperparameters& start,
                              const OptimizerOptions& opt) {
  const SearchConstraints cons = search_constraints(data, opt);

  RestartDiagnostic diag;
  Evaluation cur = evaluate_at(data, to_search_space(start, cons));
  Eigen::Vector3d grad = objective_gradient(cur);
  diag.start = cur.fitted.hyper;
  diag.start_lml = cur.fitted.lml;

  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
  bool scaled = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const Eigen::Vector3d pg = -constrained_direction(cons, cur.z, grad, Eigen::Matrix3d::Identity());
    if (pg.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      diag.converged = true;
      break;
    }

    Eigen::Vector3d p = constrained_direction(cons, cur.z, grad, H);
    if (!(p.dot(grad) < 0.0)) {
      H.setIdentity();
      p = -pg;
    }
    const double pmax = p.lpNorm<Eigen::Infinity>();
    if (pmax > opt.max_step) p *= opt.max_step / pmax;
    const double t_max = max_feasible_step(cons, cur.z, p);

    std::optional<Evaluation> next;
    for (int k = 0; k < 40 && !next; ++k) {
      Eigen::Vector3d z = cur.z + std::min(std::ldexp(1.0, -k), t_max) * p;
      z[2] = std::max(z[2], -cons.b[0]);
      try {
        Evaluation trial = evaluate_at(data, z);
        if (-trial.fitted.lml <= -cur.fitted.lml + 1e-4 * grad.dot(z - cur.z))
          next = std::move(trial);
      } catch (const NumericalError&) {
      }
    }
    if (!next) {
      diag.stalled = true;
      break;
    }

    Eigen::Vector3d next_grad;
    try {
      next_grad = objective_gradient(*next);
    } catch (const NumericalError&) {
      diag.stalled = true;
      break;
    }
    const double f_old = -cur.fitted.lml, f_new = -next->fitted.lml;
    const bool flat = (f_old - f_new) <=
                      opt.relative_decrease_tolerance * std::max({std::abs(f_old), std::abs(f_new), 1.0});
    const Eigen::Vector3d s = next->z - cur.z;
    const Eigen::Vector3d yv = next_grad - grad;
    cur = std::move(*next);
    grad = next_grad;
    const double sy = s.dot(yv);
    if (sy > 1e-12) {
      if (!scaled) {
        H = Eigen::Matrix3d::Identity() * (sy / yv.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
      H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) +
          rho * s * s.transpose();
    }
    if (flat) {
      diag.stalled = true;
      ++it;
      break;
    }
  }
  diag.iterations = it;
  diag.result = cur.fitted.hyper;
  diag.final_lml = cur.fitted.lml;
  return diag;
}

}  // namespace detail

/// Multi-start quasi-Newton maximization of the log marginal likelihood,
/// keeping every restart's diagnostics. The first start is data-driven; the
/// rest are uniform offsets in [-3, 3]^3 around it drawn from `seed`.
inline OptimizationResult optimize_hyperparameters_detailed(const Dataset& dataset, int restarts,
                                                            std::uint64_t seed,
                                                            const OptimizerOptions& opt = {}) {
  if (restarts < 1) throw std::invalid_argument("optimize_hyperparameters: restarts must be >= 1");
  const Hyperparameters first{std::log(detail::median_pairwise_distance(dataset.X)), 0.0,
                              std::log(1e-3)};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset(-3.0, 3.0);

  OptimizationResult out;
  for (int r = 0; r < restarts; ++r) {
    Hyperparameters start = first;
    if (r > 0) {
      start.log_lengthscale += offset(rng);
      start.log_signal_variance += offset(rng);
      start.log_noise_variance += offset(rng);
    }
    RestartDiagnostic diag;
    try {
      diag = detail::bfgs(dataset, start, opt);
    } catch (const std::exception& e) {
      diag.start = start;
      diag.error = e.what();
    }
    if (diag.error.empty() && diag.final_lml > out.best_lml) {
      out.best_lml = diag.final_lml;
      out.best = diag.result;
    }
    out.restarts.push_back(std::move(diag));
  }
  if (!std::isfinite(out.best_lml)) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < out.restarts.size(); ++i) {
      std::ostringstream os;
      os << "restart " << i << ": " << out.restarts[i].error;
      lines.push_back(os.str());
    }
    throw OptimizationError("all optimizer restarts failed", std::move(lines));
  }
  return out;
}

inline Hyperparameters optimize_hyperparameters(const Dataset& dataset, int restarts,
                                                std::uint64_t seed, const OptimizerOptions& opt = {}) {
  return optimize_hyperparameters_detailed(dataset, restarts, seed, opt).best;
}

struct PredictiveDistribution {
  Points grid;
  Eigen::VectorXd mean;  // original target units
  Eigen::MatrixXd cov;   // original target variance units

  [[nodiscard]] Eigen::VectorXd stddev() const { return cov.diagonal().array().sqrt(); }
};

/// Joint posterior of the latent function on `grid`, mapped back to the
/// original target scale.
inline PredictiveDistribution predict(const FittedGP& fitted, const Points& grid) {
  if (grid.rows() == 0) throw std::invalid_argument("predict: empty grid");
  if (grid.cols() != fitted.dataset.dim())
    throw std::invalid_argument("predict: grid dimension does not match the training inputs");

  const Eigen::MatrixXd Ks = covariance_matrix(fitted.dataset.X, grid, fitted.hyper, false);
  const Eigen::MatrixXd V = fitted.chol.triangularView<Eigen::Lower>().solve(Ks);

  PredictiveDistribution p;
  p.grid = grid;
  const double s = fitted.dataset.y_std;
  // Column-wise dots keep each mean independent of the other grid points.
  p.mean.resize(grid.rows());
  for (Eigen::Index j = 0; j < grid.rows(); ++j)
    p.mean[j] = Ks.col(j).dot(fitted.alpha) * s + fitted.dataset.y_mean;

  Eigen::MatrixXd cov = covariance_matrix(grid, fitted.hyper, false);
  cov.noalias() -= V.transpose() * V;
  cov = 0.5 * (cov + cov.transpose()).eval();
  // Round-off can leave tiny negative variances where the grid hits data.
  cov.diagonal() = cov.diagonal().cwiseMax(0.0);
  p.cov = cov * (s * s);
  return p;
}

}  // namespace gpsim
