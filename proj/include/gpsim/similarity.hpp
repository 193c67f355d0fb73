#pragma once

// Weighted-sum distance between two GP predictive distributions evaluated on
// the same grid:
//
//   total = eps1 * d1(T(mu_f), mu_g; delta)
//         + eps2 * d2(cov_f, cov_g)
//         + (1 - eps1 - eps2) * (1 - rho(mu_f, mu_g))
//
// where T(mu) = a * mu + b is the least-squares fit of mu_f onto mu_g with
// a > 0. The measure is directional: f is aligned onto g.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "gpsim/gp.hpp"

namespace gpsim {

/// Raised when the inputs make a distance undefined (e.g. zero value range).
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class D1Variant { avg_relative_distance, p_norm, fraction_differing };
enum class D2Variant { none, entrywise_frobenius, entrywise_max };

/// Smallest admissible slope of the affine alignment.
inline constexpr double kMinAffineSlope = 1e-8;

struct MeasureConfig {
  double eps1 = 0.25;
  double eps2 = 0.0;
  double delta = 0.0;
  D1Variant d1_variant = D1Variant::avg_relative_distance;
  double p = 2.0;  // used by D1Variant::p_norm
  D2Variant d2_variant = D2Variant::none;

  [[nodiscard]] double rho_weight() const { return 1.0 - eps1 - eps2; }

  void validate() const {
    if (!(eps1 >= 0.0 && eps1 <= 1.0) || !(eps2 >= 0.0 && eps2 <= 1.0))
      throw std::invalid_argument("MeasureConfig: weights must lie in [0, 1]");
    if (eps1 + eps2 > 1.0) throw std::invalid_argument("MeasureConfig: eps1 + eps2 must be <= 1");
    if (!(delta >= 0.0)) throw std::invalid_argument("MeasureConfig: delta must be >= 0");
    if (d1_variant == D1Variant::p_norm && !(p >= 1.0))
      throw std::invalid_argument("MeasureConfig: p-norm requires p >= 1");
    if (eps2 > 0.0 && d2_variant == D2Variant::none)
      throw std::invalid_argument("MeasureConfig: eps2 > 0 needs a covariance distance variant");
  }
};

struct AffineTransform {
  double a = 1.0;
  double b = 0.0;
  bool clamped = false;

  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& mu) const {
    return (a * mu.array() + b).matrix();
  }
};

struct SimilarityReport {
  AffineTransform transform;
  double d1_raw = 0.0;
  double d2_raw = 0.0;
  double rho = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
  double total = 0.0;
  bool degenerate_rho = false;
};

namespace detail {

inline void require_pair(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const char* who) {
  if (u.size() != v.size())
    throw std::invalid_argument(std::string(who) + ": vectors differ in length");
  if (u.size() < 2) throw std::invalid_argument(std::string(who) + ": need at least two entries");
}

inline bool is_constant(const Eigen::VectorXd& v) { return v.maxCoeff() == v.minCoeff(); }

}  // namespace detail

/// Least-squares a, b with a*mu_f + b ~ mu_g. A non-positive (or undefined)
/// slope is replaced by kMinAffineSlope and flagged.
inline AffineTransform fit_affine_transform(const Eigen::VectorXd& mu_f, const Eigen::VectorXd& mu_g) {
  detail::require_pair(mu_f, mu_g, "fit_affine_transform");
  const double mf = mu_f.mean(), mg = mu_g.mean();
  AffineTransform t;
  double a = 0.0;
  if (!detail::is_constant(mu_f)) {
    const Eigen::ArrayXd cf = mu_f.array() - mf;
    a = (cf * (mu_g.array() - mg)).sum() / cf.square().sum();
  }
  if (a > 0.0) {
    t.a = a;
  } else {
    t.a = kMinAffineSlope;
    t.clamped = true;
  }
  t.b = mg - t.a * mf;
  return t;
}

/// Distance between the aligned mean and the target mean, ignoring residuals
/// that do not exceed `delta`.
inline double mean_distance_d1(const Eigen::VectorXd& t_mu_f, const Eigen::VectorXd& mu_g,
                               D1Variant variant, double delta, double p = 2.0) {
  detail::require_pair(t_mu_f, mu_g, "mean_distance_d1");
  const Eigen::ArrayXd r = (t_mu_f - mu_g).array().abs();
  const Eigen::Array<bool, Eigen::Dynamic, 1> mask = r > delta;
  const auto count = static_cast<double>(mask.count());

  switch (variant) {
    case D1Variant::avg_relative_distance: {
      const double hi = std::max(t_mu_f.maxCoeff(), mu_g.maxCoeff());
      const double lo = std::min(t_mu_f.minCoeff(), mu_g.minCoeff());
      if (!(hi > lo))
        throw DegenerateInputError("mean_distance_d1: both mean vectors collapse to one value");
      if (count == 0.0) return 0.0;
      return mask.select(r, 0.0).sum() / count / (hi - lo);
    }
    case D1Variant::p_norm: {
      if (!(p >= 1.0)) throw std::invalid_argument("mean_distance_d1: p must be >= 1");
      if (count == 0.0) return 0.0;
      return std::pow(mask.select(r.pow(p), 0.0).sum(), 1.0 / p);
    }
    case D1Variant::fraction_differing:
      return count / static_cast<double>(r.size());
  }
  throw std::invalid_argument("mean_distance_d1: unknown variant");
}

struct PearsonResult {
  double rho = 0.0;
  bool degenerate = false;
};

/// Sample Pearson correlation; a constant input yields rho = 0 flagged as degenerate.
inline PearsonResult pearson(const Eigen::VectorXd& mu_f, const Eigen::VectorXd& mu_g) {
  detail::require_pair(mu_f, mu_g, "pearson");
  if (detail::is_constant(mu_f) || detail::is_constant(mu_g)) return {0.0, true};
  const Eigen::ArrayXd cf = mu_f.array() - mu_f.mean();
  const Eigen::ArrayXd cg = mu_g.array() - mu_g.mean();
  const double denom = std::sqrt(cf.square().sum()) * std::sqrt(cg.square().sum());
  if (!(denom > 0.0)) return {0.0, true};
  return {std::clamp((cf * cg).sum() / denom, -1.0, 1.0), false};
}

/// Entrywise matrix distance between two predictive covariances.
inline double covariance_distance_d2(const Eigen::MatrixXd& cov_f, const Eigen::MatrixXd& cov_g,
                                     D2Variant variant) {
  if (cov_f.rows() != cov_g.rows() || cov_f.cols() != cov_g.cols())
    throw std::invalid_argument("covariance_distance_d2: shape mismatch");
  if (cov_f.size() == 0) throw std::invalid_argument("covariance_distance_d2: empty matrices");
  const Eigen::MatrixXd diff = cov_f - cov_g;
  switch (variant) {
    case D2Variant::entrywise_frobenius:
      return diff.norm() / static_cast<double>(cov_f.rows());
    case D2Variant::entrywise_max:
      return diff.cwiseAbs().maxCoeff();
    case D2Variant::none:
      break;
  }
  throw std::invalid_argument("covariance_distance_d2: a concrete variant is required");
}

/// Fills s1, s2, s3 and total from the raw d1, d2 and rho of `r`.
inline void assemble_weighted_sum(SimilarityReport& r, const MeasureConfig& config) {
  r.s1 = config.eps1 * r.d1_raw;
  r.s2 = config.eps2 * r.d2_raw;
  r.s3 = config.rho_weight() * (1.0 - r.rho);
  r.total = r.s1 + r.s2 + r.s3;
}

/// Measure on raw mean vectors and covariances (grids already known to match).
inline SimilarityReport similarity(const Eigen::VectorXd& mean_f, const Eigen::MatrixXd& cov_f,
                                   const Eigen::VectorXd& mean_g, const Eigen::MatrixXd& cov_g,
                                   const MeasureConfig& config) {
  config.validate();
  SimilarityReport r;
  r.transform = fit_affine_transform(mean_f, mean_g);
  r.d1_raw = mean_distance_d1(r.transform.apply(mean_f), mean_g, config.d1_variant, config.delta,
                              config.p);
  const PearsonResult pr = pearson(mean_f, mean_g);
  r.rho = pr.rho;
  r.degenerate_rho = pr.degenerate;
  if (config.eps2 > 0.0) r.d2_raw = covariance_distance_d2(cov_f, cov_g, config.d2_variant);
  assemble_weighted_sum(r, config);
  return r;
}

/// Distance of f from g. Both distributions must live on the identical grid.
inline SimilarityReport similarity(const PredictiveDistribution& pred_f,
                                   const PredictiveDistribution& pred_g, const MeasureConfig& config) {
  if (pred_f.grid.rows() != pred_g.grid.rows() || pred_f.grid.cols() != pred_g.grid.cols() ||
      (pred_f.grid.array() != pred_g.grid.array()).any())
    throw std::invalid_argument("similarity: predictive distributions are on different grids");
  return similarity(pred_f.mean, pred_f.cov, pred_g.mean, pred_g.cov, config);
}

inline std::string_view to_string(D1Variant v) {
  switch (v) {
    case D1Variant::avg_relative_distance: return "avg_relative_distance";
    case D1Variant::p_norm: return "p_norm";
    case D1Variant::fraction_differing: return "fraction_differing";
  }
  return "?";
}

inline std::string_view to_string(D2Variant v) {
  switch (v) {
    case D2Variant::none: return "none";
    case D2Variant::entrywise_frobenius: return "entrywise_frobenius";
    case D2Variant::entrywise_max: return "entrywise_max";
  }
  return "?";
}

/// Parses "avg_relative_distance", "fraction_differing", "p_norm" or "p_norm:<p>".
inline void parse_d1_variant(std::string_view text, MeasureConfig& config) {
  if (text == "avg_relative_distance") {
    config.d1_variant = D1Variant::avg_relative_distance;
  } else if (text == "fraction_differing") {
    config.d1_variant = D1Variant::fraction_differing;
  } else if (text.starts_with("p_norm")) {
    config.d1_variant = D1Variant::p_norm;
    if (text.size() > 6) {
      if (text[6] != ':') throw std::invalid_argument("unknown d1 variant: " + std::string(text));
      config.p = std::stod(std::string(text.substr(7)));
    }
  } else {
    throw std::invalid_argument("unknown d1 variant: " + std::string(text));
  }
}

inline D2Variant parse_d2_variant(std::string_view text) {
  if (text == "none") return D2Variant::none;
  if (text == "entrywise_frobenius") return D2Variant::entrywise_frobenius;
  if (text == "entrywise_max") return D2Variant::entrywise_max;
  throw std::invalid_argument("unknown d2 variant: " + std::string(text));
}

}  // namespace gpsim
