#pragma once

// Squared-exponential covariance, covariance-matrix assembly and the
// per-hyperparameter derivative matrices consumed by the marginal-likelihood
// gradient. All hyperparameters live in the log domain.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gpsim {

/// Point lists are stored one point per row (n x d).
using Points = Eigen::MatrixXd;

/// Raised when a kernel matrix cannot be factorized even after jitter.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lower bound on the noise variance, relative to the signal variance.
inline constexpr double kNoiseFloorRatio = 1e-8;

struct Hyperparameters {
  double log_lengthscale = 0.0;
  double log_signal_variance = 0.0;
  double log_noise_variance = std::log(1e-3);

  static Hyperparameters from_natural(double lengthscale, double signal_variance,
                                      double noise_variance) {
    return {std::log(lengthscale), std::log(signal_variance), std::log(noise_variance)};
  }
  static Hyperparameters from_vector(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

  [[nodiscard]] Eigen::Vector3d as_vector() const {
    return {log_lengthscale, log_signal_variance, log_noise_variance};
  }

  [[nodiscard]] double lengthscale() const { return std::exp(log_lengthscale); }
  [[nodiscard]] double signal_variance() const { return std::exp(log_signal_variance); }
  [[nodiscard]] double noise_variance() const { return std::exp(log_noise_variance); }

  [[nodiscard]] bool noise_floor_active() const {
    return log_noise_variance < log_signal_variance + std::log(kNoiseFloorRatio);
  }

  /// Copy with the noise variance raised to the floor if it sits below it.
  [[nodiscard]] Hyperparameters with_noise_floor() const {
    Hyperparameters h = *this;
    if (h.noise_floor_active()) h.log_noise_variance = h.log_signal_variance + std::log(kNoiseFloorRatio);
    return h;
  }

  [[nodiscard]] bool valid() const {
    const double l = lengthscale(), sf2 = signal_variance(), sn2 = noise_variance();
    const bool positive = std::isfinite(l) && std::isfinite(sf2) && std::isfinite(sn2) && l > 0 &&
                          sf2 > 0 && sn2 > 0;
    // Small relative slack so that with_noise_floor() round-trips through exp/log.
    return positive && sn2 >= kNoiseFloorRatio * sf2 * (1.0 - 1e-12);
  }

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

namespace detail {

inline void require_valid(const Hyperparameters& h) {
  if (!h.valid())
    throw std::invalid_argument("hyperparameters must be finite, positive and respect the noise floor");
}

template <typename A, typename B>
double squared_distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  double r2 = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double diff = x(k) - y(k);
    r2 += diff * diff;
  }
  return r2;
}

}  // namespace detail

/// sigma_f^2 exp(-r^2 / (2 l^2)) plus sigma_n^2 when `same_point` is set.
template <typename A, typename B>
double se_covariance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& x_prime,
                     const Hyperparameters& hyper, bool same_point) {
  if (x.size() != x_prime.size() || x.size() == 0)
    throw std::invalid_argument("se_covariance: dimension mismatch");
  const double r2 = detail::squared_distance(x, x_prime);
  const double l2 = std::exp(2.0 * hyper.log_lengthscale);
  double k = hyper.signal_variance() * std::exp(-0.5 * r2 / l2);
  if (same_point) k += hyper.noise_variance();
  return k;
}

/// Cross-covariance K(X, X'). Noise may only be added when X and X' are the same point set.
inline Eigen::MatrixXd covariance_matrix(const Points& X, const Points& X_prime,
                                         const Hyperparameters& hyper, bool add_noise) {
  if (X.cols() != X_prime.cols())
    throw std::invalid_argument("covariance_matrix: point dimensions differ");
  if (add_noise && (X.rows() != X_prime.rows() || (X.array() != X_prime.array()).any()))
    throw std::invalid_argument("covariance_matrix: noise requires identical point sets");

  const double sf2 = hyper.signal_variance();
  const double inv_2l2 = 0.5 * std::exp(-2.0 * hyper.log_lengthscale);
  Eigen::MatrixXd K(X.rows(), X_prime.rows());
  for (Eigen::Index j = 0; j < X_prime.rows(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      K(i, j) = sf2 * std::exp(-detail::squared_distance(X.row(i), X_prime.row(j)) * inv_2l2);
  if (add_noise) K.diagonal().array() += hyper.noise_variance();
  return K;
}

/// Symmetric K(X, X); filled from one triangle so the result is exactly symmetric.
inline Eigen::MatrixXd covariance_matrix(const Points& X, const Hyperparameters& hyper,
                                         bool add_noise) {
  const double sf2 = hyper.signal_variance();
  const double inv_2l2 = 0.5 * std::exp(-2.0 * hyper.log_lengthscale);
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = sf2;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      K(i, j) = sf2 * std::exp(-detail::squared_distance(X.row(i), X.row(j)) * inv_2l2);
      K(j, i) = K(i, j);
    }
  }
  if (add_noise) K.diagonal().array() += hyper.noise_variance();
  return K;
}

/// dK/dtheta for theta in {log l, log sigma_f^2, log sigma_n^2}.
struct KernelGradients {
  Eigen::MatrixXd d_log_lengthscale;
  Eigen::MatrixXd d_log_signal_variance;
  Eigen::MatrixXd d_log_noise_variance;
};

inline KernelGradients kernel_gradients(const Points& X, const Hyperparameters& hyper) {
  const Eigen::Index n = X.rows();
  const double inv_l2 = std::exp(-2.0 * hyper.log_lengthscale);
  KernelGradients g;
  g.d_log_signal_variance = covariance_matrix(X, hyper, false);
  g.d_log_lengthscale.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    g.d_log_lengthscale(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double r2 = detail::squared_distance(X.row(i), X.row(j));
      g.d_log_lengthscale(i, j) = g.d_log_signal_variance(i, j) * r2 * inv_l2;
      g.d_log_lengthscale(j, i) = g.d_log_lengthscale(i, j);
    }
  }
  g.d_log_noise_variance = hyper.noise_variance() * Eigen::MatrixXd::Identity(n, n);
  return g;
}

/// Lower Cholesky factor plus whatever diagonal jitter was needed to obtain it.
struct CholeskyFactor {
  Eigen::MatrixXd L;
  double jitter = 0.0;
};

/// Factorizes a symmetric matrix, escalating diagonal jitter from 1e-10 to
/// 1e-4 times the mean diagonal (x10 per step) before giving up.
inline CholeskyFactor robust_cholesky(const Eigen::MatrixXd& K) {
  if (K.rows() != K.cols() || K.rows() == 0)
    throw std::invalid_argument("robust_cholesky: matrix must be square and non-empty");
  if (!K.allFinite()) throw NumericalError("robust_cholesky: matrix has non-finite entries");

  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};

  const double mean_diag = K.diagonal().mean();
  for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += rel * mean_diag;
    llt.compute(Kj);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), rel * mean_diag};
  }
  throw NumericalError("Cholesky factorization failed after jitter escalation to 1e-4 * mean(diag)");
}

}  // namespace gpsim
