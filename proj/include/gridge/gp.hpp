#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "gridge/errors.hpp"

namespace gridge {

/// Squared-exponential kernel hyperparameters, stored on log scale so the
/// exponentiated values are positive by construction.
struct GpHyperparameters {
  double log_signal_variance = 0.0;
  double log_noise_variance = 0.0;
  Eigen::VectorXd log_correlation_lengths;

  /// All-zero log-hyperparameters (signal/noise variance and lengths = 1).
  static GpHyperparameters zeros(Eigen::Index m);

  double signal_variance() const { return std::exp(log_signal_variance); }
  double noise_variance() const { return std::exp(log_noise_variance); }
  Eigen::VectorXd correlation_lengths() const {
    return log_correlation_lengths.array().exp();
  }
  Eigen::Index input_dim() const { return log_correlation_lengths.size(); }

  /// Packs as [log sigma_f^2, log sigma_n^2, log l_1, ..., log l_m].
  Eigen::VectorXd to_vector() const;
  static GpHyperparameters from_vector(const Eigen::VectorXd& v);

  void validate() const;
};

/// Frozen outcome of a GP training solve. Immutable; safe to share.
struct TrainedGp {
  Eigen::MatrixXd reduced_inputs;    // N x m
  Eigen::VectorXd outputs;           // N
  GpHyperparameters hyperparameters;
  Eigen::VectorXd coefficient_vector;  // beta = (K + sigma_n^2 I)^-1 f
  Eigen::MatrixXd cholesky_factor;     // lower L, L L^T = K + sigma_n^2 I (+ jitter)
  double jitter = 0.0;

  Eigen::Index train_count() const { return reduced_inputs.rows(); }
  Eigen::Index input_dim() const { return reduced_inputs.cols(); }
};

struct LogMarginalLikelihood {
  double value = 0.0;
  /// d(log p)/d[log sigma_f^2, log sigma_n^2, log l_1..log l_m].
  Eigen::VectorXd gradient;
};

struct HyperOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double initial_step = 1.0;
  double contraction = 0.5;
  double sufficient_decrease = 1e-4;
  /// sigma_n^2 is kept >= this during optimization so the factorization
  /// stays finite.
  double noise_floor = 1e-12;
};

struct HyperOptResult {
  GpHyperparameters hyperparameters;
  double log_likelihood = 0.0;
  int iterations = 0;
  /// Set when no line search succeeded at the starting point; the result
  /// then equals the starting hyperparameters.
  bool line_search_failed = false;
};

/// k(u, v) = sigma_f^2 exp(-1/2 (u-v)^T Gamma^-1 (u-v)) with
/// Gamma = diag(l_1^2, ..., l_m^2).
double kernel_eval(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                   const GpHyperparameters& theta);

/// Entrywise kernel between the rows of two coordinate matrices.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& ua,
                              const Eigen::MatrixXd& ub,
                              const GpHyperparameters& theta);

/// Cholesky-factors K + sigma_n^2 I and solves for beta. Jitter starts at
/// zero and escalates to at most 1e-4 * mean(diag K) before failing with
/// FactorizationError.
TrainedGp train_gp(const Eigen::MatrixXd& u, const Eigen::VectorXd& f,
                   const GpHyperparameters& theta);

double posterior_mean(const Eigen::VectorXd& u, const TrainedGp& gp);

/// Posterior means at many points (rows of u).
Eigen::VectorXd posterior_mean_batch(const Eigen::MatrixXd& u,
                                     const TrainedGp& gp);

/// k(u,u) - k(u,U)^T (K + sigma_n^2 I)^-1 k(u,U), clamped to 0 when
/// round-off produces a value in [-1e-10, 0).
double posterior_variance(const Eigen::VectorXd& u, const TrainedGp& gp);

Eigen::VectorXd posterior_variance_batch(const Eigen::MatrixXd& u,
                                         const TrainedGp& gp);

/// Analytic gradient of the posterior mean with respect to the reduced
/// coordinates: -Gamma^-1 sum_i (u - u_i) k(u, u_i) beta_i.
Eigen::VectorXd posterior_mean_grad_u(const Eigen::VectorXd& u,
                                      const TrainedGp& gp);

/// Row i holds the coordinate gradient of the posterior mean at row i of u.
Eigen::MatrixXd posterior_mean_grad_batch(const Eigen::MatrixXd& u,
                                          const TrainedGp& gp);

/// log p = -1/2 f^T (K + sigma_n^2 I)^-1 f - 1/2 log|K + sigma_n^2 I|
///         - N/2 log(2 pi), with its analytic log-scale gradient.
LogMarginalLikelihood log_marginal_likelihood(const GpHyperparameters& theta,
                                              const Eigen::MatrixXd& u,
                                              const Eigen::VectorXd& f);

/// Maximizes the log marginal likelihood by Polak-Ribiere nonlinear CG on
/// the log-hyperparameters. The returned likelihood never falls below the
/// starting value.
HyperOptResult optimize_hyperparameters(const Eigen::MatrixXd& u,
                                        const Eigen::VectorXd& f,
                                        const GpHyperparameters& theta0,
                                        const HyperOptions& opts = {});

}  // namespace gridge
