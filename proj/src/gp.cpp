#include "gridge/gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace gridge {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_coords(const Eigen::MatrixXd& u, const GpHyperparameters& theta,
                  const char* what) {
  if (u.cols() != theta.input_dim()) {
    std::ostringstream msg;
    msg << what << ": coordinate dimension " << u.cols()
        << " does not match hyperparameter dimension " << theta.input_dim();
    throw DimensionError(msg.str());
  }
}

// Shared Cholesky with jitter escalation: try sigma_n^2 alone first, then
// 1e-10 * mean(diag K) growing tenfold up to 1e-4 * mean(diag K).
struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

Factorization factor_with_jitter(const Eigen::MatrixXd& k,
                                 double noise_variance) {
  const auto n = k.rows();
  const double diag_mean = k.diagonal().mean();
  Factorization out;
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += noise_variance + jitter;
    out.llt.compute(a);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = jitter;
      return out;
    }
    if (jitter == 0.0) {
      jitter = 1e-10 * diag_mean;
    } else if (jitter < 1e-4 * diag_mean) {
      jitter = std::min(jitter * 10.0, 1e-4 * diag_mean);
    } else {
      std::ostringstream msg;
      msg << "kernel matrix of size " << n
          << " not factorizable; final jitter tried = " << jitter;
      throw FactorizationError(msg.str());
    }
  }
}

}  // namespace

GpHyperparameters GpHyperparameters::zeros(Eigen::Index m) {
  GpHyperparameters theta;
  theta.log_correlation_lengths = Eigen::VectorXd::Zero(m);
  return theta;
}

Eigen::VectorXd GpHyperparameters::to_vector() const {
  Eigen::VectorXd v(input_dim() + 2);
  v(0) = log_signal_variance;
  v(1) = log_noise_variance;
  v.tail(input_dim()) = log_correlation_lengths;
  return v;
}

GpHyperparameters GpHyperparameters::from_vector(const Eigen::VectorXd& v) {
  if (v.size() < 3) {
    throw DimensionError("hyperparameter vector needs at least 3 entries");
  }
  GpHyperparameters theta;
  theta.log_signal_variance = v(0);
  theta.log_noise_variance = v(1);
  theta.log_correlation_lengths = v.tail(v.size() - 2);
  return theta;
}

void GpHyperparameters::validate() const {
  if (log_correlation_lengths.size() < 1) {
    throw DimensionError("at least one correlation length required");
  }
  if (!std::isfinite(log_signal_variance) ||
      !std::isfinite(log_noise_variance) ||
      !log_correlation_lengths.allFinite()) {
    throw NumericalError("hyperparameters must be finite");
  }
}

double kernel_eval(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                   const GpHyperparameters& theta) {
  if (u.size() != v.size() || u.size() != theta.input_dim()) {
    throw DimensionError("kernel_eval: coordinate lengths do not match");
  }
  const Eigen::ArrayXd inv_l2 =
      (-2.0 * theta.log_correlation_lengths.array()).exp();
  const double q = ((u - v).array().square() * inv_l2).sum();
  return theta.signal_variance() * std::exp(-0.5 * q);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& ua,
                              const Eigen::MatrixXd& ub,
                              const GpHyperparameters& theta) {
  check_coords(ua, theta, "kernel_matrix");
  check_coords(ub, theta, "kernel_matrix");
  const auto na = ua.rows();
  const auto nb = ub.rows();
  const auto m = ua.cols();
  const Eigen::ArrayXd inv_l2 =
      (-2.0 * theta.log_correlation_lengths.array()).exp();
  const double sf2 = theta.signal_variance();

  Eigen::MatrixXd k(na, nb);
  const bool same = (&ua == &ub);
  for (Eigen::Index j = 0; j < nb; ++j) {
    const Eigen::Index i0 = same ? j : 0;
    for (Eigen::Index i = i0; i < na; ++i) {
      double q = 0.0;
      for (Eigen::Index c = 0; c < m; ++c) {
        const double diff = ua(i, c) - ub(j, c);
        q += diff * diff * inv_l2(c);
      }
      k(i, j) = sf2 * std::exp(-0.5 * q);
      if (same && i != j) k(j, i) = k(i, j);
    }
  }
  return k;
}

TrainedGp train_gp(const Eigen::MatrixXd& u, const Eigen::VectorXd& f,
                   const GpHyperparameters& theta) {
  theta.validate();
  check_coords(u, theta, "train_gp");
  if (u.rows() < 1) throw SizeError("train_gp needs at least one point");
  if (f.size() != u.rows()) {
    throw DimensionError("train_gp: output length does not match inputs");
  }
  if (!u.allFinite() || !f.allFinite()) {
    throw NumericalError("train_gp: non-finite entries in training data");
  }

  const Eigen::MatrixXd k = kernel_matrix(u, u, theta);
  Factorization fac = factor_with_jitter(k, theta.noise_variance());

  TrainedGp gp;
  gp.reduced_inputs = u;
  gp.outputs = f;
  gp.hyperparameters = theta;
  gp.coefficient_vector = fac.llt.solve(f);
  gp.cholesky_factor = fac.llt.matrixL();
  gp.jitter = fac.jitter;
  return gp;
}

double posterior_mean(const Eigen::VectorXd& u, const TrainedGp& gp) {
  return posterior_mean_batch(u.transpose(), gp)(0);
}

Eigen::VectorXd posterior_mean_batch(const Eigen::MatrixXd& u,
                                     const TrainedGp& gp) {
  const Eigen::MatrixXd kx =
      kernel_matrix(u, gp.reduced_inputs, gp.hyperparameters);
  return kx * gp.coefficient_vector;
}

double posterior_variance(const Eigen::VectorXd& u, const TrainedGp& gp) {
  return posterior_variance_batch(u.transpose(), gp)(0);
}

Eigen::VectorXd posterior_variance_batch(const Eigen::MatrixXd& u,
                                         const TrainedGp& gp) {
  const Eigen::MatrixXd kx =
      kernel_matrix(u, gp.reduced_inputs, gp.hyperparameters);
  // v = L^-1 k(U, Uhat)^T, one triangular solve for all points.
  Eigen::MatrixXd v = kx.transpose();
  gp.cholesky_factor.triangularView<Eigen::Lower>().solveInPlace(v);
  const double sf2 = gp.hyperparameters.signal_variance();
  Eigen::VectorXd var =
      (sf2 - v.colwise().squaredNorm().array()).matrix();
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    if (var(i) < -1e-10) {
      std::ostringstream msg;
      msg << "posterior variance " << var(i)
          << " below the round-off clamp; factorization is broken";
      throw NumericalError(msg.str());
    }
    if (var(i) < 0.0) var(i) = 0.0;
  }
  return var;
}

Eigen::VectorXd posterior_mean_grad_u(const Eigen::VectorXd& u,
                                      const TrainedGp& gp) {
  return posterior_mean_grad_batch(u.transpose(), gp).row(0);
}

Eigen::MatrixXd posterior_mean_grad_batch(const Eigen::MatrixXd& u,
                                          const TrainedGp& gp) {
  const Eigen::MatrixXd kx =
      kernel_matrix(u, gp.reduced_inputs, gp.hyperparameters);
  // w_ij = k(u_i, uhat_j) beta_j; grad_i = -Gamma^-1 (u_i sum_j w_ij
  //        - sum_j w_ij uhat_j).
  const Eigen::MatrixXd w =
      kx.array().rowwise() * gp.coefficient_vector.transpose().array();
  const Eigen::VectorXd row_sums = w.rowwise().sum();
  const Eigen::MatrixXd weighted = w * gp.reduced_inputs;
  const Eigen::ArrayXd inv_l2 =
      (-2.0 * gp.hyperparameters.log_correlation_lengths.array()).exp();
  Eigen::MatrixXd grad =
      (u.array().colwise() * row_sums.array()).matrix() - weighted;
  grad = -(grad.array().rowwise() * inv_l2.transpose()).matrix();
  return grad;
}

LogMarginalLikelihood log_marginal_likelihood(const GpHyperparameters& theta,
                                              const Eigen::MatrixXd& u,
                                              const Eigen::VectorXd& f) {
  theta.validate();
  check_coords(u, theta, "log_marginal_likelihood");
  if (f.size() != u.rows()) {
    throw DimensionError("log_marginal_likelihood: output length mismatch");
  }
  const auto n = u.rows();
  const auto m = u.cols();

  const Eigen::MatrixXd k = kernel_matrix(u, u, theta);
  Factorization fac = factor_with_jitter(k, theta.noise_variance());
  const Eigen::VectorXd alpha = fac.llt.solve(f);

  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    logdet += std::log(fac.llt.matrixLLT()(i, i));
  }
  LogMarginalLikelihood out;
  out.value = -0.5 * f.dot(alpha) - logdet -
              0.5 * static_cast<double>(n) * std::log(kTwoPi);

  // Gradient via d(log p)/d theta_j = 1/2 tr((alpha alpha^T - A^-1) dA/d
  // theta_j). dA/d(log sf2) = K + jitter I (the jitter scales with sf2);
  // dA/d(log sn2) = sn2 I; dA/d(log l_c) = K .* sqdist_c / l_c^2.
  const Eigen::MatrixXd a_inv =
      fac.llt.solve(Eigen::MatrixXd::Identity(n, n));
  out.gradient.resize(m + 2);

  Eigen::MatrixXd b = k;
  b.diagonal().array() += fac.jitter;
  out.gradient(0) =
      0.5 * (alpha.dot(b * alpha) - a_inv.cwiseProduct(b).sum());
  const double sn2 = theta.noise_variance();
  out.gradient(1) = 0.5 * sn2 * (alpha.squaredNorm() - a_inv.trace());

  const Eigen::ArrayXd inv_l2 =
      (-2.0 * theta.log_correlation_lengths.array()).exp();
  for (Eigen::Index c = 0; c < m; ++c) {
    Eigen::MatrixXd kd(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j; i < n; ++i) {
        const double diff = u(i, c) - u(j, c);
        kd(i, j) = k(i, j) * diff * diff * inv_l2(c);
        kd(j, i) = kd(i, j);
      }
    }
    out.gradient(2 + c) =
        0.5 * (alpha.dot(kd * alpha) - a_inv.cwiseProduct(kd).sum());
  }
  return out;
}

namespace {

// Negated log marginal likelihood over the packed log-hyperparameter
// vector, with the noise floor applied before every evaluation.
struct LmlObjective {
  const Eigen::MatrixXd& u;
  const Eigen::VectorXd& f;
  double log_noise_floor;

  Eigen::VectorXd clamp(Eigen::VectorXd p) const {
    p(1) = std::max(p(1), log_noise_floor);
    return p;
  }

  bool eval(const Eigen::VectorXd& p, double& value,
            Eigen::VectorXd& grad) const {
    try {
      const LogMarginalLikelihood lml =
          log_marginal_likelihood(GpHyperparameters::from_vector(p), u, f);
      if (!std::isfinite(lml.value) || !lml.gradient.allFinite()) return false;
      value = -lml.value;
      grad = -lml.gradient;
      return true;
    } catch (const FactorizationError&) {
      return false;
    }
  }

  bool eval_value(const Eigen::VectorXd& p, double& value) const {
    try {
      const LogMarginalLikelihood lml =
          log_marginal_likelihood(GpHyperparameters::from_vector(p), u, f);
      if (!std::isfinite(lml.value)) return false;
      value = -lml.value;
      return true;
    } catch (const FactorizationError&) {
      return false;
    }
  }
};

}  // namespace

HyperOptResult optimize_hyperparameters(const Eigen::MatrixXd& u,
                                        const Eigen::VectorXd& f,
                                        const GpHyperparameters& theta0,
                                        const HyperOptions& opts) {
  theta0.validate();
  check_coords(u, theta0, "optimize_hyperparameters");
  const LmlObjective obj{u, f, std::log(opts.noise_floor)};

  Eigen::VectorXd p = obj.clamp(theta0.to_vector());
  double value = 0.0;
  Eigen::VectorXd grad;
  if (!obj.eval(p, value, grad)) {
    throw FactorizationError(
        "marginal likelihood not evaluable at the starting point");
  }
  const bool started_optimal = grad.norm() <= opts.gradient_tolerance;

  const auto dim = p.size();
  Eigen::VectorXd d = -grad;
  bool steepest = true;
  bool accepted_any = false;
  int iterations = 0;
  constexpr int kMaxBacktracks = 60;

  const auto line_search = [&](double slope, Eigen::VectorXd& p_out,
                               double& value_out) {
    double t = opts.initial_step;
    for (int k = 0; k < kMaxBacktracks; ++k, t *= opts.contraction) {
      const Eigen::VectorXd trial = obj.clamp(p + t * d);
      double ftrial;
      if (!obj.eval_value(trial, ftrial)) continue;
      if (ftrial <= value + opts.sufficient_decrease * t * slope) {
        p_out = trial;
        value_out = ftrial;
        return true;
      }
    }
    return false;
  };

  for (int it = 1; it <= opts.max_iterations; ++it) {
    if (grad.norm() <= opts.gradient_tolerance) break;
    double slope = grad.dot(d);
    if (slope >= 0.0) {
      d = -grad;
      steepest = true;
      slope = -grad.squaredNorm();
    }

    Eigen::VectorXd p_next;
    double value_next = 0.0;
    bool accepted = line_search(slope, p_next, value_next);
    if (!accepted && !steepest) {
      d = -grad;
      steepest = true;
      accepted = line_search(-grad.squaredNorm(), p_next, value_next);
    }
    if (!accepted) break;
    accepted_any = true;
    iterations = it;

    Eigen::VectorXd grad_next;
    double value_check = 0.0;
    if (!obj.eval(p_next, value_check, grad_next)) {
      p = p_next;
      value = value_next;
      break;
    }

    double beta = 0.0;
    if (it % static_cast<int>(dim) != 0) {
      beta = std::max(
          0.0, grad_next.dot(grad_next - grad) / grad.squaredNorm());
    }
    d = -grad_next + beta * d;
    steepest = (beta == 0.0);
    p = p_next;
    value = value_next;
    grad = grad_next;
  }

  HyperOptResult result;
  result.iterations = iterations;
  result.line_search_failed = !accepted_any && !started_optimal;
  result.hyperparameters = GpHyperparameters::from_vector(p);
  result.log_likelihood = -value;
  return result;
}

}  // namespace gridge
