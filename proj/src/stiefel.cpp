#include "gridge/stiefel.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "gridge/rng.hpp"

namespace gridge {

namespace {

bool all_finite(const Eigen::MatrixXd& a) { return a.allFinite(); }

}  // namespace

StiefelPoint::StiefelPoint(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  const auto d = matrix_.rows();
  const auto m = matrix_.cols();
  if (m < 1 || m > d) {
    std::ostringstream msg;
    msg << "StiefelPoint requires 1 <= m <= d, got d=" << d << " m=" << m;
    throw DimensionError(msg.str());
  }
  if (!all_finite(matrix_)) {
    throw NumericalError("StiefelPoint matrix has non-finite entries");
  }
  const double defect = orthonormality_defect();
  if (defect > kOrthonormalityTol) {
    std::ostringstream msg;
    msg << "columns not orthonormal: ||M^T M - I||_max = " << defect;
    throw DimensionError(msg.str());
  }
}

double StiefelPoint::orthonormality_defect() const {
  const auto m = matrix_.cols();
  Eigen::MatrixXd gram = matrix_.transpose() * matrix_;
  gram -= Eigen::MatrixXd::Identity(m, m);
  return gram.cwiseAbs().maxCoeff();
}

TangentVector::TangentVector(const StiefelPoint& base, Eigen::MatrixXd matrix)
    : base_(base), matrix_(std::move(matrix)) {
  if (matrix_.rows() != base_.ambient_dim() ||
      matrix_.cols() != base_.subspace_dim()) {
    throw DimensionError("tangent vector shape does not match its base point");
  }
  if (!all_finite(matrix_)) {
    throw NumericalError("tangent vector has non-finite entries");
  }
  // Skew-symmetry of M^T X, scaled so large tangents do not trip the check.
  Eigen::MatrixXd s = base_.matrix().transpose() * matrix_;
  s += s.transpose().eval();
  const double scale = std::max(1.0, matrix_.cwiseAbs().maxCoeff());
  if (s.cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DimensionError("matrix is not tangent at the given base point");
  }
}

void CgOptions::validate() const {
  if (max_iterations < 1) throw DimensionError("max_iterations must be >= 1");
  if (!(gradient_norm_tolerance > 0.0)) {
    throw DimensionError("gradient_norm_tolerance must be positive");
  }
  if (!(initial_step > 0.0) || !(contraction > 0.0) || contraction >= 1.0 ||
      !(sufficient_decrease > 0.0) || sufficient_decrease >= 1.0) {
    throw DimensionError("line-search parameters out of range");
  }
}

Eigen::MatrixXd thin_qr_positive(const Eigen::MatrixXd& a) {
  const auto d = a.rows();
  const auto m = a.cols();
  if (m < 1 || m > d) {
    throw DimensionError("thin_qr_positive needs a tall matrix");
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, m);
  Eigen::MatrixXd r =
      qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double rjj = r(j, j);
    if (std::abs(rjj) <= 1e-13 * scale) {
      throw FactorizationError("rank-deficient matrix in QR retraction");
    }
    if (rjj < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

StiefelPoint random_orthonormal(Eigen::Index d, Eigen::Index m,
                                std::uint64_t seed) {
  if (m < 1 || m > d) {
    std::ostringstream msg;
    msg << "random_orthonormal requires 1 <= m <= d, got d=" << d
        << " m=" << m;
    throw DimensionError(msg.str());
  }
  Rng rng(seed);
  Eigen::MatrixXd a(d, m);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = rng.normal();
  }
  return StiefelPoint(thin_qr_positive(a));
}

TangentVector project_to_tangent(const StiefelPoint& m,
                                 const Eigen::MatrixXd& g) {
  if (g.rows() != m.ambient_dim() || g.cols() != m.subspace_dim()) {
    throw DimensionError("gradient shape does not match the base point");
  }
  const Eigen::MatrixXd& mm = m.matrix();
  Eigen::MatrixXd xi = g - mm * (g.transpose() * mm);
  return TangentVector(m, std::move(xi));
}

double tangent_inner(const StiefelPoint& m, const Eigen::MatrixXd& a,
                     const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd& mm = m.matrix();
  const double full = a.cwiseProduct(b).sum();
  const Eigen::MatrixXd ma = mm.transpose() * a;
  const Eigen::MatrixXd mb = mm.transpose() * b;
  return full - 0.5 * ma.cwiseProduct(mb).sum();
}

double tangent_norm(const StiefelPoint& m, const Eigen::MatrixXd& a) {
  return std::sqrt(std::max(tangent_inner(m, a, a), 0.0));
}

StiefelPoint retract(const StiefelPoint& m, const TangentVector& x, double t) {
  if (x.base().ambient_dim() != m.ambient_dim() ||
      x.base().subspace_dim() != m.subspace_dim() ||
      (x.base().matrix() - m.matrix()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DimensionError("tangent vector is based at a different point");
  }
  if (t == 0.0) return m;
  return StiefelPoint(thin_qr_positive(m.matrix() + t * x.matrix()));
}

namespace {

struct LineSearchResult {
  bool accepted = false;
  double step = 0.0;
  double objective = 0.0;
  StiefelPoint point;
};

// Backtracking Armijo along a tangent direction. Non-finite trial values
// reject the step unless they are NaN, which indicates broken arithmetic.
LineSearchResult armijo_search(const StiefelObjective& objective,
                               const StiefelPoint& m, const Eigen::MatrixXd& d,
                               double f0, double slope, const CgOptions& opts,
                               int iteration) {
  constexpr int kMaxBacktracks = 60;
  const TangentVector dir(m, d);
  double t = opts.initial_step;
  for (int k = 0; k < kMaxBacktracks; ++k, t *= opts.contraction) {
    StiefelPoint trial = retract(m, dir, t);
    const double f = objective(trial);
    if (std::isnan(f)) {
      std::ostringstream msg;
      msg << "objective returned NaN at iteration " << iteration;
      throw NumericalError(msg.str());
    }
    if (!std::isfinite(f)) continue;
    if (f <= f0 + opts.sufficient_decrease * t * slope) {
      return {true, t, f, std::move(trial)};
    }
  }
  return {false, 0.0, f0, m};
}

}  // namespace

CgResult riemannian_cg_minimize(const StiefelObjective& objective,
                                const StiefelGradient& gradient,
                                const StiefelPoint& initial,
                                const CgOptions& opts) {
  opts.validate();
  StiefelPoint m = initial;
  double f = objective(m);
  if (!std::isfinite(f)) {
    throw NumericalError("objective non-finite at the initial point");
  }
  Eigen::MatrixXd g = gradient(m).matrix();
  double gnorm = tangent_norm(m, g);
  if (!std::isfinite(gnorm)) {
    throw NumericalError("gradient non-finite at the initial point");
  }

  CgResult result{m, {{f, gnorm}}, CgStopReason::MaxIterations, 0};
  if (gnorm <= opts.gradient_norm_tolerance) {
    result.reason = CgStopReason::GradientTolerance;
    return result;
  }

  const auto restart_period =
      static_cast<int>(initial.ambient_dim() * initial.subspace_dim());
  Eigen::MatrixXd d = -g;
  bool steepest = true;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    double slope = tangent_inner(m, g, d);
    if (slope >= 0.0) {  // not a descent direction; fall back
      d = -g;
      steepest = true;
      slope = -gnorm * gnorm;
    }

    LineSearchResult ls =
        armijo_search(objective, m, d, f, slope, opts, it);
    if (!ls.accepted && !steepest) {
      d = -g;
      steepest = true;
      slope = -gnorm * gnorm;
      ls = armijo_search(objective, m, d, f, slope, opts, it);
    }
    if (!ls.accepted) {
      result.reason = CgStopReason::LineSearchStall;
      result.iterations = it - 1;
      return result;
    }

    StiefelPoint m_next = ls.point;
    Eigen::MatrixXd g_next = gradient(m_next).matrix();
    const double gnorm_next = tangent_norm(m_next, g_next);
    if (!std::isfinite(gnorm_next) || !std::isfinite(ls.objective)) {
      std::ostringstream msg;
      msg << "non-finite objective/gradient at iteration " << it;
      throw NumericalError(msg.str());
    }

    result.trace.push_back({ls.objective, gnorm_next});
    result.iterations = it;
    result.point = m_next;

    if (gnorm_next <= opts.gradient_norm_tolerance) {
      result.reason = CgStopReason::GradientTolerance;
      return result;
    }

    // Polak-Ribiere+ with projection transport of the old quantities.
    const Eigen::MatrixXd g_old_t =
        project_to_tangent(m_next, g).matrix();
    const Eigen::MatrixXd d_t = project_to_tangent(m_next, d).matrix();
    double beta = 0.0;
    if (it % restart_period != 0) {
      const double denom = tangent_inner(m, g, g);
      beta = tangent_inner(m_next, g_next, g_next - g_old_t) / denom;
      beta = std::max(beta, 0.0);
    }
    d = -g_next + beta * d_t;
    steepest = (beta == 0.0);

    m = std::move(m_next);
    g = std::move(g_next);
    f = ls.objective;
    gnorm = gnorm_next;
  }
  return result;
}

}  // namespace gridge
