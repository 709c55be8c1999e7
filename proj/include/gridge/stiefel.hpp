#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "gridge/errors.hpp"

namespace gridge {

/// A d x m matrix with orthonormal columns; a point on the Stiefel
/// manifold. Construction validates the orthonormality invariant
/// ||M^T M - I||_max <= 1e-10, so holding a StiefelPoint is proof of it.
class StiefelPoint {
 public:
  static constexpr double kOrthonormalityTol = 1e-10;

  explicit StiefelPoint(Eigen::MatrixXd matrix);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  Eigen::Index ambient_dim() const { return matrix_.rows(); }
  Eigen::Index subspace_dim() const { return matrix_.cols(); }

  /// ||M^T M - I||_max, for diagnostics.
  double orthonormality_defect() const;

 private:
  Eigen::MatrixXd matrix_;
};

/// An element of the tangent space at a StiefelPoint: M^T X + X^T M = 0.
class TangentVector {
 public:
  TangentVector(const StiefelPoint& base, Eigen::MatrixXd matrix);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const StiefelPoint& base() const { return base_; }

 private:
  StiefelPoint base_;
  Eigen::MatrixXd matrix_;
};

struct CgOptions {
  int max_iterations = 500;
  double gradient_norm_tolerance = 1e-6;
  double initial_step = 1.0;
  double contraction = 0.5;
  double sufficient_decrease = 1e-4;

  void validate() const;
};

enum class CgStopReason { GradientTolerance, MaxIterations, LineSearchStall };

struct CgTracePoint {
  double objective = 0.0;
  double gradient_norm = 0.0;
};

struct CgResult {
  StiefelPoint point;
  /// trace[0] is the starting point; one entry per accepted iterate after.
  std::vector<CgTracePoint> trace;
  CgStopReason reason = CgStopReason::MaxIterations;
  int iterations = 0;
};

using StiefelObjective = std::function<double(const StiefelPoint&)>;
using StiefelGradient = std::function<TangentVector(const StiefelPoint&)>;

/// Thin QR factor with the sign convention diag(R) > 0, which makes the
/// factorization unique. Throws FactorizationError on rank deficiency.
Eigen::MatrixXd thin_qr_positive(const Eigen::MatrixXd& a);

/// Q1 of the QR factorization of a seeded d x m standard-normal matrix.
StiefelPoint random_orthonormal(Eigen::Index d, Eigen::Index m,
                                std::uint64_t seed);

/// Projection G - M G^T M onto the tangent space at M. When G is the
/// Euclidean gradient of an objective, the result is its Riemannian
/// gradient under the canonical Stiefel metric.
TangentVector project_to_tangent(const StiefelPoint& m,
                                 const Eigen::MatrixXd& g);

/// Canonical metric tr(a^T (I - 1/2 M M^T) b) on tangent vectors at M.
double tangent_inner(const StiefelPoint& m, const Eigen::MatrixXd& a,
                     const Eigen::MatrixXd& b);

double tangent_norm(const StiefelPoint& m, const Eigen::MatrixXd& a);

/// QR retraction of M + t*X. retract(M, X, 0) returns M unchanged.
StiefelPoint retract(const StiefelPoint& m, const TangentVector& x, double t);

/// Riemannian conjugate gradients (Polak-Ribiere+ with projection
/// transport and Armijo backtracking) minimizing `objective` from
/// `initial`. The trace of objective values is non-increasing.
CgResult riemannian_cg_minimize(const StiefelObjective& objective,
                                const StiefelGradient& gradient,
                                const StiefelPoint& initial,
                                const CgOptions& opts = {});

}  // namespace gridge
