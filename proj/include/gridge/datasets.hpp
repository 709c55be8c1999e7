#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>

#include "gridge/errors.hpp"

namespace gridge {

enum class DensityTag { UniformHypercube, StandardNormal, External };

std::string density_tag_name(DensityTag tag);
DensityTag density_tag_from_name(const std::string& name);

/// Paired inputs X (N x d) and scalar outputs f (N), with the sampling
/// density and, for synthetic problems, the planted subspace.
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd outputs;
  DensityTag density = DensityTag::External;
  std::optional<Eigen::MatrixXd> true_subspace;

  Eigen::Index n() const { return inputs.rows(); }
  Eigen::Index d() const { return inputs.cols(); }

  void validate() const;
};

/// f(x) = sum of the two coordinates of M_true^T x, X uniform on [-1,1]^d,
/// M_true a seeded random 2-column orthonormal matrix.
Dataset gen_linear_ridge(Eigen::Index d, Eigen::Index n, std::uint64_t seed);

/// The 5-dimensional problem whose output is a bivariate normal density
/// evaluated on a fixed 2-dimensional subspace; X standard normal.
Dataset gen_bivariate_normal_ridge(Eigen::Index n, std::uint64_t seed);

/// f = log(x1 + x2 + x3) with X uniform on [0.1, 1]^3 so the logarithm's
/// argument stays away from zero.
Dataset gen_log_sum(Eigen::Index n, std::uint64_t seed);

/// The printed 5x2 subspace of the bivariate-normal problem, as given (its
/// columns are orthonormal only to the printed precision).
Eigen::MatrixXd bivariate_normal_raw_subspace();
Eigen::Matrix2d bivariate_normal_sigma();

double linear_ridge_output(const Eigen::VectorXd& x,
                           const Eigen::MatrixXd& m_true);
double bivariate_normal_output(const Eigen::VectorXd& x);
double log_sum_output(const Eigen::VectorXd& x);

/// CSV with a mandatory header naming d input columns then one output
/// column; values written with 17 significant digits round-trip bitwise.
Dataset load_doe_csv(const std::string& path);
void save_csv(const Dataset& dataset, const std::string& path);

/// Side file `<csv path>.meta` carrying the density tag and, when present,
/// the true subspace as key-value text.
void save_metadata(const Dataset& dataset, const std::string& csv_path);

/// Loads the CSV plus its side file when one exists.
Dataset load_dataset(const std::string& csv_path);

}  // namespace gridge
