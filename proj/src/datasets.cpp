#include "gridge/datasets.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "gridge/rng.hpp"
#include "gridge/stiefel.hpp"

namespace gridge {

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_value(const std::string& field, std::size_t line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || errno == ERANGE) {
    std::ostringstream msg;
    msg << "line " << line_no << ": cannot parse numeric field '" << field
        << "'";
    throw ParseError(msg.str());
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::string density_tag_name(DensityTag tag) {
  switch (tag) {
    case DensityTag::UniformHypercube:
      return "uniform-hypercube";
    case DensityTag::StandardNormal:
      return "standard-normal";
    case DensityTag::External:
      return "external";
  }
  return "external";
}

DensityTag density_tag_from_name(const std::string& name) {
  if (name == "uniform-hypercube") return DensityTag::UniformHypercube;
  if (name == "standard-normal") return DensityTag::StandardNormal;
  if (name == "external") return DensityTag::External;
  throw ParseError("unknown density tag '" + name + "'");
}

void Dataset::validate() const {
  if (n() < 1 || d() < 1) throw SizeError("dataset is empty");
  if (outputs.size() != n()) {
    throw DimensionError("dataset output length does not match inputs");
  }
  if (!inputs.allFinite() || !outputs.allFinite()) {
    throw NumericalError("dataset has non-finite values");
  }
  if (true_subspace) {
    StiefelPoint check(*true_subspace);  // validates orthonormality
    if (check.ambient_dim() != d()) {
      throw DimensionError("true subspace dimension does not match inputs");
    }
  }
}

double linear_ridge_output(const Eigen::VectorXd& x,
                           const Eigen::MatrixXd& m_true) {
  return (m_true.transpose() * x).sum();
}

Eigen::MatrixXd bivariate_normal_raw_subspace() {
  Eigen::MatrixXd m(5, 2);
  m << -0.5425, 0.0654,  //
      -0.6784, -0.4931,  //
      -0.2381, -0.2367,  //
      -0.1655, 0.4643,   //
      -0.4017, 0.6935;
  return m;
}

Eigen::Matrix2d bivariate_normal_sigma() {
  Eigen::Matrix2d sigma;
  sigma << 0.25, 0.30, 0.30, 1.0;
  return sigma;
}

double bivariate_normal_output(const Eigen::VectorXd& x) {
  static const Eigen::MatrixXd m = bivariate_normal_raw_subspace();
  static const Eigen::Matrix2d sigma_inv = bivariate_normal_sigma().inverse();
  static const double norm_const =
      1.0 / std::sqrt(bivariate_normal_sigma().determinant() *
                      std::pow(2.0 * std::numbers::pi, 2));
  const Eigen::Vector2d u = m.transpose() * x;
  return norm_const * std::exp(-0.5 * u.dot(sigma_inv * u));
}

double log_sum_output(const Eigen::VectorXd& x) { return std::log(x.sum()); }

Dataset gen_linear_ridge(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
  if (d < 2) throw DimensionError("gen_linear_ridge needs d >= 2");
  if (n < 1) throw SizeError("gen_linear_ridge needs n >= 1");
  Rng rng(seed);
  Eigen::MatrixXd a(d, 2);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) a(i, j) = rng.normal();
  }
  Dataset out;
  out.true_subspace = thin_qr_positive(a);
  out.density = DensityTag::UniformHypercube;
  out.inputs.resize(n, d);
  out.outputs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      out.inputs(i, j) = rng.uniform(-1.0, 1.0);
    }
    out.outputs(i) = linear_ridge_output(out.inputs.row(i), *out.true_subspace);
  }
  return out;
}

Dataset gen_bivariate_normal_ridge(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw SizeError("gen_bivariate_normal_ridge needs n >= 1");
  Rng rng(seed);
  Dataset out;
  // The printed matrix is orthonormal only to 4 decimals; the stored true
  // subspace is its re-orthonormalized Q factor, which spans the same plane.
  out.true_subspace = thin_qr_positive(bivariate_normal_raw_subspace());
  out.density = DensityTag::StandardNormal;
  out.inputs.resize(n, 5);
  out.outputs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) out.inputs(i, j) = rng.normal();
    out.outputs(i) = bivariate_normal_output(out.inputs.row(i));
  }
  return out;
}

Dataset gen_log_sum(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw SizeError("gen_log_sum needs n >= 1");
  Rng rng(seed);
  Dataset out;
  out.true_subspace =
      Eigen::MatrixXd::Constant(3, 1, 1.0 / std::sqrt(3.0));
  out.density = DensityTag::UniformHypercube;
  out.inputs.resize(n, 3);
  out.outputs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      out.inputs(i, j) = rng.uniform(0.1, 1.0);
    }
    out.outputs(i) = log_sum_output(out.inputs.row(i));
  }
  return out;
}

Dataset load_doe_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw SizeError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 2) {
    throw ParseError(
        "line 1: header must name at least one input column and one output "
        "column");
  }
  const auto d = static_cast<Eigen::Index>(header.size()) - 1;

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << "line " << line_no << ": expected " << header.size()
          << " fields, got " << fields.size();
      throw ParseError(msg.str());
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      row[j] = parse_value(fields[j], line_no);
      if (!std::isfinite(row[j])) {
        std::ostringstream msg;
        msg << "line " << line_no << ": non-finite value rejected";
        throw ParseError(msg.str());
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw SizeError("no data rows in " + path);

  Dataset out;
  out.density = DensityTag::External;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), d);
  out.outputs.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      out.inputs(static_cast<Eigen::Index>(i), j) = rows[i][j];
    }
    out.outputs(static_cast<Eigen::Index>(i)) = rows[i][d];
  }
  return out;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  for (Eigen::Index j = 0; j < dataset.d(); ++j) out << "x" << (j + 1) << ",";
  out << "f\n";
  for (Eigen::Index i = 0; i < dataset.n(); ++i) {
    for (Eigen::Index j = 0; j < dataset.d(); ++j) {
      out << format_value(dataset.inputs(i, j)) << ",";
    }
    out << format_value(dataset.outputs(i)) << "\n";
  }
}

void save_metadata(const Dataset& dataset, const std::string& csv_path) {
  std::ofstream out(csv_path + ".meta");
  if (!out) throw ParseError("cannot write file: " + csv_path + ".meta");
  out << "density = " << density_tag_name(dataset.density) << "\n";
  if (dataset.true_subspace) {
    const Eigen::MatrixXd& m = *dataset.true_subspace;
    out << "m_true_rows = " << m.rows() << "\n";
    out << "m_true_cols = " << m.cols() << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << "m_true_row_" << i << " =";
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out << " " << format_value(m(i, j));
      }
      out << "\n";
    }
  }
}

Dataset load_dataset(const std::string& csv_path) {
  Dataset out = load_doe_csv(csv_path);
  std::ifstream meta(csv_path + ".meta");
  if (!meta) return out;

  std::string line;
  Eigen::Index rows = 0, cols = 0;
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line_no = 0;
  while (std::getline(meta, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << "meta line " << line_no << ": expected 'key = value'";
      throw ParseError(msg.str());
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(0, 1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    };
    trim(key);
    trim(value);
    entries.emplace_back(key, value);
    if (key == "m_true_rows") rows = std::stol(value);
    if (key == "m_true_cols") cols = std::stol(value);
  }
  for (const auto& [key, value] : entries) {
    if (key == "density") out.density = density_tag_from_name(value);
  }
  if (rows > 0 && cols > 0) {
    Eigen::MatrixXd m(rows, cols);
    for (const auto& [key, value] : entries) {
      if (key.rfind("m_true_row_", 0) != 0) continue;
      const auto i = static_cast<Eigen::Index>(std::stol(key.substr(11)));
      std::istringstream stream(value);
      for (Eigen::Index j = 0; j < cols; ++j) {
        std::string field;
        if (!(stream >> field)) {
          throw ParseError("meta: malformed row '" + key + "'");
        }
        m(i, j) = parse_value(field, 0);
      }
    }
    out.true_subspace = m;
  }
  out.validate();
  return out;
}

}  // namespace gridge
