#pragma once

// Small dense linear algebra on top of Eigen: Cholesky with a fixed pivot
// tolerance, index-set submatrices, and the validated correlation matrix type.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pgc/error.hpp"

namespace pgc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<int>;

inline constexpr double kPivotTolerance = 1e-12;
inline constexpr int kMaxDimension = 64;

/// Lower-triangular L with L * L^T == m. Every pivot (the quantity whose square
/// root becomes a diagonal entry of L) must exceed kPivotTolerance.
inline Matrix cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) fail(ErrorCode::DimensionMismatch, "cholesky: matrix is not square");
  const Eigen::Index d = m.rows();
  Matrix lower = Matrix::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = m(j, j);
    for (Eigen::Index p = 0; p < j; ++p) pivot -= lower(j, p) * lower(j, p);
    if (!(pivot > kPivotTolerance)) {
      fail(ErrorCode::NotPositiveDefinite,
           "cholesky pivot " + std::to_string(j) + " is " + std::to_string(pivot));
    }
    const double diag = std::sqrt(pivot);
    lower(j, j) = diag;
    for (Eigen::Index i = j + 1; i < d; ++i) {
      double s = m(i, j);
      for (Eigen::Index p = 0; p < j; ++p) s -= lower(i, p) * lower(j, p);
      lower(i, j) = s / diag;
    }
  }
  return lower;
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
inline Matrix spd_inverse(const Matrix& m) {
  const Matrix lower = cholesky(m);
  const Eigen::Index d = m.rows();
  Matrix inv = Matrix::Identity(d, d);
  lower.triangularView<Eigen::Lower>().solveInPlace(inv);
  lower.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
  return 0.5 * (inv + inv.transpose());
}

inline double spd_log_determinant(const Matrix& m) {
  const Matrix lower = cholesky(m);
  return 2.0 * lower.diagonal().array().log().sum();
}

inline Matrix submatrix(const Matrix& m, std::span<const int> rows, std::span<const int> cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

inline Vector subvector(const Vector& v, std::span<const int> idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

/// Symmetric, unit-diagonal, positive definite. The Cholesky factor is computed
/// once at construction and kept alongside the entries.
class CorrelationMatrix {
 public:
  explicit CorrelationMatrix(Matrix entries) : entries_(std::move(entries)) {
    const Eigen::Index d = entries_.rows();
    if (d != entries_.cols()) fail(ErrorCode::DimensionMismatch, "correlation matrix is not square");
    if (d < 1 || d > kMaxDimension) {
      fail(ErrorCode::DimensionMismatch,
           "correlation matrix dimension must be in [1, " + std::to_string(kMaxDimension) + "]");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      if (entries_(i, i) != 1.0) fail(ErrorCode::DomainError, "correlation diagonal must be exactly 1");
      for (Eigen::Index j = 0; j < d; ++j) {
        const double v = entries_(i, j);
        if (!std::isfinite(v)) fail(ErrorCode::DomainError, "correlation entries must be finite");
        if (v != entries_(j, i)) fail(ErrorCode::DomainError, "correlation matrix is not symmetric");
        if (i != j && !(std::abs(v) < 1.0)) {
          fail(ErrorCode::NotPositiveDefinite,
               "off-diagonal correlation " + std::to_string(v) + " is outside (-1, 1)");
        }
      }
    }
    lower_ = cholesky(entries_);
  }

  static CorrelationMatrix identity(int d) { return CorrelationMatrix(Matrix::Identity(d, d)); }

  static CorrelationMatrix bivariate(double rho) {
    Matrix m(2, 2);
    m << 1.0, rho, rho, 1.0;
    return CorrelationMatrix(std::move(m));
  }

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  const Matrix& cholesky_factor() const { return lower_; }
  double operator()(int i, int j) const { return entries_(i, j); }

  CorrelationMatrix restricted(std::span<const int> idx) const {
    return CorrelationMatrix(submatrix(entries_, idx, idx));
  }

 private:
  Matrix entries_;
  Matrix lower_;
};

/// (Sigma_idx)^{-1} for a non-empty index set.
inline Matrix submatrix_inverse(const CorrelationMatrix& m, std::span<const int> idx) {
  if (idx.empty()) fail(ErrorCode::DomainError, "submatrix_inverse: empty index set");
  for (int i : idx) {
    if (i < 0 || i >= m.dim()) fail(ErrorCode::DomainError, "submatrix_inverse: index out of range");
  }
  return spd_inverse(submatrix(m.matrix(), idx, idx));
}

inline IndexSet complement(const IndexSet& idx, int d) {
  std::vector<bool> in(static_cast<std::size_t>(d), false);
  for (int i : idx) in[static_cast<std::size_t>(i)] = true;
  IndexSet out;
  for (int i = 0; i < d; ++i)
    if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

}  // namespace pgc
