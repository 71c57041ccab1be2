#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pgc/core/linalg.hpp"
#include "pgc/core/random.hpp"

namespace pgc {

struct OrthantResult {
  double probability = 1.0;
  double standard_error = 0.0;  // zero for the closed-form cases
  int dimension = 0;            // dimensions left after dropping
};

struct OrthantOptions {
  std::uint64_t n_draws = 1'000'000;
  std::uint64_t seed = 0x5eed;
  std::uint64_t stream_id = 0x0c7a;
};

/// P(Y_k >= 0 for every kept k) for Y ~ N(0, cov). Dimensions with
/// drop[k] == true carry a -infinity threshold and are removed first.
/// Zero or one remaining dimension and the bivariate case are exact; three or
/// more use plain Monte Carlo on a symmetric square root of the correlation.
inline OrthantResult centered_orthant_prob(const Matrix& cov, const std::vector<bool>& drop,
                                           const OrthantOptions& options = {}) {
  if (cov.rows() != cov.cols() || static_cast<std::size_t>(cov.rows()) != drop.size()) {
    fail(ErrorCode::DimensionMismatch, "centered_orthant_prob: mask and matrix sizes differ");
  }
  IndexSet kept;
  for (std::size_t k = 0; k < drop.size(); ++k)
    if (!drop[k]) kept.push_back(static_cast<int>(k));

  OrthantResult result;
  result.dimension = static_cast<int>(kept.size());
  if (kept.empty()) return result;

  const Matrix c = submatrix(cov, kept, kept);
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if (!c.isApprox(c.transpose(), 1e-12)) {
    fail(ErrorCode::NotPositiveSemiDefinite, "centered_orthant_prob: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (c + c.transpose()));
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    fail(ErrorCode::NotPositiveSemiDefinite, "centered_orthant_prob: negative eigenvalue");
  }

  if (kept.size() == 1) {
    result.probability = 0.5;
    return result;
  }
  if (kept.size() == 2) {
    const double denom = std::sqrt(c(0, 0) * c(1, 1));
    const double r = denom > 0.0 ? std::clamp(c(0, 1) / denom, -1.0, 1.0) : 0.0;
    result.probability = 0.25 + std::asin(r) / (2.0 * std::numbers::pi);
    return result;
  }

  const Vector eigenvalues = eig.eigenvalues().cwiseMax(0.0);
  const Matrix root = eig.eigenvectors() * eigenvalues.cwiseSqrt().asDiagonal();
  const Eigen::Index m = c.rows();
  RandomStream stream(options.seed, options.stream_id);
  Vector normal(m);
  std::uint64_t hits = 0;
  for (std::uint64_t draw = 0; draw < options.n_draws; ++draw) {
    for (Eigen::Index k = 0; k < m; ++k) normal(k) = stream.normal();
    const Vector y = root * normal;
    if ((y.array() >= 0.0).all()) ++hits;
  }
  const double n = static_cast<double>(options.n_draws);
  const double p = static_cast<double>(hits) / n;
  result.probability = p;
  result.standard_error = std::sqrt(p * (1.0 - p) / n);
  return result;
}

}  // namespace pgc
