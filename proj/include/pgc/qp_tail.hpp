#pragma once

// The quadratic program min z' Sigma^{-1} z subject to z >= c, and the joint
// tail asymptotics built on its solution:
//   P(X_i > t x_i, i in S) ~ Psi t^-gamma (log t)^((Delta - |I|)/2) prod_i x_i^-(sqrt(alpha_i) h_i).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "pgc/core/linalg.hpp"
#include "pgc/core/normal.hpp"
#include "pgc/core/orthant.hpp"
#include "pgc/model.hpp"

namespace pgc {

inline constexpr double kQpTolerance = 1e-9;
inline constexpr double kRegimeTolerance = 1e-9;
inline constexpr int kMaxQpDimension = 20;

struct QpSolution {
  double gamma = 0.0;
  IndexSet active;    // I
  IndexSet inactive;  // J
  Vector kappa;       // minimizer, length d
  Vector h;           // Sigma_I^{-1} c_I, indexed like `active`
  double delta_exp = 0.0;
};

namespace detail {

// c_sq holds c squared as the caller knows it (alpha itself when c = sqrt(alpha)),
// so the diagonal part of c_I' Sigma_I^{-1} c_I carries no rounding from c.
inline QpSolution solve_qp_impl(const CorrelationMatrix& sigma, const Vector& c, const Vector& c_sq) {
  const int d = sigma.dim();
  if (c.size() != d) fail(ErrorCode::DimensionMismatch, "solve_qp: c has the wrong length");
  if (d > kMaxQpDimension) {
    fail(ErrorCode::DomainError, "solve_qp enumerates 2^d subsets and accepts d <= " +
                                     std::to_string(kMaxQpDimension) + ", got d = " +
                                     std::to_string(d));
  }
  for (int i = 0; i < d; ++i) {
    if (!(c(i) > 0.0) || !std::isfinite(c(i))) fail(ErrorCode::DomainError, "solve_qp: c must be positive");
  }

  const Matrix& s = sigma.matrix();
  bool found = false;
  QpSolution best;
  for (std::uint32_t mask = 1; mask < (1u << d); ++mask) {
    IndexSet active;
    IndexSet inactive;
    for (int i = 0; i < d; ++i) ((mask >> i) & 1u ? active : inactive).push_back(i);
    const Matrix s_ii = submatrix(s, active, active);
    const Vector c_i = subvector(c, active);
    const Vector h = s_ii.llt().solve(c_i);
    if ((h.array() <= kQpTolerance).any()) continue;
    const Vector kappa_j = submatrix(s, inactive, active) * h;
    bool feasible = true;
    for (std::size_t k = 0; k < inactive.size(); ++k) {
      if (kappa_j(static_cast<Eigen::Index>(k)) < c(inactive[k]) - kQpTolerance) {
        feasible = false;
        break;
      }
    }
    if (!feasible) continue;
    const Matrix p = s_ii.llt().solve(Matrix::Identity(s_ii.rows(), s_ii.cols()));
    double gamma = 0.0;
    for (Eigen::Index a = 0; a < p.rows(); ++a) {
      gamma += p(a, a) * c_sq(active[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < p.cols(); ++b)
        if (a != b) gamma += p(a, b) * c_i(a) * c_i(b);
    }
    const bool better =
        !found || gamma < best.gamma - 1e-12 * best.gamma ||
        (gamma <= best.gamma + 1e-12 * best.gamma && active.size() < best.active.size());
    if (!better) continue;
    found = true;
    best.gamma = gamma;
    best.kappa = c;
    for (std::size_t k = 0; k < inactive.size(); ++k)
      best.kappa(inactive[k]) = kappa_j(static_cast<Eigen::Index>(k));
    best.h = h;
    best.delta_exp = (h.array() / c_i.array()).sum();
    best.active = std::move(active);
    best.inactive = std::move(inactive);
  }
  if (!found) fail(ErrorCode::InfeasibleEnumeration, "solve_qp: no index set is feasible");
  return best;
}

}  // namespace detail

/// Exhaustive search over non-empty I: keep the subsets with h > 0 and
/// Sigma_JI h >= c_J (both to kQpTolerance), return the one with the smallest
/// objective c_I' Sigma_I^{-1} c_I, preferring the smaller |I| on ties.
inline QpSolution solve_qp(const CorrelationMatrix& sigma, const Vector& c) {
  return detail::solve_qp_impl(sigma, c, c.cwiseProduct(c));
}

/// The program with c = sqrt(alpha). gamma is exact when Sigma_I^{-1} is,
/// e.g. gamma = max alpha for a single active index.
inline QpSolution solve_tail_qp(const CorrelationMatrix& sigma, const Vector& alpha) {
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (!(alpha(i) > 0.0) || !std::isfinite(alpha(i))) fail(ErrorCode::DomainError, "solve_tail_qp: alpha must be positive");
  }
  return detail::solve_qp_impl(sigma, alpha.cwiseSqrt(), alpha);
}

struct TailAsymptotic {
  double gamma = 0.0;
  double log_power = 0.0;  // (Delta - |I|) / 2
  double psi = 0.0;
  Vector exponents;        // sqrt(alpha_i) h_i on I, zero elsewhere
  IndexSet active;         // positions within the evaluated margins
  double orthant_probability = 1.0;
  double orthant_standard_error = 0.0;

  /// psi t^-gamma (log t)^log_power prod x_i^-exponents_i, for t > e.
  double evaluate(double t, const Vector& x) const {
    if (!(t > std::numbers::e)) fail(ErrorCode::DomainError, "tail asymptotic needs t > e");
    if (x.size() != exponents.size()) fail(ErrorCode::DimensionMismatch, "tail asymptotic: x has the wrong length");
    double log_value = std::log(psi) - gamma * std::log(t) + log_power * std::log(std::log(t));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!(x(i) > 0.0)) fail(ErrorCode::DomainError, "tail asymptotic needs x > 0");
      log_value -= exponents(i) * std::log(x(i));
    }
    return std::exp(log_value);
  }
};

/// Asymptotic of P(X_i > t x_i for all i in subset) using the sub-model on `subset`.
inline TailAsymptotic joint_tail_asymptotic(const PgcModel& model, const IndexSet& subset,
                                            const OrthantOptions& orthant = {}) {
  if (subset.empty()) fail(ErrorCode::DomainError, "joint_tail_asymptotic: empty subset");
  for (int i : subset) {
    if (i < 0 || i >= model.dim()) fail(ErrorCode::DomainError, "joint_tail_asymptotic: index out of range");
  }
  const PgcModel sub = model.restricted(subset);
  const Vector alpha = sub.alphas();
  const Vector theta = sub.thetas();
  const Vector c = alpha.cwiseSqrt();
  const QpSolution qp = solve_tail_qp(sub.sigma(), alpha);

  TailAsymptotic out;
  out.gamma = qp.gamma;
  out.active = qp.active;
  const auto n_active = static_cast<double>(qp.active.size());
  out.log_power = 0.5 * (qp.delta_exp - n_active);
  out.exponents = Vector::Zero(sub.dim());

  const Matrix& s = sub.sigma().matrix();
  const Matrix s_ii = submatrix(s, qp.active, qp.active);
  double log_psi = out.log_power * std::log(4.0 * std::numbers::pi) - 0.5 * spd_log_determinant(s_ii);
  for (std::size_t k = 0; k < qp.active.size(); ++k) {
    const int i = qp.active[k];
    const double h = qp.h(static_cast<Eigen::Index>(k));
    out.exponents(i) = alpha(i) * (h / c(i));
    log_psi += h / c(i) * std::log(theta(i) * c(i)) - std::log(h);
  }

  if (!qp.inactive.empty()) {
    const Matrix s_ji = submatrix(s, qp.inactive, qp.active);
    const Matrix cond = submatrix(s, qp.inactive, qp.inactive) - s_ji * s_ii.llt().solve(s_ji.transpose());
    std::vector<bool> drop(qp.inactive.size());
    for (std::size_t k = 0; k < qp.inactive.size(); ++k) {
      const int j = qp.inactive[k];
      drop[k] = std::abs(qp.kappa(j) - c(j)) > kQpTolerance;
    }
    const OrthantResult orth = centered_orthant_prob(0.5 * (cond + cond.transpose()), drop, orthant);
    out.orthant_probability = orth.probability;
    out.orthant_standard_error = orth.standard_error;
    log_psi += std::log(orth.probability);
  }
  out.psi = std::exp(log_psi);
  return out;
}

enum class Regime { Interior, Boundary, Degenerate };

constexpr std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::Interior: return "Interior";
    case Regime::Boundary: return "Boundary";
    case Regime::Degenerate: return "Degenerate";
  }
  return "Unknown";
}

/// min(sqrt(a2/a1), sqrt(a1/a2)): the largest correlation at which the
/// minimum of the two margins still has a tail lighter than both.
inline double regime_bound(double a1, double a2) {
  return std::min(std::sqrt(a2 / a1), std::sqrt(a1 / a2));
}

inline Regime classify_regime(double a1, double a2, double rho) {
  const double bound = regime_bound(a1, a2);
  if (rho < bound - kRegimeTolerance) return Regime::Interior;
  if (rho <= bound + kRegimeTolerance) return Regime::Boundary;
  return Regime::Degenerate;
}

/// Closed-form two-margin asymptotic.
inline TailAsymptotic bivariate_tail_asymptotic(double a1, double a2, double th1, double th2,
                                                double rho) {
  for (double v : {a1, a2, th1, th2}) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::DomainError, "bivariate asymptotic: parameters must be positive");
  }
  if (!(rho > -1.0 && rho < 1.0)) fail(ErrorCode::DomainError, "bivariate asymptotic: rho must be in (-1, 1)");

  TailAsymptotic out;
  out.exponents = Vector::Zero(2);
  const Regime regime = classify_regime(a1, a2, rho);
  if (regime != Regime::Interior) {
    const int top = a1 >= a2 ? 0 : 1;
    out.gamma = std::max(a1, a2);
    out.active = {top};
    out.exponents(top) = out.gamma;
    out.log_power = 0.0;
    const double th = top == 0 ? th1 : th2;
    out.orthant_probability = regime == Regime::Boundary ? 0.5 : 1.0;
    out.psi = th * out.orthant_probability;
    return out;
  }
  const double s1 = std::sqrt(a1);
  const double s2 = std::sqrt(a2);
  const double s12 = s1 * s2;
  const double one_m = 1.0 - rho * rho;
  out.gamma = (a1 + a2 - 2.0 * rho * s12) / one_m;
  out.active = {0, 1};
  out.exponents(0) = (a1 - rho * s12) / one_m;
  out.exponents(1) = (a2 - rho * s12) / one_m;
  out.log_power = -rho * out.gamma / (2.0 * s12);
  const double log_psi = out.log_power * std::log(4.0 * std::numbers::pi) + 1.5 * std::log(one_m) +
                         (1.0 - rho * s2 / s1) / one_m * std::log(th1 * s1) +
                         (1.0 - rho * s1 / s2) / one_m * std::log(th2 * s2) -
                         std::log(s12 * (1.0 + rho * rho) - rho * (a1 + a2));
  out.psi = std::exp(log_psi);
  return out;
}

/// Approximation to Phibar^{-1}(theta (t x)^-alpha):
/// sqrt(2 alpha log t) + log(x^alpha / (2 theta sqrt(pi alpha))) / sqrt(2 alpha log t)
///   - log log t / (2 sqrt(2 alpha log t)).
inline double gaussian_quantile_expansion(double alpha, double theta, double x, double t) {
  for (double v : {alpha, theta, x}) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::DomainError, "quantile expansion: parameters must be positive");
  }
  if (!(t > 1.0)) fail(ErrorCode::DomainError, "quantile expansion needs t > 1");
  const double lt = std::log(t);
  const double root = std::sqrt(2.0 * alpha * lt);
  return root + std::log(std::pow(x, alpha) / (2.0 * theta * std::sqrt(std::numbers::pi * alpha))) / root -
         std::log(lt) / (2.0 * root);
}

/// Asymptotic of P(Z > u c + z/u + (log L / u) w) for Z ~ N(0, Sigma):
/// upsilon u^-|I| L^-(w_I' h) exp(-gamma u^2 / 2 - z_I' h).
struct GaussianTailAsymptotic {
  double upsilon = 0.0;
  double gamma = 0.0;
  double l_exponent = 0.0;  // w_I' Sigma_I^{-1} c_I
  double z_shift = 0.0;     // z_I' Sigma_I^{-1} c_I
  int n_active = 0;
  QpSolution qp;

  double evaluate(double u, double big_l) const {
    if (!(u > 0.0) || !(big_l > 0.0)) fail(ErrorCode::DomainError, "Gaussian tail asymptotic needs u, L > 0");
    return upsilon * std::exp(-n_active * std::log(u) - l_exponent * std::log(big_l) -
                              0.5 * gamma * u * u - z_shift);
  }
};

inline GaussianTailAsymptotic gaussian_joint_tail_asymptotic(const CorrelationMatrix& sigma,
                                                             const Vector& c, const Vector& z,
                                                             const Vector& w,
                                                             const OrthantOptions& orthant = {}) {
  if (z.size() != sigma.dim() || w.size() != sigma.dim()) {
    fail(ErrorCode::DimensionMismatch, "Gaussian tail asymptotic: z and w must have length d");
  }
  GaussianTailAsymptotic out;
  out.qp = solve_qp(sigma, c);
  const QpSolution& qp = out.qp;
  out.gamma = qp.gamma;
  out.n_active = static_cast<int>(qp.active.size());
  out.l_exponent = subvector(w, qp.active).dot(qp.h);
  out.z_shift = subvector(z, qp.active).dot(qp.h);

  const Matrix& s = sigma.matrix();
  const Matrix s_ii = submatrix(s, qp.active, qp.active);
  double log_upsilon = -0.5 * out.n_active * std::log(2.0 * std::numbers::pi) -
                       0.5 * spd_log_determinant(s_ii) - qp.h.array().log().sum();
  if (!qp.inactive.empty()) {
    const Matrix s_ji = submatrix(s, qp.inactive, qp.active);
    const Matrix cond = submatrix(s, qp.inactive, qp.inactive) - s_ji * s_ii.llt().solve(s_ji.transpose());
    std::vector<bool> drop(qp.inactive.size());
    for (std::size_t k = 0; k < qp.inactive.size(); ++k) {
      const int j = qp.inactive[k];
      drop[k] = std::abs(qp.kappa(j) - c(j)) > kQpTolerance;
    }
    log_upsilon += std::log(centered_orthant_prob(0.5 * (cond + cond.transpose()), drop, orthant).probability);
  }
  out.upsilon = std::exp(log_upsilon);
  return out;
}

}  // namespace pgc
