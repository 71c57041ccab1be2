#pragma once

// Hill-type estimation of marginal tail indices, of the tail index gamma of
// pairwise minima, and of the Gaussian correlation rho recovered from
// (alpha_1, alpha_2, gamma), with delta-method confidence intervals.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgc/core/linalg.hpp"
#include "pgc/core/normal.hpp"
#include "pgc/core/parallel.hpp"
#include "pgc/qp_tail.hpp"

namespace pgc {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
  double width() const { return hi - lo; }
};

/// z with Phi(z) = (1 + level) / 2.
inline double two_sided_z(double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::DomainError, "confidence level must be in (0, 1)");
  return std_normal_quantile(0.5 * (1.0 + level));
}

struct TailFit {
  int k = 0;
  double hill = 0.0;   // estimate of 1/index
  double index = 0.0;  // 1/hill
  double se_index = 0.0;
  Interval ci;
  double level = 0.95;
  std::size_t n_used = 0;     // strictly positive observations
  std::size_t n_dropped = 0;  // non-positive or non-finite observations
};

/// Positive finite values sorted in decreasing order.
inline std::vector<double> positive_descending(std::span<const double> data,
                                               std::size_t* dropped = nullptr) {
  std::vector<double> out;
  out.reserve(data.size());
  for (double v : data)
    if (v > 0.0 && std::isfinite(v)) out.push_back(v);
  if (dropped) *dropped = data.size() - out.size();
  std::stable_sort(out.begin(), out.end(), std::greater<>());
  return out;
}

/// index +/- z index / sqrt(k), cut at 0 from below.
inline Interval alpha_ci(const TailFit& fit, double level) {
  const double half = two_sided_z(level) * fit.index / std::sqrt(static_cast<double>(fit.k));
  return {std::max(0.0, fit.index - half), fit.index + half};
}

/// Hill estimate from order statistics already sorted in decreasing order.
inline TailFit hill_from_sorted(std::span<const double> sorted, int k, double level = 0.95,
                                std::size_t n_dropped = 0) {
  const std::size_t n_used = sorted.size();
  if (k < 1 || static_cast<std::size_t>(k) >= n_used) {
    fail(ErrorCode::InsufficientData, "Hill estimator needs 1 <= k < " + std::to_string(n_used) +
                                          " positive observations, got k = " + std::to_string(k));
  }
  const double base = sorted[static_cast<std::size_t>(k)];
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += std::log(sorted[static_cast<std::size_t>(i)] / base);
  if (sum == 0.0) {
    fail(ErrorCode::DegenerateTail, "top " + std::to_string(k + 1) + " order statistics are equal");
  }
  TailFit fit;
  fit.k = k;
  fit.hill = sum / k;
  fit.index = 1.0 / fit.hill;
  fit.se_index = fit.index / std::sqrt(static_cast<double>(k));
  fit.level = level;
  fit.n_used = n_used;
  fit.n_dropped = n_dropped;
  fit.ci = alpha_ci(fit, level);
  return fit;
}

inline TailFit hill_estimate(std::span<const double> data, int k, double level = 0.95) {
  std::size_t dropped = 0;
  const auto sorted = positive_descending(data, &dropped);
  return hill_from_sorted(sorted, k, level, dropped);
}

inline std::vector<double> pairwise_minima(const Matrix& data, int j, int l) {
  if (j == l) fail(ErrorCode::DomainError, "pairwise_minima needs two distinct columns");
  if (j < 0 || l < 0 || j >= data.cols() || l >= data.cols()) {
    fail(ErrorCode::DomainError, "pairwise_minima: column out of range");
  }
  std::vector<double> out(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    out[static_cast<std::size_t>(i)] = std::min(data(i, j), data(i, l));
  return out;
}

/// Tail index of min(X1, X2): the interior-regime formula, or max(a1, a2).
inline double gamma_theoretical(double a1, double a2, double rho) {
  if (classify_regime(a1, a2, rho) != Regime::Interior) return std::max(a1, a2);
  return (a1 + a2 - 2.0 * rho * std::sqrt(a1 * a2)) / (1.0 - rho * rho);
}

inline double rho_discriminant(double a1, double a2, double gamma) {
  return a1 * a2 + gamma * gamma - gamma * (a1 + a2);
}

struct RhoEstimate {
  double rho = 0.0;
  bool clamped = false;
  bool degenerate = false;  // gamma <= max(a1, a2): rho is not identified
};

inline constexpr double kRhoMargin = 1e-9;

/// rho = (sqrt(a1 a2) - sqrt(D)) / gamma, D = a1 a2 + gamma^2 - gamma (a1 + a2).
inline RhoEstimate rho_from_indices(double a1, double a2, double gamma) {
  for (double v : {a1, a2, gamma}) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::DomainError, "rho_from_indices: inputs must be positive");
  }
  RhoEstimate out;
  if (gamma <= std::max(a1, a2)) {
    out.degenerate = true;
    out.clamped = true;
    out.rho = std::min(regime_bound(a1, a2), 1.0 - kRhoMargin);
    return out;
  }
  double disc = rho_discriminant(a1, a2, gamma);
  if (disc < 0.0) {
    disc = 0.0;
    out.clamped = true;
  }
  out.rho = std::clamp((std::sqrt(a1 * a2) - std::sqrt(disc)) / gamma, -1.0 + kRhoMargin,
                       1.0 - kRhoMargin);
  return out;
}

/// (k/n) X_(k)^alpha_hat with X_(k) the k-th largest positive value and n the
/// full sample size.
inline double theta_estimate(std::span<const double> data, int k, double alpha_hat) {
  const auto sorted = positive_descending(data);
  if (k < 1 || static_cast<std::size_t>(k) > sorted.size()) {
    fail(ErrorCode::InsufficientData, "theta_estimate: k exceeds the positive observations");
  }
  if (!(alpha_hat > 0.0)) fail(ErrorCode::DomainError, "theta_estimate: alpha_hat must be positive");
  return static_cast<double>(k) / static_cast<double>(data.size()) *
         std::pow(sorted[static_cast<std::size_t>(k - 1)], alpha_hat);
}

enum class RFunction { R12, R1_12, R2_12 };

enum class RegimePolicy {
  RequireInterior,  // RegimeError unless rho is in the interior regime
  Unchecked,        // evaluate the piecewise formula at any rho
};

/// Limits of t P(Fbar_a(X^a) <= w_a / t, Fbar_b(X^b) <= w_b / t) for the pairs
/// (X1, X2), (X1, min) and (X2, min). gamma is the interior-regime expression.
inline double r_function(RFunction which, double w1, double w2, double a1, double a2, double rho,
                         RegimePolicy policy = RegimePolicy::RequireInterior) {
  if (!(w1 >= 0.0) || !(w2 >= 0.0)) fail(ErrorCode::DomainError, "r_function: w must be non-negative");
  if (!(a1 > 0.0) || !(a2 > 0.0) || !(rho > -1.0 && rho < 1.0)) {
    fail(ErrorCode::DomainError, "r_function: invalid parameters");
  }
  if (policy == RegimePolicy::RequireInterior && classify_regime(a1, a2, rho) != Regime::Interior) {
    fail(ErrorCode::RegimeError, "r_function: rho is outside the interior regime");
  }
  if (which == RFunction::R12) return 0.0;
  const double gamma = (a1 + a2 - 2.0 * rho * std::sqrt(a1 * a2)) / (1.0 - rho * rho);
  const double threshold = std::sqrt((which == RFunction::R1_12 ? a2 : a1) / gamma);
  const double w = which == RFunction::R1_12 ? w1 : w2;
  if (rho < threshold - kRegimeTolerance) return 0.0;
  if (rho <= threshold + kRegimeTolerance) return 0.5 * w;
  return w;
}

struct AsymptoticCovariance {
  Eigen::Matrix3d gamma;
  Eigen::Vector3d mu;
};

/// Limit covariance and mean of sqrt(k1) ((H1, H2, H12) - (1/a1, 1/a2, 1/gamma))
/// for ratios q = (1, k1/k2, k1/k12); lambda and delta are the second-order
/// bias constants and indices of the three tails.
inline AsymptoticCovariance asymptotic_covariance(double a1, double a2, double rho,
                                                  const Eigen::Vector3d& q,
                                                  const Eigen::Vector3d& lambda = Eigen::Vector3d::Zero(),
                                                  const Eigen::Vector3d& delta = Eigen::Vector3d::Zero(),
                                                  RegimePolicy policy = RegimePolicy::RequireInterior) {
  if (q(0) != 1.0 || !(q.array() > 0.0).all()) {
    fail(ErrorCode::DomainError, "asymptotic_covariance: q must be positive with q1 = 1");
  }
  if (policy == RegimePolicy::RequireInterior && classify_regime(a1, a2, rho) != Regime::Interior) {
    fail(ErrorCode::RegimeError, "asymptotic_covariance: rho is outside the interior regime");
  }
  const double g = (a1 + a2 - 2.0 * rho * std::sqrt(a1 * a2)) / (1.0 - rho * rho);
  const double r12 = r_function(RFunction::R12, q(0), q(1), a1, a2, rho, policy);
  const double r1 = r_function(RFunction::R1_12, q(0), q(2), a1, a2, rho, policy);
  const double r2 = r_function(RFunction::R2_12, q(1), q(2), a1, a2, rho, policy);
  AsymptoticCovariance out;
  out.gamma << 1.0 / (a1 * a1), r12 / (a1 * a2), r1 / (a1 * g),  //
      r12 / (a1 * a2), 1.0 / (a2 * a2), r2 / (a2 * g),            //
      r1 / (a1 * g), r2 / (a2 * g), 1.0 / (g * g);
  for (int j = 0; j < 3; ++j) out.mu(j) = std::sqrt(q(j)) * lambda(j) / (1.0 - delta(j));
  return out;
}

/// Gradient of h(a1, a2, gamma) = (sqrt(a1 a2) - sqrt(D)) / gamma.
inline Eigen::Vector3d rho_gradient(double a1, double a2, double gamma) {
  const double disc = rho_discriminant(a1, a2, gamma);
  if (!(disc > 0.0)) fail(ErrorCode::NumericalError, "rho gradient: discriminant is not positive");
  const double s = std::sqrt(a1 * a2);
  const double r = std::sqrt(disc);
  Eigen::Vector3d g;
  g(0) = (a2 / (2.0 * s) - (a2 - gamma) / (2.0 * r)) / gamma;
  g(1) = (a1 / (2.0 * s) - (a1 - gamma) / (2.0 * r)) / gamma;
  g(2) = -(2.0 * gamma - a1 - a2) / (2.0 * r * gamma) - (s - r) / (gamma * gamma);
  return g;
}

/// Central differences of h with the given absolute step.
inline Eigen::Vector3d rho_gradient_fd(double a1, double a2, double gamma, double step = 1e-6) {
  auto h = [](const Eigen::Vector3d& p) {
    return (std::sqrt(p(0) * p(1)) - std::sqrt(rho_discriminant(p(0), p(1), p(2)))) / p(2);
  };
  const Eigen::Vector3d p(a1, a2, gamma);
  Eigen::Vector3d g;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d up = p;
    Eigen::Vector3d down = p;
    up(i) += step;
    down(i) -= step;
    g(i) = (h(up) - h(down)) / (2.0 * step);
  }
  return g;
}

struct RhoCi {
  double rho = 0.0;
  Interval ci;
  double nu = 0.0;          // asymptotic variance of sqrt(k1) (rho_hat - rho)
  double nu_literal = 0.0;  // grad' diag(1/a1^2, 1/a2^2, 1/gamma^2) grad, for comparison
  Eigen::Vector3d gradient;
};

/// Delta-method variance with the Hill variances carried to the index scale:
/// nu = sum_i p_i^2 (dh/dp_i)^2 for p = (a1, a2, gamma).
inline double rho_nu(double a1, double a2, double gamma) {
  const Eigen::Vector3d g = rho_gradient(a1, a2, gamma);
  const Eigen::Vector3d p(a1, a2, gamma);
  return (p.array() * g.array()).square().sum();
}

inline RhoCi rho_ci(double a1, double a2, double gamma, int k1, double level) {
  if (!(a1 > 0.0) || !(a2 > 0.0) || !(gamma > 0.0)) fail(ErrorCode::DomainError, "rho_ci: inputs must be positive");
  if (k1 < 1) fail(ErrorCode::DomainError, "rho_ci: k1 must be positive");
  if (gamma <= std::max(a1, a2)) {
    fail(ErrorCode::RegimeError, "rho_ci: gamma <= max(alpha), rho is not identified");
  }
  const double disc = rho_discriminant(a1, a2, gamma);
  if (!(disc > 0.0)) fail(ErrorCode::NumericalError, "rho_ci: discriminant is not positive");
  RhoCi out;
  out.rho = (std::sqrt(a1 * a2) - std::sqrt(disc)) / gamma;
  if (classify_regime(a1, a2, out.rho) != Regime::Interior) {
    fail(ErrorCode::RegimeError, "rho_ci: estimates are outside the interior regime");
  }
  out.gradient = rho_gradient(a1, a2, gamma);
  out.nu = rho_nu(a1, a2, gamma);
  const Eigen::Vector3d inv(1.0 / a1, 1.0 / a2, 1.0 / gamma);
  out.nu_literal = (inv.array() * out.gradient.array()).square().sum();
  const double half = two_sided_z(level) * std::sqrt(out.nu / k1);
  out.ci = {std::max(-1.0, out.rho - half), std::min(regime_bound(a1, a2), out.rho + half)};
  return out;
}

/// Number of order statistics as a function of the usable sample size.
struct KPolicy {
  enum class Kind { Default, Fixed, Fraction };
  Kind kind = Kind::Default;
  int k = 0;
  double fraction = 0.05;

  static KPolicy fixed(int k) { return {Kind::Fixed, k, 0.0}; }
  static KPolicy fraction_of(double f) { return {Kind::Fraction, 0, f}; }

  /// "1000" is a fixed k; "5%" or "0.05" a fraction; "" or "auto" the default.
  static KPolicy parse(const std::string& text) {
    if (text.empty() || text == "auto") return {};
    try {
      std::size_t used = 0;
      if (text.back() == '%') {
        const double pct = std::stod(text.substr(0, text.size() - 1), &used);
        if (used + 1 != text.size() || !(pct > 0.0 && pct < 100.0)) throw std::invalid_argument(text);
        return fraction_of(pct / 100.0);
      }
      const double v = std::stod(text, &used);
      if (used != text.size() || !(v > 0.0)) throw std::invalid_argument(text);
      if (v < 1.0) return fraction_of(v);
      if (v != std::floor(v)) throw std::invalid_argument(text);
      return fixed(static_cast<int>(v));
    } catch (const std::exception&) {
      fail(ErrorCode::UsageError, "invalid k '" + text + "' (use an integer, a fraction or a percentage)");
    }
  }

  int resolve(std::size_t n_used) const {
    const auto n = static_cast<double>(n_used);
    switch (kind) {
      case Kind::Default:
        return static_cast<int>(std::clamp(std::ceil(0.05 * n), 10.0, std::max(10.0, n - 1.0)));
      case Kind::Fraction:
        return static_cast<int>(std::clamp(std::ceil(fraction * n), 1.0, std::max(1.0, n - 1.0)));
      case Kind::Fixed:
        return k;
    }
    return k;
  }

  std::string describe() const {
    switch (kind) {
      case Kind::Default: return "default: ceil(0.05 n_used) clamped to [10, n_used - 1]";
      case Kind::Fraction: return "fraction " + std::to_string(fraction) + " of n_used";
      case Kind::Fixed: return "fixed k = " + std::to_string(k);
    }
    return "";
  }
};

struct MarginFit {
  int column = 0;
  std::optional<TailFit> fit;
  double theta = 0.0;
  std::size_t n_missing = 0;
  std::optional<ErrorCode> error;
  std::string message;
};

struct PairwiseFit {
  int j = 0;
  int l = 0;
  std::optional<TailFit> gamma_fit;
  double rho_hat = 0.0;
  Regime regime = Regime::Interior;
  std::optional<Interval> rho_ci;
  double nu = 0.0;
  bool clamped = false;
  bool near_boundary = false;
  std::size_t n_complete = 0;
  std::optional<ErrorCode> error;
  std::string message;
};

struct FitReport {
  std::size_t n = 0;
  int d = 0;
  KPolicy k_policy;
  double level = 0.95;
  std::vector<MarginFit> margins;
  std::vector<PairwiseFit> pairs;
  Matrix sigma_raw;
  Matrix sigma_psd;
  bool psd_changed = false;
};

inline constexpr double kNearBoundaryBand = 0.02;
inline constexpr double kPsdFloor = 1e-8;

/// Clip eigenvalues below zero to kPsdFloor, then rescale to unit diagonal.
inline Matrix project_psd(const Matrix& m, bool* changed = nullptr) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  const bool negative = eig.eigenvalues().minCoeff() < 0.0;
  if (changed) *changed = negative;
  if (!negative) return m;
  const Vector clipped = eig.eigenvalues().cwiseMax(kPsdFloor);
  Matrix out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  const Vector scale = out.diagonal().cwiseSqrt().cwiseInverse();
  out = scale.asDiagonal() * out * scale.asDiagonal();
  out = 0.5 * (out + out.transpose());
  out.diagonal().setOnes();
  return out;
}

/// rho within kNearBoundaryBand of the regime bound or of either R-function
/// threshold sqrt(a / gamma).
inline bool near_regime_boundary(double a1, double a2, double rho) {
  const double g = (a1 + a2 - 2.0 * rho * std::sqrt(a1 * a2)) / (1.0 - rho * rho);
  for (double threshold : {regime_bound(a1, a2), std::sqrt(a2 / g), std::sqrt(a1 / g)}) {
    if (std::abs(rho - threshold) < kNearBoundaryBand) return true;
  }
  return false;
}

inline PairwiseFit fit_pair(const Matrix& data, int j, int l, const TailFit& fj, const TailFit& fl,
                            const KPolicy& policy, double level) {
  PairwiseFit pair;
  pair.j = j;
  pair.l = l;
  std::vector<double> minima;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double a = data(i, j);
    const double b = data(i, l);
    if (std::isnan(a) || std::isnan(b)) continue;
    minima.push_back(std::min(a, b));
  }
  pair.n_complete = minima.size();
  std::size_t dropped = 0;
  const auto sorted = positive_descending(minima, &dropped);
  pair.gamma_fit = hill_from_sorted(sorted, policy.resolve(sorted.size()), level, dropped);
  const double a1 = fj.index;
  const double a2 = fl.index;
  const double g = pair.gamma_fit->index;
  const RhoEstimate est = rho_from_indices(a1, a2, g);
  pair.rho_hat = est.rho;
  pair.clamped = est.clamped;
  pair.regime = est.degenerate ? Regime::Degenerate : classify_regime(a1, a2, est.rho);
  pair.near_boundary = near_regime_boundary(a1, a2, est.rho);
  if (pair.regime == Regime::Interior && !est.clamped) {
    const RhoCi ci = rho_ci(a1, a2, g, fj.k, level);
    pair.rho_ci = ci.ci;
    pair.nu = ci.nu;
  }
  return pair;
}

/// Marginal fits use each column's non-missing values; pair fits use the
/// rows where both columns are present. NaN marks a missing value. Failures
/// of single margins or pairs are recorded, not thrown.
inline FitReport fit_pgc(const Matrix& data, const KPolicy& policy = {}, double level = 0.95,
                         int threads = 1) {
  FitReport report;
  report.n = static_cast<std::size_t>(data.rows());
  report.d = static_cast<int>(data.cols());
  report.k_policy = policy;
  report.level = level;
  two_sided_z(level);
  if (data.cols() < 1) fail(ErrorCode::EmptyData, "fit_pgc: no columns");
  if (data.rows() < 50) fail(ErrorCode::InsufficientData, "fit_pgc needs at least 50 rows");

  const int d = report.d;
  report.margins.resize(static_cast<std::size_t>(d));
  parallel_chunks(static_cast<std::size_t>(d), threads, [&](std::size_t c) {
    MarginFit& m = report.margins[c];
    m.column = static_cast<int>(c);
    std::vector<double> column;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const double v = data(i, static_cast<Eigen::Index>(c));
      if (std::isnan(v)) ++m.n_missing;
      else column.push_back(v);
    }
    try {
      std::size_t dropped = 0;
      const auto sorted = positive_descending(column, &dropped);
      m.fit = hill_from_sorted(sorted, policy.resolve(sorted.size()), level, dropped);
      m.theta = theta_estimate(column, m.fit->k, m.fit->index);
    } catch (const Error& e) {
      m.fit.reset();
      m.error = e.code();
      m.message = e.detail();
    }
  });

  std::vector<std::pair<int, int>> index_pairs;
  for (int j = 0; j < d; ++j)
    for (int l = j + 1; l < d; ++l) index_pairs.emplace_back(j, l);
  report.pairs.resize(index_pairs.size());
  parallel_chunks(index_pairs.size(), threads, [&](std::size_t c) {
    const auto [j, l] = index_pairs[c];
    PairwiseFit& pair = report.pairs[c];
    pair.j = j;
    pair.l = l;
    const auto& mj = report.margins[static_cast<std::size_t>(j)];
    const auto& ml = report.margins[static_cast<std::size_t>(l)];
    if (!mj.fit || !ml.fit) {
      pair.error = ErrorCode::DegenerateTail;
      pair.message = "a marginal fit failed for this pair";
      return;
    }
    try {
      pair = fit_pair(data, j, l, *mj.fit, *ml.fit, policy, level);
    } catch (const Error& e) {
      pair.gamma_fit.reset();
      pair.rho_ci.reset();
      pair.error = e.code();
      pair.message = e.detail();
    }
  });

  report.sigma_raw = Matrix::Identity(d, d);
  for (const auto& pair : report.pairs) {
    const double v = pair.error ? 0.0 : pair.rho_hat;
    report.sigma_raw(pair.j, pair.l) = v;
    report.sigma_raw(pair.l, pair.j) = v;
  }
  report.sigma_psd = project_psd(report.sigma_raw, &report.psd_changed);
  return report;
}

}  // namespace pgc
