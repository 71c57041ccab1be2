#pragma once

// Plot-ready diagnostics (Hill and rho stability series, exponential QQ with a
// bootstrap band) and Monte Carlo oracles for joint tails and R functions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "pgc/estimation.hpp"

namespace pgc {

struct SeriesWithBands {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // NaN where no band is defined
  std::vector<double> hi;
  std::vector<std::string> flags;  // per point, empty when nothing to report
  std::string label;
  std::string method;
  double level = 0.95;

  std::size_t size() const { return x.size(); }
};

/// Index estimate and alpha_ci for every k in [k_min, k_max].
inline SeriesWithBands hill_series(std::span<const double> data, int k_min, int k_max, double level = 0.95) {
  const auto sorted = positive_descending(data);
  if (k_min < 2 || k_max < k_min || static_cast<std::size_t>(k_max) >= sorted.size()) {
    fail(ErrorCode::InsufficientData, "hill_series needs 2 <= k_min <= k_max < " +
                                          std::to_string(sorted.size()) + " positive observations");
  }
  const double z = two_sided_z(level);
  SeriesWithBands out;
  out.label = "hill";
  out.method = "Hill estimator with normal-approximation band index +/- z index / sqrt(k)";
  out.level = level;
  const double top = std::log(sorted[0]);
  double prefix = 0.0;  // sum of log(Z_i) - log(Z_1) over i < k
  for (int k = 1; k <= k_max; ++k) {
    prefix += std::log(sorted[static_cast<std::size_t>(k - 1)]) - top;
    if (k < k_min) continue;
    const double sum = prefix - k * (std::log(sorted[static_cast<std::size_t>(k)]) - top);
    out.x.push_back(k);
    if (!(sum > 0.0)) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out.y.push_back(nan);
      out.lo.push_back(nan);
      out.hi.push_back(nan);
      out.flags.emplace_back("DegenerateTail");
      continue;
    }
    const double index = k / sum;
    const double half = z * index / std::sqrt(static_cast<double>(k));
    out.y.push_back(index);
    out.lo.push_back(std::max(0.0, index - half));
    out.hi.push_back(index + half);
    out.flags.emplace_back();
  }
  return out;
}

/// rho_hat at every k in [k_min, k_max], with the same k for both margins and
/// the minima. Points outside the interior regime carry no band and a flag;
/// interior points near a regime threshold are marked near_boundary.
inline SeriesWithBands rho_series(const Matrix& data, int j, int l, int k_min, int k_max,
                                  double level = 0.95) {
  if (j == l || j < 0 || l < 0 || j >= data.cols() || l >= data.cols()) {
    fail(ErrorCode::DomainError, "rho_series needs two distinct valid columns");
  }
  auto column = [&](int c) {
    std::vector<double> v;
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      if (!std::isnan(data(i, c))) v.push_back(data(i, c));
    return positive_descending(v);
  };
  std::vector<double> minima;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (std::isnan(data(i, j)) || std::isnan(data(i, l))) continue;
    minima.push_back(std::min(data(i, j), data(i, l)));
  }
  const auto s1 = column(j);
  const auto s2 = column(l);
  const auto s12 = positive_descending(minima);
  const std::size_t n_min = std::min({s1.size(), s2.size(), s12.size()});
  if (k_min < 2 || k_max < k_min || static_cast<std::size_t>(k_max) >= n_min) {
    fail(ErrorCode::InsufficientData, "rho_series needs 2 <= k_min <= k_max < " + std::to_string(n_min));
  }
  SeriesWithBands out;
  out.label = "rho";
  out.method = "closed-form rho from Hill indices; delta-method band";
  out.level = level;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = k_min; k <= k_max; ++k) {
    out.x.push_back(k);
    try {
      const double a1 = hill_from_sorted(s1, k, level).index;
      const double a2 = hill_from_sorted(s2, k, level).index;
      const double g = hill_from_sorted(s12, k, level).index;
      const RhoEstimate est = rho_from_indices(a1, a2, g);
      out.y.push_back(est.rho);
      const Regime regime = est.degenerate ? Regime::Degenerate : classify_regime(a1, a2, est.rho);
      if (regime == Regime::Interior && !est.clamped) {
        const RhoCi ci = rho_ci(a1, a2, g, k, level);
        out.lo.push_back(ci.ci.lo);
        out.hi.push_back(ci.ci.hi);
        out.flags.emplace_back(near_regime_boundary(a1, a2, est.rho) ? "Interior,near_boundary" : "");
      } else {
        out.lo.push_back(nan);
        out.hi.push_back(nan);
        out.flags.push_back(std::string(regime_name(regime)) + (est.clamped ? ",clamped" : ""));
      }
    } catch (const Error& e) {
      out.y.push_back(nan);
      out.lo.push_back(nan);
      out.hi.push_back(nan);
      out.flags.emplace_back(to_string(e.code()));
    }
  }
  return out;
}

struct QqResult {
  SeriesWithBands series;         // y holds the fitted line, lo/hi the band
  std::vector<double> observed;   // log of the sorted data, aligned with series.x
  double slope = 0.0;             // estimate of 1 / alpha
  double intercept = 0.0;
  int replicates = 0;
};

inline constexpr int kQqReplicates = 999;

/// Exponential QQ data for the top m = floor(top_fraction n_used) points:
/// x = -log(i / (m + 1)), observed = log of the i-th largest value, in
/// increasing x. The band is the pointwise envelope of kQqReplicates
/// parametric bootstrap samples: sorted standard exponential samples of size
/// m, centred by their expected order statistics and mapped through the
/// fitted line.
inline QqResult exp_qq(std::span<const double> data, double top_fraction, double level,
                       const RandomStream& stream) {
  if (!(top_fraction > 0.0 && top_fraction <= 0.2)) {
    fail(ErrorCode::DomainError, "exp_qq: top fraction must be in (0, 0.2]");
  }
  two_sided_z(level);
  const auto sorted = positive_descending(data);
  const auto m = static_cast<std::size_t>(std::floor(top_fraction * static_cast<double>(sorted.size())));
  if (m < 30) fail(ErrorCode::InsufficientData, "exp_qq needs at least 30 points in the top fraction");

  QqResult out;
  out.replicates = kQqReplicates;
  out.series.label = "exp_qq";
  out.series.method = "parametric bootstrap envelope, 999 exponential samples";
  out.series.level = level;
  const double md = static_cast<double>(m);
  // Position p = 0..m-1 in increasing x corresponds to rank i = m - p.
  std::vector<double> expected(m);  // E of the i-th largest of m standard exponentials
  double acc = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    const std::size_t i = m - p;
    acc += 1.0 / static_cast<double>(i);
    expected[p] = acc;
    out.series.x.push_back(-std::log(static_cast<double>(i) / (md + 1.0)));
    out.observed.push_back(std::log(sorted[i - 1]));
  }
  const auto& x = out.series.x;
  const auto& y = out.observed;
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    mx += x[p];
    my += y[p];
  }
  mx /= md;
  my /= md;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    sxy += (x[p] - mx) * (y[p] - my);
    sxx += (x[p] - mx) * (x[p] - mx);
  }
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;

  std::vector<std::vector<double>> sims(m, std::vector<double>(kQqReplicates));
  RandomStream rng = stream;
  std::vector<double> e(m);
  for (int r = 0; r < kQqReplicates; ++r) {
    for (auto& v : e) v = -std::log(rng.uniform());
    std::sort(e.begin(), e.end());
    for (std::size_t p = 0; p < m; ++p) {
      sims[p][static_cast<std::size_t>(r)] =
          out.intercept + out.slope * (x[p] + e[p] - expected[p]);
    }
  }
  auto quantile = [](std::vector<double>& v, double prob) {
    const double pos = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return hi == lo ? a : a + (pos - static_cast<double>(lo)) * (b - a);
  };
  for (std::size_t p = 0; p < m; ++p) {
    out.series.y.push_back(out.intercept + out.slope * x[p]);
    out.series.lo.push_back(quantile(sims[p], 0.5 * (1.0 - level)));
    out.series.hi.push_back(quantile(sims[p], 0.5 * (1.0 + level)));
    out.series.flags.emplace_back();
  }
  return out;
}

struct McEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t n_draws = 0;
  std::string note;
};

inline constexpr std::uint64_t kMcChunkDraws = 1u << 16;

/// Counts draws with Z_j > threshold_j for all j, Z ~ N(0, Sigma), split into
/// fixed chunks on child streams so the count does not depend on `threads`.
inline std::uint64_t mc_orthant_hits(const Matrix& lower, const std::vector<double>& thresholds,
                                     std::uint64_t n_draws, const RandomStream& stream, int threads) {
  const auto d = static_cast<int>(lower.rows());
  const std::uint64_t chunks = (n_draws + kMcChunkDraws - 1) / kMcChunkDraws;
  std::vector<std::uint64_t> counts(chunks, 0);
  parallel_chunks(chunks, threads, [&](std::size_t c) {
    RandomStream local = stream.split(c);
    const std::uint64_t begin = c * kMcChunkDraws;
    const std::uint64_t end = std::min(n_draws, begin + kMcChunkDraws);
    std::vector<double> normal(static_cast<std::size_t>(d));
    std::uint64_t hits = 0;
    for (std::uint64_t draw = begin; draw < end; ++draw) {
      for (auto& v : normal) v = local.normal();
      bool all = true;
      for (int j = 0; j < d && all; ++j) {
        double zj = 0.0;
        for (int p = 0; p <= j; ++p) zj += lower(j, p) * normal[static_cast<std::size_t>(p)];
        all = zj > thresholds[static_cast<std::size_t>(j)];
      }
      hits += all ? 1 : 0;
    }
    counts[c] = hits;
  });
  std::uint64_t total = 0;
  for (auto h : counts) total += h;
  return total;
}

/// Gaussian threshold equivalent to X_j > x for margin m.
inline double score_threshold(const MarginalSpec& m, double x) {
  const double s = m.survival_or_one(x);
  if (s >= 1.0) return -std::numeric_limits<double>::infinity();
  if (s <= 0.0) return std::numeric_limits<double>::infinity();
  return std_normal_upper_quantile(s);
}

inline McEstimate mc_joint_tail(const PgcModel& model, double t, const Vector& x, std::uint64_t n_draws,
                                const RandomStream& stream, int threads = 1) {
  if (n_draws < 10'000) fail(ErrorCode::DomainError, "mc_joint_tail needs at least 10^4 draws");
  if (x.size() != model.dim()) fail(ErrorCode::DimensionMismatch, "mc_joint_tail: x has the wrong length");
  if (!(t > 0.0)) fail(ErrorCode::DomainError, "mc_joint_tail: t must be positive");
  std::vector<double> thresholds;
  for (int j = 0; j < model.dim(); ++j) {
    if (!(x(j) > 0.0)) fail(ErrorCode::DomainError, "mc_joint_tail: x must be positive");
    thresholds.push_back(score_threshold(model.marginal(j), t * x(j)));
  }
  McEstimate out;
  out.n_draws = n_draws;
  out.hits = mc_orthant_hits(model.cholesky_factor(), thresholds, n_draws, stream, threads);
  const double n = static_cast<double>(n_draws);
  out.estimate = static_cast<double>(out.hits) / n;
  out.standard_error = std::sqrt(out.estimate * (1.0 - out.estimate) / n);
  return out;
}

enum class GbarMethod { EmpiricalPrepass, Asymptotic };

struct McROptions {
  GbarMethod gbar = GbarMethod::EmpiricalPrepass;
  std::uint64_t prepass_draws = 10'000'000;
  int threads = 1;
};

namespace detail {

/// Upper q-quantile of min(X1, X2) from a simulated pre-pass, cached by model
/// fingerprint, stream, pre-pass size and q.
inline double empirical_min_quantile(const PgcModel& model, double q, std::uint64_t draws,
                                     const RandomStream& stream, int threads) {
  using Key = std::tuple<std::string, std::uint64_t, std::uint64_t, std::uint64_t, double>;
  static std::map<Key, double> cache;
  static std::mutex mutex;
  const Key key{model.fingerprint(), stream.seed(), stream.stream_id(), draws, q};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(draws)));
  if (rank < 1 || rank >= draws) {
    fail(ErrorCode::DomainError, "pre-pass too small for the requested tail level");
  }
  const SampleMatrix s = sample(model, draws, stream, threads);
  std::vector<double> minima(static_cast<std::size_t>(draws));
  for (std::size_t i = 0; i < minima.size(); ++i)
    minima[i] = std::min(s.values(static_cast<Eigen::Index>(i), 0), s.values(static_cast<Eigen::Index>(i), 1));
  std::nth_element(minima.begin(), minima.begin() + static_cast<std::ptrdiff_t>(rank - 1), minima.end(),
                   std::greater<>());
  const double value = minima[rank - 1];
  std::lock_guard lock(mutex);
  cache.emplace(key, value);
  return value;
}

/// y with Psi y^-gamma (log y)^log_power = q, from the two-margin asymptotic.
inline double asymptotic_min_quantile(const PgcModel& model, double q) {
  const TailAsymptotic a = bivariate_tail_asymptotic(model.marginal(0).alpha(), model.marginal(1).alpha(),
                                                     model.marginal(0).theta(), model.marginal(1).theta(),
                                                     model.sigma()(0, 1));
  auto f = [&](double u) {  // u = log y
    return std::log(a.psi) - a.gamma * u + a.log_power * std::log(u) - std::log(q);
  };
  double lo = 1.0 + 1e-9;
  double hi = 2.0;
  if (f(lo) < 0.0) fail(ErrorCode::DomainError, "asymptotic minimum quantile: q too large");
  while (f(hi) > 0.0) hi *= 2.0;
  boost::uintmax_t iterations = kMaxRootIterations;
  auto tol = [](double a1, double b1) { return std::abs(a1 - b1) <= kRootRelativeWidth; };
  const auto [a1, b1] = boost::math::tools::toms748_solve(f, lo, hi, tol, iterations);
  return std::exp(0.5 * (a1 + b1));
}

}  // namespace detail

inline std::string_view r_function_name(RFunction which) {
  switch (which) {
    case RFunction::R12: return "R12";
    case RFunction::R1_12: return "R1_12";
    case RFunction::R2_12: return "R2_12";
  }
  return "";
}

/// Finite-t value t P(Fbar_A(A) <= w1 / t, Fbar_B(B) <= w2 / t) with (A, B) =
/// (X1, X2), (X1, min) or (X2, min), on a two-margin interior-regime model.
inline McEstimate mc_r_function(const PgcModel& model, RFunction which, double w1, double w2, double t,
                                std::uint64_t n_draws, const RandomStream& stream, const McROptions& options = {}) {
  if (model.dim() != 2) fail(ErrorCode::DimensionMismatch, "mc_r_function needs a two-margin model");
  const double a1 = model.marginal(0).alpha();
  const double a2 = model.marginal(1).alpha();
  if (classify_regime(a1, a2, model.sigma()(0, 1)) != Regime::Interior) {
    fail(ErrorCode::RegimeError, "mc_r_function: model is outside the interior regime");
  }
  if (!(w1 >= 0.0) || !(w2 >= 0.0) || !(t > 0.0)) fail(ErrorCode::DomainError, "mc_r_function: invalid w or t");
  if (n_draws < 10'000) fail(ErrorCode::DomainError, "mc_r_function needs at least 10^4 draws");
  McEstimate out;
  out.n_draws = n_draws;
  if (w1 == 0.0 || w2 == 0.0) {
    out.note = "empty event";
    return out;
  }
  const double inf = std::numeric_limits<double>::infinity();
  auto gauss = [&](double q) { return q >= 1.0 ? -inf : std_normal_upper_quantile(q); };
  std::vector<double> thresholds(2);
  if (which == RFunction::R12) {
    thresholds = {gauss(w1 / t), gauss(w2 / t)};
  } else {
    const double q = w2 / t;
    double y_star = 0.0;
    if (options.gbar == GbarMethod::EmpiricalPrepass) {
      y_star = detail::empirical_min_quantile(model, q, options.prepass_draws, stream.split(~0ULL), options.threads);
      out.note = "Gbar from empirical pre-pass of " + std::to_string(options.prepass_draws) + " draws";
    } else {
      y_star = detail::asymptotic_min_quantile(model, q);
      out.note = "Gbar from the joint-tail asymptotic";
    }
    // min(X1, X2) >= y* means both scores exceed their y* thresholds.
    const double z1 = score_threshold(model.marginal(0), y_star);
    const double z2 = score_threshold(model.marginal(1), y_star);
    const auto own = static_cast<std::size_t>(which == RFunction::R1_12 ? 0 : 1);
    thresholds = {z1, z2};
    thresholds[own] = std::max(thresholds[own], gauss(w1 / t));
  }
  out.hits = mc_orthant_hits(model.cholesky_factor(), thresholds, n_draws, stream, options.threads);
  const double n = static_cast<double>(n_draws);
  const double p = static_cast<double>(out.hits) / n;
  out.estimate = t * p;
  out.standard_error = t * std::sqrt(p * (1.0 - p) / n);
  return out;
}

}  // namespace pgc
