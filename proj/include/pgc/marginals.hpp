#pragma once

// Univariate power-law tailed families. Every family exposes survival, CDF and
// quantile functions plus its tail triple: the index alpha, the scale theta in
// survival(x) ~ theta * x^-alpha, and the second-order index (absent for the
// exact Pareto law).

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgc/error.hpp"

namespace pgc {

enum class Family { Pareto, Burr, Frechet, GPD, HallWeiss, InverseGamma, LogGammaStar, StudentT };

constexpr std::string_view family_name(Family f) {
  switch (f) {
    case Family::Pareto: return "pareto";
    case Family::Burr: return "burr";
    case Family::Frechet: return "frechet";
    case Family::GPD: return "gpd";
    case Family::HallWeiss: return "hallweiss";
    case Family::InverseGamma: return "invgamma";
    case Family::LogGammaStar: return "loggamma";
    case Family::StudentT: return "studentt";
  }
  return "unknown";
}

inline Family parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  std::erase(lower, '-');
  std::erase(lower, '_');
  if (lower == "pareto") return Family::Pareto;
  if (lower == "burr") return Family::Burr;
  if (lower == "frechet") return Family::Frechet;
  if (lower == "gpd" || lower == "generalizedpareto") return Family::GPD;
  if (lower == "hallweiss") return Family::HallWeiss;
  if (lower == "invgamma" || lower == "inversegamma") return Family::InverseGamma;
  if (lower == "loggamma" || lower == "loggammastar") return Family::LogGammaStar;
  if (lower == "studentt" || lower == "t" || lower == "student") return Family::StudentT;
  fail(ErrorCode::DomainError, "unknown marginal family '" + std::string(name) + "'");
}

struct TailTriple {
  double alpha = 0.0;
  double theta = 0.0;
  std::optional<double> delta2rv;
};

inline constexpr int kMaxRootIterations = 200;
inline constexpr double kRootRelativeWidth = 1e-12;
// Beyond this |x| the t survival equals theta |x|^-nu to double precision.
inline constexpr double kStudentTailSwitch = 1e20;

/// One marginal law. Parameter order in text and JSON form:
///   pareto:alpha           burr:beta,sigma          frechet:beta[,mu[,sigma]]
///   gpd:xi[,mu[,sigma]]    hallweiss:beta,sigma     invgamma:beta,sigma
///   loggamma:beta          studentt:nu
class MarginalSpec {
 public:
  static MarginalSpec make(Family family, std::vector<double> params) {
    MarginalSpec spec(family, std::move(params));
    spec.validate_and_derive();
    return spec;
  }

  static MarginalSpec pareto(double alpha) { return make(Family::Pareto, {alpha}); }
  static MarginalSpec burr(double beta, double sigma) { return make(Family::Burr, {beta, sigma}); }
  static MarginalSpec frechet(double beta, double mu = 0.0, double sigma = 1.0) {
    return make(Family::Frechet, {beta, mu, sigma});
  }
  static MarginalSpec gpd(double xi, double mu = 0.0, double sigma = 1.0) {
    return make(Family::GPD, {xi, mu, sigma});
  }
  static MarginalSpec hall_weiss(double beta, double sigma) {
    return make(Family::HallWeiss, {beta, sigma});
  }
  static MarginalSpec inverse_gamma(double beta, double sigma) {
    return make(Family::InverseGamma, {beta, sigma});
  }
  static MarginalSpec log_gamma_star(double beta) { return make(Family::LogGammaStar, {beta}); }
  static MarginalSpec student_t(double nu) { return make(Family::StudentT, {nu}); }

  /// Parses `family:p1[,p2[,p3]]`.
  static MarginalSpec parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
      fail(ErrorCode::DomainError, "marginal spec '" + std::string(text) + "' lacks ':'");
    }
    const Family family = parse_family(text.substr(0, colon));
    std::vector<double> params;
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string token(rest.substr(0, comma));
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != token.size()) {
        fail(ErrorCode::DomainError, "bad marginal parameter '" + token + "'");
      }
      params.push_back(value);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return make(family, std::move(params));
  }

  std::string to_string() const {
    std::string out(family_name(family_));
    out += ':';
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (i) out += ',';
      std::array<char, 32> buf{};
      auto res = std::to_chars(buf.data(), buf.data() + buf.size(), params_[i]);
      out.append(buf.data(), res.ptr);
    }
    return out;
  }

  Family family() const { return family_; }
  std::span<const double> params() const { return params_; }
  const TailTriple& tail() const { return tail_; }
  double alpha() const { return tail_.alpha; }
  double theta() const { return tail_.theta; }
  std::optional<double> delta2rv() const { return tail_.delta2rv; }

  /// False only for the log-gamma* law, whose survival carries a log factor,
  /// so theta is a nominal 1 rather than a true power-law constant.
  bool has_power_law_constant() const { return family_ != Family::LogGammaStar; }

  /// Infimum of the support (where the CDF vanishes); -inf for Student's t.
  double support_lower() const { return lower_; }

  bool in_support(double x) const { return !std::isnan(x) && x >= lower_ && x < INFINITY; }

  double survival(double x) const {
    require_support(x);
    return survival_unchecked(x);
  }

  double cdf(double x) const {
    require_support(x);
    return cdf_unchecked(x);
  }

  /// Survival that saturates at 1 below the support instead of throwing.
  double survival_or_one(double x) const {
    if (std::isnan(x)) fail(ErrorCode::DomainError, "survival of NaN");
    if (x <= lower_) return 1.0;
    return survival_unchecked(x);
  }

  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) {
      fail(ErrorCode::DomainError, "quantile: p = " + std::to_string(p) + " not in (0,1)");
    }
    const double* par = params_.data();
    switch (family_) {
      case Family::Pareto:
        return std::exp(-std::log1p(-p) / par[0]);
      case Family::Burr:
        return std::pow(std::expm1(-std::log1p(-p) / par[0]), 1.0 / par[1]);
      case Family::Frechet:
        return par[1] + par[2] * std::pow(-std::log(p), -1.0 / par[0]);
      case Family::GPD:
        return par[1] + par[2] * std::expm1(-par[0] * std::log1p(-p)) / par[0];
      case Family::StudentT:
        if (p < 0.5) return -upper_quantile(p);
        break;
      default:
        if (1.0 - p == 1.0) return lower_;
        break;
    }
    return upper_quantile(1.0 - p);
  }

  /// x with survival(x) == q. Accurate in the far tail because q is used as is.
  double upper_quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) {
      fail(ErrorCode::DomainError, "upper_quantile: q = " + std::to_string(q) + " not in (0,1)");
    }
    const double* p = params_.data();
    switch (family_) {
      case Family::Pareto:
        return std::exp(-std::log(q) / p[0]);
      case Family::Burr:
        return std::pow(std::expm1(-std::log(q) / p[0]), 1.0 / p[1]);
      case Family::Frechet: {
        const double s = -std::log1p(-q);
        return p[1] + p[2] * std::pow(s, -1.0 / p[0]);
      }
      case Family::GPD:
        return p[1] + p[2] * std::expm1(-p[0] * std::log(q)) / p[0];
      case Family::StudentT:
        if (q == 0.5) return 0.0;
        if (q > 0.5) return -solve_positive_survival(1.0 - q, 0.0);
        return solve_positive_survival(q, 0.0);
      case Family::HallWeiss:
      case Family::InverseGamma:
      case Family::LogGammaStar:
        return solve_positive_survival(q, lower_);
    }
    return NAN;
  }

  /// Local second-order index read off the survival function: with
  /// r(x) = survival(x) x^alpha / theta - 1 ~ c x^delta, returns
  /// log2(r(2x) / r(x)) at x = upper_quantile(1e-4). Empty for exact Pareto.
  std::optional<double> numeric_second_order_index() const {
    if (family_ == Family::Pareto) return std::nullopt;
    const double x = upper_quantile(1e-4);
    auto r = [&](double y) {
      return std::expm1(std::log(survival_unchecked(y)) + tail_.alpha * std::log(y) -
                        std::log(tail_.theta));
    };
    const double r1 = r(x);
    const double r2 = r(2.0 * x);
    if (r1 == 0.0 || r2 == 0.0 || (r1 > 0.0) != (r2 > 0.0)) return std::nullopt;
    return std::log2(r2 / r1);
  }

  friend bool operator==(const MarginalSpec& a, const MarginalSpec& b) {
    return a.family_ == b.family_ && a.params_ == b.params_;
  }

 private:
  MarginalSpec(Family family, std::vector<double> params)
      : family_(family), params_(std::move(params)) {}

  void require_support(double x) const {
    if (!in_support(x)) {
      fail(ErrorCode::DomainError, "x = " + std::to_string(x) + " outside the support of " +
                                       to_string());
    }
  }

  void require_count(std::size_t min_count, std::size_t max_count) const {
    if (params_.size() < min_count || params_.size() > max_count) {
      fail(ErrorCode::DomainError,
           std::string(family_name(family_)) + " takes " + std::to_string(min_count) + "-" +
               std::to_string(max_count) + " parameters, got " + std::to_string(params_.size()));
    }
  }

  void require_positive(std::size_t i, const char* what) const {
    if (!(params_[i] > 0.0) || !std::isfinite(params_[i])) {
      fail(ErrorCode::DomainError, std::string(family_name(family_)) + ": " + what +
                                       " must be positive and finite");
    }
  }

  void validate_and_derive() {
    switch (family_) {
      case Family::Pareto:
        require_count(1, 1);
        require_positive(0, "alpha");
        lower_ = 1.0;
        tail_ = {params_[0], 1.0, std::nullopt};
        break;
      case Family::Burr:
        require_count(2, 2);
        require_positive(0, "beta");
        require_positive(1, "sigma");
        lower_ = 0.0;
        // Delta recorded as tabulated (-beta); see numeric_second_order_index().
        tail_ = {params_[0] * params_[1], 1.0, -params_[0]};
        break;
      case Family::Frechet:
      case Family::GPD:
        require_count(1, 3);
        if (params_.size() < 2) params_.push_back(0.0);
        if (params_.size() < 3) params_.push_back(1.0);
        require_positive(0, "shape");
        require_positive(2, "scale");
        if (!std::isfinite(params_[1])) fail(ErrorCode::DomainError, "location must be finite");
        lower_ = params_[1];
        if (family_ == Family::Frechet) {
          tail_ = {params_[0], std::pow(params_[2], params_[0]), -params_[0]};
        } else {
          tail_ = {1.0 / params_[0], std::pow(params_[2] / params_[0], 1.0 / params_[0]), -1.0};
        }
        break;
      case Family::HallWeiss: {
        require_count(2, 2);
        require_positive(0, "beta");
        require_positive(1, "sigma");
        tail_ = {params_[0], 0.5, -params_[1]};
        // Lower end: the root of 1/2 x^-beta (1 + x^-sigma) = 1 (below it the
        // tabulated CDF is negative).
        lower_ = std::exp(solve_log_root(
            [this](double u) { return std::log(hall_weiss_sf(std::exp(u))); }, -50.0, 50.0));
        break;
      }
      case Family::InverseGamma:
        require_count(2, 2);
        require_positive(0, "beta");
        require_positive(1, "sigma");
        lower_ = 0.0;
        tail_ = {params_[0], std::pow(params_[1], params_[0]) / std::tgamma(params_[0] + 1.0),
                 -1.0};
        break;
      case Family::LogGammaStar: {
        require_count(1, 1);
        require_positive(0, "beta");
        tail_ = {params_[0], 1.0, 0.0};
        // x^-beta (1 + log x) equals 1 at x = 1 and peaks at exp(1/beta - 1);
        // the support starts at the last crossing of 1.
        const double peak_log = std::max(0.0, 1.0 / params_[0] - 1.0);
        if (peak_log == 0.0) {
          lower_ = 1.0;
        } else {
          const double beta = params_[0];
          auto log_sf = [beta](double u) { return -beta * u + std::log1p(u); };
          double hi = 2.0 * peak_log + 1.0;
          while (log_sf(hi) > 0.0) hi *= 2.0;
          lower_ = std::exp(solve_log_root(log_sf, peak_log, hi));
        }
        break;
      }
      case Family::StudentT:
        require_count(1, 1);
        require_positive(0, "nu");
        lower_ = -INFINITY;
        {
          const double nu = params_[0];
          const double log_theta = std::lgamma(0.5 * (nu + 1.0)) + (0.5 * nu - 1.0) * std::log(nu) -
                                   0.5 * std::log(std::numbers::pi) - std::lgamma(0.5 * nu);
          tail_ = {nu, std::exp(log_theta), -2.0};
        }
        break;
    }
  }

  double hall_weiss_sf(double x) const {
    return 0.5 * std::pow(x, -params_[0]) * (1.0 + std::pow(x, -params_[1]));
  }

  double survival_unchecked(double x) const {
    const double* p = params_.data();
    switch (family_) {
      case Family::Pareto:
        return std::exp(-p[0] * std::log(x));
      case Family::Burr:
        if (x <= 0.0) return 1.0;
        return std::exp(-p[0] * std::log1p(std::pow(x, p[1])));
      case Family::Frechet: {
        if (x <= p[1]) return 1.0;
        return -std::expm1(-std::pow((x - p[1]) / p[2], -p[0]));
      }
      case Family::GPD:
        return std::exp(-std::log1p(p[0] * (x - p[1]) / p[2]) / p[0]);
      case Family::HallWeiss:
        return std::min(1.0, hall_weiss_sf(x));
      case Family::InverseGamma:
        if (x <= 0.0) return 1.0;
        return boost::math::gamma_p(p[0], p[1] / x);
      case Family::LogGammaStar:
        return std::min(1.0, std::pow(x, -p[0]) * (1.0 + std::log(x)));
      case Family::StudentT:
        if (x > kStudentTailSwitch) return tail_.theta * std::exp(-p[0] * std::log(x));
        if (x < -kStudentTailSwitch) return -std::expm1(std::log(tail_.theta) - p[0] * std::log(-x));
        return boost::math::cdf(
            boost::math::complement(boost::math::students_t_distribution<double>(p[0]), x));
    }
    return NAN;
  }

  double cdf_unchecked(double x) const {
    const double* p = params_.data();
    switch (family_) {
      case Family::Pareto:
        return -std::expm1(-p[0] * std::log(x));
      case Family::Burr:
        if (x <= 0.0) return 0.0;
        return -std::expm1(-p[0] * std::log1p(std::pow(x, p[1])));
      case Family::Frechet:
        if (x <= p[1]) return 0.0;
        return std::exp(-std::pow((x - p[1]) / p[2], -p[0]));
      case Family::GPD:
        return -std::expm1(-std::log1p(p[0] * (x - p[1]) / p[2]) / p[0]);
      case Family::HallWeiss:
        return std::max(0.0, 1.0 - hall_weiss_sf(x));
      case Family::InverseGamma:
        if (x <= 0.0) return 0.0;
        return boost::math::gamma_q(p[0], p[1] / x);
      case Family::LogGammaStar:
        return std::max(0.0, 1.0 - std::pow(x, -p[0]) * (1.0 + std::log(x)));
      case Family::StudentT:
        if (x < -kStudentTailSwitch) return tail_.theta * std::exp(-p[0] * std::log(-x));
        if (x > kStudentTailSwitch) return -std::expm1(std::log(tail_.theta) - p[0] * std::log(x));
        return boost::math::cdf(boost::math::students_t_distribution<double>(p[0]), x);
    }
    return NAN;
  }

  // Root of a decreasing function of u = log x on [lo, hi], to an absolute
  // width of kRootRelativeWidth in u (a relative width in x).
  template <class F>
  static double solve_log_root(F f, double lo, double hi) {
    boost::uintmax_t iterations = kMaxRootIterations;
    auto tol = [](double a, double b) { return std::abs(a - b) <= kRootRelativeWidth; };
    const double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) fail(ErrorCode::ConvergenceError, "root is not bracketed");
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iterations);
    if (iterations >= static_cast<boost::uintmax_t>(kMaxRootIterations)) {
      fail(ErrorCode::ConvergenceError, "root finding exceeded " +
                                            std::to_string(kMaxRootIterations) + " iterations");
    }
    return 0.5 * (a + b);
  }

  // log survival(e^u) for the root-found families, kept finite far past the
  // point where survival itself underflows.
  double log_survival_at(double u) const {
    const double* p = params_.data();
    switch (family_) {
      case Family::HallWeiss:
        return std::min(0.0, std::log(0.5) - p[0] * u + std::log1p(std::exp(-p[1] * u)));
      case Family::LogGammaStar:
        return std::min(0.0, -p[0] * u + std::log1p(u));
      case Family::InverseGamma: {
        const double z = p[1] * std::exp(-u);
        const double s = boost::math::gamma_p(p[0], z);
        if (s > 1e-280) return std::log(s);
        return p[0] * std::log(z) - std::lgamma(p[0] + 1.0) + std::log1p(-p[0] * z / (p[0] + 1.0));
      }
      case Family::StudentT: {
        const double s = survival_unchecked(std::exp(u));
        if (s > 1e-280) return std::log(s);
        return std::log(tail_.theta) - p[0] * u;
      }
      default:
        return std::log(survival_unchecked(std::exp(u)));
    }
  }

  // x > max(lower, 0) with survival(x) == q, bracketed in log x. Returns +inf
  // when the quantile exceeds the largest double, as the closed forms do.
  double solve_positive_survival(double q, double lower) const {
    constexpr double kMaxLogX = 709.0;
    const double log_q = std::log(q);
    auto f = [&](double u) { return log_survival_at(u) - log_q; };
    double lo = lower > 0.0 ? std::log(lower) : 0.0;
    int guard = 0;
    while (f(lo) < 0.0) {
      lo -= 2.0;
      if (++guard > 400) fail(ErrorCode::ConvergenceError, "cannot bracket quantile from below");
    }
    double hi = std::min(kMaxLogX, std::max(lo, 0.0) + 1.0);
    while (f(hi) > 0.0) {
      if (hi >= kMaxLogX) return INFINITY;
      hi = std::min(kMaxLogX, 2.0 * hi + 1.0);
    }
    return std::exp(solve_log_root(f, lo, hi));
  }

  Family family_;
  std::vector<double> params_;
  TailTriple tail_;
  double lower_ = 0.0;
};

}  // namespace pgc
