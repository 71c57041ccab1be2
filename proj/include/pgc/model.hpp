#pragma once

// The Pareto-tailed Gaussian copula model and its exact sampler:
// Z = L N with L the Cholesky factor of Sigma, then X_j = F_j^{-1}(Phi(Z_j)).

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pgc/core/linalg.hpp"
#include "pgc/core/normal.hpp"
#include "pgc/core/parallel.hpp"
#include "pgc/core/random.hpp"
#include "pgc/marginals.hpp"

namespace pgc {

using json = nlohmann::json;

inline std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::NumericalError, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

class PgcModel {
 public:
  PgcModel(std::vector<MarginalSpec> marginals, CorrelationMatrix sigma)
      : marginals_(std::move(marginals)), sigma_(std::move(sigma)) {
    if (marginals_.empty() || static_cast<int>(marginals_.size()) != sigma_.dim()) {
      fail(ErrorCode::DimensionMismatch, "model has " + std::to_string(marginals_.size()) +
                                             " marginals but a " + std::to_string(sigma_.dim()) +
                                             "-dimensional correlation matrix");
    }
    fingerprint_ = sha256_hex(to_json().dump());
  }

  int dim() const { return sigma_.dim(); }
  const std::vector<MarginalSpec>& marginals() const { return marginals_; }
  const MarginalSpec& marginal(int j) const { return marginals_.at(static_cast<std::size_t>(j)); }
  const CorrelationMatrix& sigma() const { return sigma_; }
  const Matrix& cholesky_factor() const { return sigma_.cholesky_factor(); }

  /// SHA-256 of the canonical (sorted-key) JSON form.
  const std::string& fingerprint() const { return fingerprint_; }

  Vector alphas() const {
    Vector a(dim());
    for (int j = 0; j < dim(); ++j) a(j) = marginals_[static_cast<std::size_t>(j)].alpha();
    return a;
  }

  Vector thetas() const {
    Vector t(dim());
    for (int j = 0; j < dim(); ++j) t(j) = marginals_[static_cast<std::size_t>(j)].theta();
    return t;
  }

  /// Model restricted to the margins in idx (in that order).
  PgcModel restricted(const IndexSet& idx) const {
    std::vector<MarginalSpec> sub;
    for (int i : idx) sub.push_back(marginal(i));
    return PgcModel(std::move(sub), sigma_.restricted(idx));
  }

  json to_json() const {
    json margins = json::array();
    for (const auto& m : marginals_) {
      margins.push_back({{"family", std::string(family_name(m.family()))},
                         {"params", std::vector<double>(m.params().begin(), m.params().end())}});
    }
    json rows = json::array();
    for (int i = 0; i < dim(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(dim()));
      for (int j = 0; j < dim(); ++j) row[static_cast<std::size_t>(j)] = sigma_(i, j);
      rows.push_back(row);
    }
    return {{"dim", dim()}, {"marginals", margins}, {"sigma", rows}};
  }

  /// Accepts marginals either as {family, params} objects or `family:params` strings.
  static PgcModel from_json(const json& doc) {
    try {
      std::vector<MarginalSpec> margins;
      for (const auto& m : doc.at("marginals")) {
        if (m.is_string()) {
          margins.push_back(MarginalSpec::parse(m.get<std::string>()));
        } else {
          margins.push_back(MarginalSpec::make(parse_family(m.at("family").get<std::string>()),
                                               m.at("params").get<std::vector<double>>()));
        }
      }
      PgcModel model(std::move(margins), CorrelationMatrix(matrix_from_json(doc.at("sigma"))));
      if (doc.contains("dim") && doc.at("dim").get<int>() != model.dim()) {
        fail(ErrorCode::DimensionMismatch, "model 'dim' disagrees with its contents");
      }
      return model;
    } catch (const json::exception& e) {
      fail(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
    }
  }

  static Matrix matrix_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty()) fail(ErrorCode::ParseError, "matrix must be a non-empty array");
    const auto d = static_cast<Eigen::Index>(rows.size());
    Matrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto& row = rows.at(static_cast<std::size_t>(i));
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d) {
        fail(ErrorCode::DimensionMismatch, "matrix rows must all have length " + std::to_string(d));
      }
      for (Eigen::Index j = 0; j < d; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
    return m;
  }

 private:
  std::vector<MarginalSpec> marginals_;
  CorrelationMatrix sigma_;
  std::string fingerprint_;
};

inline PgcModel build_model(std::vector<MarginalSpec> marginals, const Matrix& sigma) {
  return PgcModel(std::move(marginals), CorrelationMatrix(sigma));
}

inline PgcModel build_model(std::vector<MarginalSpec> marginals, CorrelationMatrix sigma) {
  return PgcModel(std::move(marginals), std::move(sigma));
}

struct SampleMatrix {
  Matrix values;  // n x d
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::string fingerprint;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index d() const { return values.cols(); }
};

inline constexpr std::size_t kSampleChunkRows = 4096;

/// Maps a Gaussian score to margin m, inverting on whichever side of the
/// median keeps full precision.
inline double marginal_from_score(const MarginalSpec& m, double z) {
  if (z > 0.0) return m.upper_quantile(std_normal_sf(z));
  return m.quantile(std_normal_cdf(z));
}

/// n i.i.d. rows. Rows are produced in chunks of kSampleChunkRows, chunk c
/// drawing from stream.split(c), so the output does not depend on `threads`.
inline SampleMatrix sample(const PgcModel& model, std::size_t n, const RandomStream& stream,
                           int threads = 1) {
  if (n < 1) fail(ErrorCode::DomainError, "sample: n must be at least 1");
  const int d = model.dim();
  SampleMatrix out;
  out.values.resize(static_cast<Eigen::Index>(n), d);
  out.seed = stream.seed();
  out.stream_id = stream.stream_id();
  out.fingerprint = model.fingerprint();
  const Matrix& lower = model.cholesky_factor();
  const std::size_t chunks = (n + kSampleChunkRows - 1) / kSampleChunkRows;
  parallel_chunks(chunks, threads, [&](std::size_t c) {
    RandomStream local = stream.split(c);
    Vector normal(d);
    const std::size_t end = std::min(n, (c + 1) * kSampleChunkRows);
    for (std::size_t row = c * kSampleChunkRows; row < end; ++row) {
      for (int j = 0; j < d; ++j) normal(j) = local.normal();
      const Vector z = lower.triangularView<Eigen::Lower>() * normal;
      for (int j = 0; j < d; ++j) {
        out.values(static_cast<Eigen::Index>(row), j) =
            marginal_from_score(model.marginal(j), z(j));
      }
    }
  });
  return out;
}

/// Phi^{-1}(F_j(x)) applied column by column.
inline Matrix gaussian_scores(const PgcModel& model, const Matrix& data) {
  if (data.cols() != model.dim()) {
    fail(ErrorCode::DimensionMismatch, "gaussian_scores: column count differs from model dimension");
  }
  Matrix scores(data.rows(), data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const auto& m = model.marginal(static_cast<int>(j));
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const double s = m.survival(data(i, j));
      scores(i, j) = s < 0.5 ? std_normal_upper_quantile(s) : std_normal_quantile(m.cdf(data(i, j)));
    }
  }
  return scores;
}

inline Matrix gaussian_scores(const PgcModel& model, const SampleMatrix& data) {
  return gaussian_scores(model, data.values);
}

}  // namespace pgc
