#include <gtest/gtest.h>

#include <boost/math/special_functions/erf.hpp>

#include <atomic>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "pgc/core/linalg.hpp"
#include "pgc/core/normal.hpp"
#include "pgc/core/orthant.hpp"
#include "pgc/core/parallel.hpp"
#include "pgc/core/random.hpp"

using namespace pgc;

namespace {

double boost_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

}  // namespace

TEST(Normal, FrozenValues) {
  EXPECT_NEAR(std_normal_quantile(0.975), 1.959963984540054235, 1e-14);
  EXPECT_NEAR(std_normal_cdf(-8.0) / 6.2209605742717841e-16, 1.0, 1e-13);
  EXPECT_NEAR(std_normal_sf(8.0) / 6.2209605742717841e-16, 1.0, 1e-13);
  EXPECT_DOUBLE_EQ(std_normal_quantile(0.5), 0.0);
}

TEST(Normal, QuantileMatchesBoostAcrossRange) {
  for (double lp = -300.0; lp <= std::log10(0.5); lp += 0.37) {
    const double p = std::pow(10.0, lp);
    const double want = boost_quantile(p);
    EXPECT_NEAR(std_normal_quantile(p), want, 1e-13 * std::max(1.0, std::abs(want))) << "p=" << p;
    EXPECT_NEAR(std_normal_upper_quantile(p), -want, 1e-13 * std::max(1.0, std::abs(want)));
  }
  for (double p = 0.5; p < 1.0; p += 0.0131) {
    EXPECT_NEAR(std_normal_quantile(p), boost_quantile(p), 2e-14);
  }
}

TEST(Normal, RoundTrip) {
  for (double x = -37.0; x <= 3.0; x += 0.173) {
    EXPECT_NEAR(std_normal_quantile(std_normal_cdf(x)), x, 1e-12 * std::max(1.0, std::abs(x)));
  }
  for (double x = 0.1; x <= 37.0; x += 0.173) {
    EXPECT_NEAR(std_normal_upper_quantile(std_normal_sf(x)), x, 1e-12 * x);
  }
}

TEST(Normal, Domain) {
  EXPECT_THROW(std_normal_quantile(0.0), Error);
  EXPECT_THROW(std_normal_quantile(1.0), Error);
  EXPECT_THROW(std_normal_quantile(std::nan("")), Error);
  EXPECT_THROW(std_normal_upper_quantile(-0.1), Error);
}

TEST(Philox, KnownAnswerVectors) {
  using detail::philox4x32_10;
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}),
            (detail::PhiloxBlock{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (detail::PhiloxBlock{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (detail::PhiloxBlock{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RandomStream, Reproducible) {
  RandomStream a(7, 3);
  RandomStream b(7, 3);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomStream, DistinctStreamsAndSplits) {
  std::set<std::uint64_t> first;
  const RandomStream parent(1, 0);
  for (std::uint64_t c = 0; c < 500; ++c) {
    RandomStream child = parent.split(c);
    first.insert(child.next_u64());
  }
  RandomStream other_id(1, 1);
  first.insert(other_id.next_u64());
  EXPECT_EQ(first.size(), 501u);
  RandomStream p2 = parent;
  RandomStream p3(1, 0);
  EXPECT_EQ(p2.next_u64(), p3.next_u64());
}

TEST(RandomStream, UniformAndNormalMoments) {
  RandomStream s(2024, 0);
  const int n = 400000;
  double su = 0.0;
  double sn = 0.0;
  double sn2 = 0.0;
  double sn4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = s.normal();
    sn += z;
    sn2 += z * z;
    sn4 += z * z * z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sn / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(sn4 / n, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(Linalg, CholeskyAndInverse) {
  Matrix m(3, 3);
  m << 1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0;
  const Matrix l = cholesky(m);
  EXPECT_TRUE((l * l.transpose()).isApprox(m, 1e-14));
  EXPECT_TRUE((spd_inverse(m) * m).isApprox(Matrix::Identity(3, 3), 1e-13));
  EXPECT_NEAR(spd_log_determinant(m), std::log(m.determinant()), 1e-13);
}

TEST(Linalg, CorrelationValidation) {
  EXPECT_NO_THROW(CorrelationMatrix::bivariate(0.999));
  try {
    CorrelationMatrix::bivariate(1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
  Matrix bad(3, 3);
  bad << 1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0;
  try {
    CorrelationMatrix c(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.2;
  EXPECT_THROW(CorrelationMatrix c(asym), Error);
  Matrix diag = Matrix::Identity(2, 2);
  diag(1, 1) = 2.0;
  EXPECT_THROW(CorrelationMatrix c(diag), Error);
}

TEST(Linalg, RestrictionAndComplement) {
  Matrix m(3, 3);
  m << 1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0;
  const CorrelationMatrix c(m);
  const IndexSet idx{2, 0};
  const CorrelationMatrix r = c.restricted(idx);
  EXPECT_EQ(r(0, 1), 0.2);
  EXPECT_EQ(complement(idx, 3), (IndexSet{1}));
  const Matrix inv = submatrix_inverse(c, idx);
  EXPECT_TRUE((inv * r.matrix()).isApprox(Matrix::Identity(2, 2), 1e-14));
}

TEST(Orthant, ClosedFormsAndMonteCarlo) {
  Matrix c2(2, 2);
  c2 << 2.0, -0.6, -0.6, 0.5;
  const double r = -0.6 / 1.0;
  EXPECT_NEAR(centered_orthant_prob(c2, {false, false}).probability, 0.25 + std::asin(r) / (2 * std::numbers::pi),
              1e-15);
  EXPECT_EQ(centered_orthant_prob(c2, {true, false}).probability, 0.5);
  EXPECT_EQ(centered_orthant_prob(c2, {true, true}).probability, 1.0);

  Matrix c3(3, 3);
  c3 << 1.0, 0.4, -0.2, 0.4, 1.0, 0.3, -0.2, 0.3, 1.0;
  const double exact =
      0.125 + (std::asin(0.4) + std::asin(-0.2) + std::asin(0.3)) / (4.0 * std::numbers::pi);
  OrthantOptions opt;
  opt.n_draws = 400000;
  const OrthantResult mc = centered_orthant_prob(c3, {false, false, false}, opt);
  EXPECT_EQ(mc.dimension, 3);
  EXPECT_GT(mc.standard_error, 0.0);
  EXPECT_NEAR(mc.probability, exact, 4.0 * mc.standard_error);
}

TEST(Parallel, CoversEveryChunkAndRethrows) {
  for (int threads : {1, 2, 5}) {
    std::vector<std::atomic<int>> seen(37);
    parallel_chunks(seen.size(), threads, [&](std::size_t c) { seen[c]++; });
    for (auto& s : seen) EXPECT_EQ(s.load(), 1);
    EXPECT_THROW(parallel_chunks(10, threads,
                                 [](std::size_t c) {
                                   if (c == 7) throw std::runtime_error("boom");
                                 }),
                 std::runtime_error);
  }
}
