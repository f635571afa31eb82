#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <vector>

#include "midcs/midcs.hpp"

using namespace midcs;

namespace {

Eigen::VectorXd to_vec(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

// Smallest least-squares residual over every support of size <= s, by SVD.
double brute_min_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, std::size_t s) {
  const auto n = static_cast<std::size_t>(A.cols());
  double best = y.norm();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > s) continue;
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask & (1u << j)) cols.push_back(static_cast<Eigen::Index>(j));
    }
    Eigen::MatrixXd sub(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = A.col(cols[c]);
    const Eigen::VectorXd z = sub.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
    best = std::min(best, (sub * z - y).norm());
  }
  return best;
}

}  // namespace

TEST(Matrix, PrefixRowsAndGates) {
  const auto A = sample_matrix(20, 600, 3);
  const auto B = sample_matrix(5, 600, 3);
  EXPECT_EQ(A.top_rows(5).entries, B.entries);
  const auto g = A.gates();
  EXPECT_TRUE(g.evaluated);
  EXPECT_TRUE(g.ok());
  EXPECT_FALSE(sample_matrix(2, 10, 1).gates().evaluated);
  EXPECT_THROW(sample_matrix(11, 10, 1), ParameterError);
  EXPECT_THROW(A.top_rows(21), ParameterError);
}

TEST(SmallBall, MatchesChiSquare) {
  const std::vector<double> eps{0.3, 0.5, 0.8};
  for (std::size_t m : {1u, 2u, 4u}) {
    const auto rep = small_ball_audit(m, eps, 100000, 7);
    for (const auto& row : rep.rows) {
      const double exact =
          boost::math::cdf(boost::math::chi_squared(static_cast<double>(m)), row.eps * row.eps * static_cast<double>(m));
      const double sd = std::sqrt(exact * (1 - exact) / 100000.0);
      EXPECT_NEAR(row.empirical, exact, 4.0 * sd + 1e-5) << m << " " << row.eps;
      EXPECT_NEAR(row.bound, std::pow(std::exp(1.0) * row.eps, static_cast<double>(m)), 1e-12);
    }
  }
}

TEST(SmallBall, PowerLimitedFlag) {
  const std::vector<double> eps{0.05};
  const auto rep = small_ball_audit(8, eps, 100000, 1);
  EXPECT_TRUE(rep.rows.front().power_limited);
  EXPECT_FALSE(rep.rows.front().pass);
  EXPECT_FALSE(small_ball_audit(1, eps, 100, 1).warnings.empty());
  const std::vector<double> bad{1.5};
  EXPECT_THROW(small_ball_audit(1, bad, 100, 1), ParameterError);
}

TEST(Norm, PowerIterationMatchesSvd) {
  Engine rng = make_engine(4);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto A = sample_matrix(1 + s % 6, 12, s);
    const double svd = A.entries.jacobiSvd().singularValues()(0);
    EXPECT_NEAR(spectral_norm(A.entries, rng), svd, 1e-6 * svd);
  }
}

TEST(Norm, AuditColumnBound) {
  const auto rep = operator_norm_audit(4, 8, 2000, 2);  // 2000 * 2e^-8 >= 1
  EXPECT_EQ(rep.column_bound_violations, 0u);
  EXPECT_EQ(rep.curve.size(), 4u);
  for (std::size_t i = 1; i < rep.curve.size(); ++i) EXPECT_GE(rep.curve[i].value, rep.curve[i - 1].value);
  EXPECT_TRUE(rep.exact_quantile);
}

TEST(SparseEnum, RecoversSparseVector) {
  const auto A = sample_matrix(8, 16, 11).entries;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(16);
  x(2) = 0.7;
  x(9) = -0.3;
  x(13) = 0.1;
  SparseEnumOptions opt;
  opt.s_max = 4;
  const auto r = decode_sparse_enum(A * x, A, opt);
  EXPECT_EQ(r.status, DecodeStatus::Ok);
  EXPECT_EQ(r.support, (std::vector<std::size_t>{2, 9, 13}));
  EXPECT_LT(recovery_error(std::vector<double>(x.data(), x.data() + 16), r.x_hat), 1e-9);
}

TEST(SparseEnum, ShortcutAgreesWithEnumeration) {
  std::size_t cases = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t n = 10, m = 3 + seed % 6;
    const auto A = sample_matrix(m, n, derive_seed(seed, "A")).entries;
    const auto x = sample_process(ProcessSpec::iid_mixed(0.35), n, 1, seed).data;
    const Eigen::VectorXd y = A * to_vec(x);
    SparseEnumOptions fast;
    fast.s_max = std::min<std::size_t>(m, 4);
    SparseEnumOptions slow = fast;
    slow.exhaustive_only = true;
    const auto a = decode_sparse_enum(y, A, fast);
    const auto b = decode_sparse_enum(y, A, slow);
    EXPECT_EQ(a.support, b.support) << "seed " << seed;
    EXPECT_NEAR(a.residual, b.residual, 1e-9 * (1.0 + y.norm())) << "seed " << seed;
    ++cases;
  }
  // Larger n so the random zero-set candidates get exercised too.
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 16, m = 6 + seed % 6;
    const auto A = sample_matrix(m, n, derive_seed(seed, "A16")).entries;
    const auto x = sample_process(ProcessSpec::iid_mixed(0.4), n, 1, 100 + seed).data;
    const Eigen::VectorXd y = A * to_vec(x);
    SparseEnumOptions fast;
    fast.s_max = 6;
    fast.zero_set_draws = seed % 2 ? 20000 : 0;
    SparseEnumOptions slow = fast;
    slow.exhaustive_only = true;
    const auto a = decode_sparse_enum(y, A, fast);
    const auto b = decode_sparse_enum(y, A, slow);
    EXPECT_EQ(a.support, b.support) << "n 16 seed " << seed;
    EXPECT_NEAR(a.residual, b.residual, 1e-9 * (1.0 + y.norm())) << "n 16 seed " << seed;
    ++cases;
  }
  EXPECT_EQ(cases, 90u);
}

TEST(SparseEnum, ResidualOptimalOnDenseTargets) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto A = sample_matrix(6, 10, seed).entries;
    Engine rng = make_engine(seed, "y");
    Eigen::VectorXd y(6);
    for (auto& v : y) v = standard_normal(rng);
    SparseEnumOptions opt;
    opt.s_max = 3;
    const auto r = decode_sparse_enum(y, A, opt);
    EXPECT_NEAR(r.residual, brute_min_residual(A, y, 3), 1e-8) << seed;
    EXPECT_LE(r.support.size(), 3u);
  }
}

TEST(SparseEnum, ZeroMeasurementAndBudget) {
  const auto A = sample_matrix(4, 40, 1).entries;
  SparseEnumOptions opt;
  opt.s_max = 2;
  const auto r = decode_sparse_enum(Eigen::VectorXd::Zero(4), A, opt);
  EXPECT_TRUE(r.support.empty());
  EXPECT_EQ(r.residual, 0.0);
  opt.s_max = 4;
  opt.budget = 1000;
  EXPECT_THROW(decode_sparse_enum(Eigen::VectorXd::Ones(4), A, opt), BudgetError);
  opt.s_max = 5;
  EXPECT_THROW(decode_sparse_enum(Eigen::VectorXd::Ones(4), A, opt), ParameterError);
}

TEST(SparseEnum, DecodeClipsSmax) {
  const auto A = sample_matrix(3, 8, 1).entries;
  DecoderConfig cfg;
  cfg.sparse.s_max = 6;
  EXPECT_NO_THROW(decode(cfg, Eigen::VectorXd::Ones(3), A, 0));
  EXPECT_EQ(cfg.id(), "sparse-enum(s_max=6)");
}

TEST(MinEntropy, FindsLowEntropyLatticePoint) {
  const auto A = sample_matrix(4, 6, 5).entries;
  const std::vector<double> x{0.0, 0.5, 0.0, 0.0, 0.5, 0.0};
  MinEntropyOptions opt;
  opt.k = 2;
  const auto r = decode_min_entropy(A * to_vec(x), A, opt);
  EXPECT_EQ(r.status, DecodeStatus::Ok);
  EXPECT_LE(r.entropy, -(1.0 / 3.0) * std::log2(1.0 / 3.0) - (2.0 / 3.0) * std::log2(2.0 / 3.0) + 1e-12);
  EXPECT_LE(r.residual, 1e-9 * 2.0 + 1e-9);
}

TEST(MinEntropy, InfeasibleAndBudgetFlags) {
  const auto A = sample_matrix(3, 5, 2).entries;
  Eigen::VectorXd y(3);
  y << 0.123, -0.77, 0.31;
  MinEntropyOptions opt;
  opt.k = 2;
  EXPECT_EQ(decode_min_entropy(y, A, opt).status, DecodeStatus::Infeasible);
  opt.budget = 10;
  EXPECT_EQ(decode_min_entropy(y, A, opt).status, DecodeStatus::BudgetExhausted);
  opt.k = 0;
  EXPECT_THROW(decode_min_entropy(y, A, opt), ParameterError);
}

TEST(MinEntropy, AnnealIsDeterministic) {
  const auto A = sample_matrix(4, 12, 5).entries;
  const auto x = sample_process(ProcessSpec::iid_mixed(0.3), 12, 1, 2).data;
  MinEntropyOptions opt;
  opt.k = 4;
  opt.mode = SearchMode::Anneal;
  opt.anneal_iterations = 20000;
  opt.seed = 9;
  const auto a = decode_min_entropy(A * to_vec(x), A, opt);
  const auto b = decode_min_entropy(A * to_vec(x), A, opt);
  EXPECT_EQ(a.x_hat, b.x_hat);
  EXPECT_EQ(a.examined, b.examined);
}

TEST(Pinv, MinimumNormSolution) {
  const auto A = sample_matrix(3, 7, 8).entries;
  Eigen::VectorXd y(3);
  y << 1.0, -2.0, 0.5;
  const auto r = decode_pinv(y, A);
  const Eigen::VectorXd x = to_vec(r.x_hat);
  EXPECT_LT(r.residual, 1e-10);
  // Minimum norm means x lies in the row space of A.
  const Eigen::VectorXd proj = A.transpose() * (A * A.transpose()).ldlt().solve(A * x);
  EXPECT_LT((proj - x).norm(), 1e-10);
  EXPECT_EQ(decode_zero(y, A).residual, y.norm());
}

TEST(Decoders, KindNames) {
  for (auto k : {DecoderKind::SparseEnum, DecoderKind::MinEntropy, DecoderKind::Pinv, DecoderKind::Zero}) {
    EXPECT_EQ(decoder_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(decoder_kind_from_string("lasso"), ParameterError);
}

TEST(Decoders, RecoveryErrorChecksLengths) {
  const std::vector<double> a{1, 2}, b{1};
  EXPECT_THROW(recovery_error(a, b), ParameterError);
  EXPECT_DOUBLE_EQ(recovery_error(a, std::vector<double>{1, 0}), std::sqrt(2.0));
}
