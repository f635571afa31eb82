#include <gtest/gtest.h>

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <map>

#include "midcs/midcs.hpp"

using namespace midcs;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParameterError& e) {
    return e.what();
  }
  return "";
}

std::vector<double> column(const SampleBatch& b, std::size_t i) {
  std::vector<double> c(b.trials);
  for (std::size_t t = 0; t < b.trials; ++t) c[t] = b.at(t, i);
  return c;
}

}  // namespace

TEST(Random, DeriveSeedSeparatesPurposeAndIndex) {
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(2, "a", 0));
  EXPECT_EQ(derive_seed(7, "trial", 3), derive_seed(7, "trial", 3));
}

TEST(Random, SampleIndicesDistinct) {
  Engine rng = make_engine(5);
  auto idx = sample_indices(rng, 50, 20);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(std::unique(idx.begin(), idx.end()), idx.end());
  EXPECT_LT(idx.back(), 50u);
}

TEST(Process, DeterministicGivenSeed) {
  for (const auto& spec : {ProcessSpec::iid_uniform(), ProcessSpec::iid_mixed(0.3), ProcessSpec::gaussian_ar1(2.0, 0.5),
                           ProcessSpec::markov({{0.5, 0.5}, {0.3, 0.7}}, {1.0, -1.0}),
                           ProcessSpec::digit_shared({1, 2}, 10), ProcessSpec::digit_iid({2, 4}, 10)}) {
    const auto a = sample_process(spec, 5, 200, 11);
    const auto b = sample_process(spec, 5, 200, 11);
    const auto c = sample_process(spec, 5, 200, 12);
    EXPECT_EQ(a.data, b.data) << to_string(spec.kind);
    EXPECT_NE(a.data, c.data) << to_string(spec.kind);
  }
}

TEST(Process, ThreadCountDoesNotChangeOutput) {
  const auto spec = ProcessSpec::gaussian_ar1(1.0, 0.9);
  set_thread_count(1);
  const auto a = sample_process(spec, 6, 500, 3);
  set_thread_count(4);
  const auto b = sample_process(spec, 6, 500, 3);
  set_thread_count(1);
  EXPECT_EQ(a.data, b.data);
}

TEST(Process, ValidationNamesFields) {
  EXPECT_NE(message_of([] { validate(ProcessSpec::iid_mixed(1.5)); }).find("params.p"), std::string::npos);
  EXPECT_NE(message_of([] { validate(ProcessSpec::gaussian_ar1(1.0, 1.2)); }).find("params.covariance.rho"),
            std::string::npos);
  EXPECT_NE(message_of([] { validate(ProcessSpec::markov({{0.5, 0.6}, {0.5, 0.5}}, {0, 1})); })
                .find("params.transition"),
            std::string::npos);
  // Periodic two-cycle.
  EXPECT_NE(message_of([] { validate(ProcessSpec::markov({{0, 1}, {1, 0}}, {0, 1})); }).find("aperiodic"),
            std::string::npos);
  // Reducible.
  EXPECT_NE(message_of([] { validate(ProcessSpec::markov({{1, 0}, {0.5, 0.5}}, {0, 1})); }).find("irreducible"),
            std::string::npos);
  EXPECT_NE(message_of([] { validate(ProcessSpec::digit_shared({0}, 10)); }).find("params.S"), std::string::npos);
  EXPECT_NE(message_of([] { validate(ProcessSpec::digit_shared({1}, 60)); }).find("params.b_max"), std::string::npos);
  auto spec = ProcessSpec::iid_uniform();
  spec.ground_truth = GroundTruth{2.0, ""};
  EXPECT_NE(message_of([&] { validate(spec); }).find("ground_truth.mid"), std::string::npos);
}

TEST(Process, NonPsdToeplitzRejected) {
  EXPECT_THROW(sample_process(ProcessSpec::gaussian_toeplitz({1.0, 0.9, -0.9}), 3, 10, 1), ParameterError);
}

TEST(Process, MixedAtomFrequency) {
  const auto b = sample_process(ProcessSpec::iid_mixed(0.3), 4, 20000, 2);
  const double zeros =
      static_cast<double>(std::count(b.data.begin(), b.data.end(), 0.0)) / static_cast<double>(b.data.size());
  // binomial 4 sigma
  EXPECT_NEAR(zeros, 0.7, 4.0 * std::sqrt(0.21 / 80000.0));
}

TEST(Process, StationarityKs) {
  for (const auto& spec : {ProcessSpec::iid_uniform(), ProcessSpec::iid_mixed(0.5), ProcessSpec::gaussian_ar1(1.0, 0.9),
                           ProcessSpec::markov({{0.9, 0.1}, {0.4, 0.6}}, {0.0, 1.0}),
                           ProcessSpec::digit_shared({1, 3}, 12), ProcessSpec::digit_iid({1, 3}, 12)}) {
    const auto b = sample_process(spec, 6, 10000, 4);
    for (std::size_t j = 1; j < 6; ++j) {
      EXPECT_LE(ks_distance(column(b, 0), column(b, j)), 0.05) << to_string(spec.kind) << " coordinate " << j;
    }
  }
}

TEST(Process, GaussianCovarianceMatchesSpec) {
  const auto b = sample_process(ProcessSpec::gaussian_ar1(2.0, 0.6), 4, 40000, 8);
  for (std::size_t lag = 0; lag < 4; ++lag) {
    double s = 0.0;
    for (std::size_t t = 0; t < b.trials; ++t) s += b.at(t, 0) * b.at(t, lag);
    const double expected = 2.0 * std::pow(0.6, static_cast<double>(lag));
    // Var(X0 Xlag) <= 2 sigma^4; 5 sigma band.
    EXPECT_NEAR(s / static_cast<double>(b.trials), expected, 5.0 * std::sqrt(8.0 / 40000.0)) << "lag " << lag;
  }
}

TEST(Process, RankOneGaussianIsConstantPath) {
  const auto b = sample_process(ProcessSpec::gaussian_ar1(1.0, 1.0), 5, 100, 1);
  for (std::size_t t = 0; t < b.trials; ++t) {
    for (std::size_t i = 1; i < 5; ++i) EXPECT_NEAR(b.at(t, i), b.at(t, 0), 1e-9);
  }
}

TEST(Process, MarkovStartsStationary) {
  // pi = (0.8, 0.2) for this chain.
  const auto b = sample_process(ProcessSpec::markov({{0.95, 0.05}, {0.2, 0.8}}, {0.0, 1.0}), 3, 40000, 6);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto c = column(b, i);
    const double ones = static_cast<double>(std::count(c.begin(), c.end(), 1.0)) / 40000.0;
    EXPECT_NEAR(ones, 0.2, 4.0 * std::sqrt(0.16 / 40000.0) * 3.0) << i;  // inflated for autocorrelation
  }
}

TEST(Process, DigitFamilies) {
  const auto shared = sample_process(ProcessSpec::digit_shared({1, 2, 3}, 8), 4, 5000, 9);
  ASSERT_EQ(shared.family.size(), 5000u);
  for (std::size_t t = 0; t < shared.trials; ++t) {
    for (std::size_t i = 0; i < 4; ++i) {
      const auto bits = static_cast<std::uint64_t>(std::ldexp(shared.at(t, i), 8));
      // Y uses digits 1..3 (the top three of eight), Z the rest.
      const bool only_y = (bits & 0x1Fu) == 0;
      const bool only_z = (bits & 0xE0u) == 0;
      EXPECT_TRUE(shared.family[t] ? only_y : only_z);
    }
  }
  const auto iid = sample_process(ProcessSpec::digit_iid({1, 2, 3}, 8), 10, 1000, 9);
  ASSERT_EQ(iid.family.size(), 10000u);
  const double mean = std::accumulate(iid.family.begin(), iid.family.end(), 0.0) / 10000.0;
  EXPECT_NEAR(mean, 0.5, 0.02);
}

TEST(Process, DigitValuesExact) {
  const auto b = sample_process(ProcessSpec::digit_iid({1, 5, 9}, 30), 3, 1000, 2);
  for (double v : b.data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
    EXPECT_EQ(std::ldexp(v, 30), std::floor(std::ldexp(v, 30)));
  }
}

TEST(Process, DyadicCellMass) {
  const std::vector<int> S{1, 3, 4, 8};
  EXPECT_EQ(dyadic_cell_mass(S, 1).exponent, 1);
  EXPECT_EQ(dyadic_cell_mass(S, 4).exponent, 3);
  EXPECT_EQ(dyadic_cell_mass(S, 16).exponent, 4);
  EXPECT_DOUBLE_EQ(dyadic_cell_mass(S, 4).value(), 0.125);
  EXPECT_THROW(dyadic_cell_mass(S, 0), ParameterError);
  EXPECT_THROW(dyadic_cell_mass(S, 64), NumericError);
}

TEST(Process, DyadicFrequenciesWithinBinomial) {
  const std::vector<int> S{2, 3, 5, 7};
  const int b = 8;
  const auto batch = sample_process(ProcessSpec::digit_shared(S, 12), 1, 40000, 21);
  std::map<std::uint64_t, std::size_t> counts;
  std::size_t y_trials = 0;
  for (std::size_t t = 0; t < batch.trials; ++t) {
    if (!batch.family[t]) continue;
    ++y_trials;
    ++counts[static_cast<std::uint64_t>(std::floor(std::ldexp(batch.at(t, 0), b)))];
  }
  const double p = dyadic_cell_mass(S, b).value();
  EXPECT_EQ(counts.size(), 16u);  // 2^#(S ∩ [1, 8])
  for (const auto& [cell, c] : counts) {
    const double sd = std::sqrt(static_cast<double>(y_trials) * p * (1 - p));
    EXPECT_NEAR(static_cast<double>(c), static_cast<double>(y_trials) * p, 3.0 * sd + 1.0) << cell;
  }
}

TEST(Process, GroundTruth) {
  EXPECT_DOUBLE_EQ(ground_truth_mid(ProcessSpec::iid_mixed(0.3))->mid, 0.3);
  EXPECT_DOUBLE_EQ(ground_truth_mid(ProcessSpec::iid_uniform())->mid, 1.0);
  EXPECT_DOUBLE_EQ(ground_truth_mid(ProcessSpec::gaussian_ar1(1.0, 1.0))->mid, 0.0);
  EXPECT_DOUBLE_EQ(ground_truth_mid(ProcessSpec::gaussian_ar1(1.0, 0.3))->mid, 1.0);
  EXPECT_FALSE(ground_truth_mid(ProcessSpec::gaussian_toeplitz({1.0, 0.3})).has_value());
  EXPECT_DOUBLE_EQ(ground_truth_mid(ProcessSpec::digit_shared({1, 3, 5}, 6))->mid, 0.5);
  EXPECT_DOUBLE_EQ(ground_truth_mid(ProcessSpec::markov({{0.5, 0.5}, {0.5, 0.5}}, {0, 1}))->mid, 0.0);
}

TEST(Process, PrefixIsLeadingBlock) {
  const auto b = sample_process(ProcessSpec::digit_iid({1}, 4), 5, 20, 3);
  const auto p = b.prefix(2);
  for (std::size_t t = 0; t < 20; ++t) {
    EXPECT_EQ(p.at(t, 0), b.at(t, 0));
    EXPECT_EQ(p.at(t, 1), b.at(t, 1));
    EXPECT_EQ(p.family[t * 2 + 1], b.family[t * 5 + 1]);
  }
  EXPECT_THROW(b.prefix(6), ParameterError);
}

TEST(Process, RejectsBadSizes) {
  EXPECT_THROW(sample_process(ProcessSpec::iid_uniform(), 0, 10, 1), ParameterError);
  EXPECT_THROW(sample_process(ProcessSpec::iid_uniform(), 3, 0, 1), ParameterError);
}
