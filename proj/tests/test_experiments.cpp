#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "midcs/midcs.hpp"

using namespace midcs;

namespace {

PhaseDiagram synthetic(const std::vector<double>& rates, const std::vector<std::size_t>& successes, std::size_t trials) {
  PhaseDiagram d;
  d.n = 20;
  d.rate_grid = rates;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    PhaseCell c;
    c.rate = rates[i];
    c.m = rate_to_m(rates[i], 20);
    c.trials = trials;
    c.successes = successes[i];
    d.cells.push_back(c);
  }
  return d;
}

DecoderConfig sparse(std::size_t s_max) {
  DecoderConfig d;
  d.kind = DecoderKind::SparseEnum;
  d.sparse.s_max = s_max;
  return d;
}

}  // namespace

TEST(Phase, RateToM) {
  EXPECT_EQ(rate_to_m(0.0, 24), 1u);
  EXPECT_EQ(rate_to_m(0.05, 24), 1u);
  EXPECT_EQ(rate_to_m(0.15, 24), 4u);
  EXPECT_EQ(rate_to_m(0.6, 24), 14u);
  EXPECT_EQ(rate_to_m(1.0, 24), 24u);
  const auto grid = default_rate_grid();
  EXPECT_EQ(grid.size(), 19u);
  EXPECT_NEAR(grid.back(), 0.95, 1e-12);
}

TEST(Threshold, StepFunction) {
  const std::vector<double> rates{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  const auto res = detect_threshold(synthetic(rates, {0, 0, 0, 0, 100, 100, 100, 100}, 100));
  ASSERT_TRUE(res.found);
  EXPECT_NEAR(res.threshold, 0.45, 0.01);
  EXPECT_LE(res.band_lo, res.threshold);
  EXPECT_GE(res.band_hi, res.threshold);
}

TEST(Threshold, LogisticRecoversSlope) {
  // Expected counts of p = 1 / (1 + exp(-20 (r - 0.4))).
  std::vector<double> rates;
  std::vector<std::size_t> succ;
  for (int i = 1; i <= 9; ++i) {
    const double r = 0.1 * i;
    rates.push_back(r);
    succ.push_back(static_cast<std::size_t>(std::llround(1000.0 / (1.0 + std::exp(-20.0 * (r - 0.4))))));
  }
  const auto res = detect_threshold(synthetic(rates, succ, 1000));
  ASSERT_TRUE(res.found);
  EXPECT_NEAR(res.threshold, 0.4, 0.005);
  EXPECT_NEAR(res.slope, 20.0, 0.5);
  EXPECT_NEAR(res.band_hi - res.band_lo, 2.0 * std::log(9.0) / 20.0, 0.01);
}

TEST(Threshold, NoCrossing) {
  const std::vector<double> rates{0.1, 0.2, 0.3, 0.4};
  EXPECT_FALSE(detect_threshold(synthetic(rates, {10, 10, 10, 10}, 10)).found);
  EXPECT_FALSE(detect_threshold(synthetic(rates, {0, 0, 0, 0}, 10)).found);
  const std::vector<double> three{0.1, 0.2, 0.3};
  EXPECT_THROW(detect_threshold(synthetic(three, {0, 5, 10}, 10)), ParameterError);
}

TEST(Threshold, DecreasingIsNotAThreshold) {
  const std::vector<double> rates{0.1, 0.2, 0.3, 0.4};
  const auto res = detect_threshold(synthetic(rates, {10, 8, 2, 0}, 10));
  EXPECT_FALSE(res.found);
  EXPECT_FALSE(res.note.empty());
}

TEST(Phase, ReproducibleAndThreadIndependent) {
  const auto grid = default_rate_grid(0.25, 1.0);
  set_thread_count(1);
  const auto a = run_phase(ProcessSpec::iid_mixed(0.3), 8, grid, 0.05, 12, sparse(4), 5);
  set_thread_count(3);
  const auto b = run_phase(ProcessSpec::iid_mixed(0.3), 8, grid, 0.05, 12, sparse(4), 5);
  set_thread_count(1);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    EXPECT_EQ(a.cells[c].successes, b.cells[c].successes);
    for (std::size_t t = 0; t < 12; ++t) EXPECT_EQ(a.cells[c].errors[t], b.cells[c].errors[t]);
  }
  EXPECT_TRUE(monotonicity_violations(a).empty());
}

TEST(Phase, ZeroDecoderWithLargeDelta) {
  DecoderConfig zero;
  zero.kind = DecoderKind::Zero;
  const auto d = run_phase(ProcessSpec::iid_uniform(), 6, {0.5, 1.0}, 10.0, 20, zero, 1);
  for (const auto& c : d.cells) EXPECT_DOUBLE_EQ(c.p_hat(), 1.0);
  const auto tight = rethreshold(d, 1e-3);
  for (const auto& c : tight.cells) EXPECT_DOUBLE_EQ(c.p_hat(), 0.0);
}

TEST(Phase, FullRatePinvRecovers) {
  DecoderConfig pinv;
  pinv.kind = DecoderKind::Pinv;
  const auto d = run_phase(ProcessSpec::iid_uniform(), 10, {1.0}, 1e-6, 30, pinv, 2);
  EXPECT_EQ(d.cells.front().successes, 30u);
}

TEST(Phase, BudgetErrorsCountedAsIncomplete) {
  DecoderConfig d = sparse(10);
  d.sparse.budget = 10;
  const auto diag = run_phase(ProcessSpec::iid_uniform(), 12, {0.9}, 0.05, 3, d, 1);
  EXPECT_EQ(diag.cells.front().incomplete, 3u);
  EXPECT_EQ(diag.cells.front().trials, 0u);
  EXPECT_EQ(diag.cells.front().flag(), "incomplete=3");
}

TEST(Phase, ArgumentValidation) {
  EXPECT_THROW(run_phase(ProcessSpec::iid_uniform(), 4, {0.5}, 0.0, 3, sparse(1), 1), ParameterError);
  EXPECT_THROW(run_phase(ProcessSpec::iid_uniform(), 4, {1.5}, 0.1, 3, sparse(1), 1), ParameterError);
  EXPECT_THROW(run_phase(ProcessSpec::iid_uniform(), 4, {}, 0.1, 3, sparse(1), 1), ParameterError);
}

TEST(Converse, Precondition) {
  const std::vector<std::size_t> ns{4, 8};
  EXPECT_THROW(converse_witness(ProcessSpec::iid_mixed(0.3), ns, 0.5, {sparse(2)}, {0.05}, 5, 1), ParameterError);
  EXPECT_THROW(converse_witness(ProcessSpec::gaussian_toeplitz({1.0, 0.2}), ns, 0.1, {sparse(2)}, {0.05}, 5, 1),
               ParameterError);
}

TEST(Converse, UniformBelowRateFails) {
  DecoderConfig pinv;
  pinv.kind = DecoderKind::Pinv;
  const std::vector<std::size_t> ns{4, 8, 12};
  const auto rep = converse_witness(ProcessSpec::iid_uniform(), ns, 0.5, {sparse(2), pinv}, {0.05, 0.1}, 30, 3);
  EXPECT_EQ(rep.rows.size(), 4u);
  EXPECT_TRUE(rep.pass());
}

TEST(Report, AtomProcess) {
  ReportOptions opt;
  opt.energy_n_ladder = {2, 4};
  opt.energy_trials = 200;
  opt.mid_trials = 5000;
  const auto rep =
      mdimcor_vs_recovery_report(ProcessSpec::iid_mixed(0.0), {0.25, 0.5}, default_rate_grid(0.2, 0.8), {6}, 5, 1, opt);
  EXPECT_TRUE(rep.region_atom_flag);
  EXPECT_EQ(rep.region, 0.0);
  EXPECT_NEAR(rep.mid, 0.0, 1e-9);
  EXPECT_TRUE(rep.ordering_ok);
  EXPECT_EQ(rep.thresholds.size(), 2u);
  EXPECT_NE(rep.text().find("atoms"), std::string::npos);
}

TEST(Report, UniformOrdering) {
  ReportOptions opt;
  opt.energy_n_ladder = {4, 8};
  opt.energy_trials = 500;
  opt.mid_trials = 20000;
  const auto rep =
      mdimcor_vs_recovery_report(ProcessSpec::iid_uniform(), {0.25, 0.5}, default_rate_grid(0.2, 0.8), {6}, 5, 2, opt);
  EXPECT_FALSE(rep.region_atom_flag);
  EXPECT_DOUBLE_EQ(rep.region, 0.5);
  EXPECT_TRUE(rep.ordering_ok);
  EXPECT_TRUE(rep.converse_ok);
}
