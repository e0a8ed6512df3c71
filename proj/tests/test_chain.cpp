#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "chain_oracle.hpp"
#include "fdmac/chain.hpp"

using namespace fdmac;
using namespace fdmac::chain;

using oracle::max_gap;
using oracle::power_oracle;

TEST(Chain, HandSolvedDegenerateCase) {
  const auto s = steady_state({1.0, 0.0, 1.0, 2});
  EXPECT_NEAR(s.pi.S, 2.0 / 7, 1e-12);
  EXPECT_NEAR(s.pi.T, 2.0 / 7, 1e-12);
  EXPECT_NEAR(s.pi.backoff[0], 2.0 / 7, 1e-12);
  EXPECT_NEAR(s.pi.backoff[1], 1.0 / 7, 1e-12);
  EXPECT_NEAR(s.pi.C, 0.0, 1e-15);
  EXPECT_TRUE(std::isnan(s.closed_form_gap));  // u = 1
}

TEST(Chain, PowerIterationSpotCase) {
  const ChainParams c{0.4, 0.2, 0.7, 8};
  const auto s = steady_state(c);
  EXPECT_LE(max_gap(s.pi, power_oracle(c)), 1e-9);
  EXPECT_LE(s.closed_form_gap, 1e-9);
  EXPECT_LE(s.balance_residual, 1e-10);
}

TEST(Chain, RandomizedAgainstPowerIteration) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 200; ++k) {
    ChainParams c;
    c.alpha = 0.02 + 0.98 * u(gen);
    c.beta = k % 5 == 0 ? 0.0 : (1 - c.alpha) * u(gen);
    c.p = u(gen);
    c.W = 1 + static_cast<int>(gen() % 32);
    const auto s = steady_state(c);
    EXPECT_LE(max_gap(s.pi, power_oracle(c)), 1e-9) << c.alpha << ' ' << c.beta << ' ' << c.p << ' ' << c.W;
    EXPECT_NEAR(s.pi.sum(), 1.0, 1e-12);
    if (s.u < 1 - 1e-9) {
      EXPECT_LE(s.closed_form_gap, 1e-9);
    }
  }
}

TEST(Chain, StructuralIdentities) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 300; ++k) {
    const double a = 0.01 + 0.99 * u(gen);
    const ChainParams c{a, (1 - a) * u(gen), u(gen), 1 + static_cast<int>(gen() % 2000)};
    const auto s = steady_state(c);
    EXPECT_NEAR(s.pi.T, c.alpha * s.pi.backoff[0], 1e-15);
    EXPECT_NEAR(s.pi.C, (1 - c.p) * s.pi.T, 1e-15);
    EXPECT_LE(s.balance_residual, 1e-10);
    for (double v : s.pi.backoff) EXPECT_GE(v, 0);
  }
  const auto hd = steady_state({0.3, 0.0, 1.0, 64});
  EXPECT_EQ(hd.pi.C, 0.0);
  EXPECT_NEAR(hd.pi.S, hd.pi.T, 1e-15);  // no inflow to S but from T
}

TEST(Chain, ClosedFormNearSingularity) {
  // u just below the cutoff: both routes must still agree.
  const ChainParams c{0.5, 0.5 * 2e-9, 0.6, 32};
  const auto s = steady_state(c);
  ASSERT_FALSE(std::isnan(s.closed_form_gap));
  EXPECT_LE(s.closed_form_gap, 1e-9);
  EXPECT_FALSE(closed_form({0.5, 0.0, 0.6, 32}).has_value());
}

TEST(Chain, LargeWindow) {
  const auto s = steady_state({0.2, 0.001, 0.9, 4096});
  EXPECT_NEAR(s.pi.sum(), 1.0, 1e-12);
  EXPECT_LE(s.balance_residual, 1e-10);
  EXPECT_LE(s.closed_form_gap, 1e-9);
}

TEST(Chain, RejectsInvalidParameters) {
  EXPECT_THROW(steady_state({0.0, 0.0, 0.5, 4}), InvalidArgument);
  EXPECT_THROW(steady_state({0.7, 0.5, 0.5, 4}), InvalidArgument);
  EXPECT_THROW(steady_state({-0.1, 0.5, 0.5, 4}), InvalidArgument);
  EXPECT_THROW(steady_state({0.5, 0.1, 1.5, 4}), InvalidArgument);
  EXPECT_THROW(steady_state({0.5, 0.1, 0.5, 0}), InvalidArgument);
}

TEST(Chain, LimitingProbabilities) {
  const auto s = steady_state({0.4, 0.2, 0.7, 8});
  const auto same = limiting_probs(s.pi, HoldingTimes::unit());
  EXPECT_LE(same.pi_tilde.max_abs_diff(s.pi), 1e-15);
  EXPECT_NEAR(same.mean_holding, 1.0, 1e-12);

  const auto base = limiting_probs(s.pi, {1.5, 11, 51, 3});
  const auto more = limiting_probs(s.pi, {1.5, 11, 102, 3});
  EXPECT_GT(more.throughput, base.throughput);
  EXPECT_NEAR(base.pi_tilde.sum(), 1.0, 1e-12);
  EXPECT_EQ(base.throughput, base.pi_tilde.S);

  // pi = (S 2/7, C 0, T 2/7, 0: 2/7, 1: 1/7) weighted by S 51, T 11, rest 1:
  // total (102 + 22 + 2 + 1) / 7.
  const auto hand = limiting_probs(steady_state({1.0, 0.0, 1.0, 2}).pi, {1, 11, 51, 1});
  EXPECT_NEAR(hand.pi_tilde.S, 102.0 / 127, 1e-12);
  EXPECT_NEAR(hand.pi_tilde.T, 22.0 / 127, 1e-12);
  EXPECT_NEAR(hand.pi_tilde.backoff[0], 2.0 / 127, 1e-12);
  EXPECT_NEAR(hand.pi_tilde.backoff[1], 1.0 / 127, 1e-12);
  EXPECT_NEAR(hand.mean_holding, 127.0 / 7, 1e-12);

  EXPECT_THROW(limiting_probs(s.pi, {INFINITY, 1, 1, 1}), InvalidArgument);
  EXPECT_THROW(limiting_probs(s.pi, {1, 0, 1, 1}), InvalidArgument);
  EXPECT_NEAR(HoldingTimes::for_chain({0.3, 0.2, 1, 4}, 1, 1, 1).backoff, 2.0, 1e-15);
}
