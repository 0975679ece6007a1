#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tdr/errors.hpp"
#include "tdr/mdp.hpp"
#include "tdr/random.hpp"
#include "tdr/stationary.hpp"

using namespace tdr;

TEST(RandomStream, SameSeedAndPathGiveSameDraws) {
  RandomStream a(42, {1, 2}), b(42, {1, 2}), c(42, {2, 1});
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(RandomStream, UniformAndIndexRanges) {
  RandomStream rng(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const double u = rng.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const auto k = rng.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(RandomStream, PoissonMeanAndZeroRate) {
  RandomStream rng(9);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += rng.poisson(0.9);
  EXPECT_NEAR(sum / n, 0.9, 0.01);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(rng.poisson(0.0), 0);
}

TEST(PolicyTable, ComplementAndRange) {
  PolicyTable pi(0.3);
  pi.set(4, 0.9);
  EXPECT_DOUBLE_EQ(pi.prob(1, 4), 0.9);
  EXPECT_EQ(pi.prob(0, 4) + pi.prob(1, 4), 1.0);
  EXPECT_DOUBLE_EQ(pi.treat_prob(7), 0.3);
  EXPECT_THROW(pi.set(1, 1.5), InvalidInput);
  EXPECT_THROW(PolicyTable(-0.1), InvalidInput);
}

TEST(Step, ChainActionZeroResets) {
  RandomStream rng(1);
  const ChainMdp chain{20, 0.5};
  for (int i = 0; i < 200; ++i) {
    const auto out = step(chain, 5, 0, rng);
    EXPECT_EQ(out.next_state, 1);
    EXPECT_GE(out.reward, 10 - 5 / std::sqrt(5.0) - 0.5);
    EXPECT_LE(out.reward, 10 - 5 / std::sqrt(5.0) + 0.5);
  }
}

TEST(Step, ChainSaturatesAtTop) {
  RandomStream rng(2);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(step(ChainMdp{20, 0.0}, 20, 1, rng).next_state, 20);
}

TEST(Step, QueueClampsAtZero) {
  RandomStream rng(3);
  // lambda0 = 0 forces B = 0.
  for (int i = 0; i < 100; ++i) EXPECT_EQ(step(QueueMdp{0.0, 0.9}, 0, 0, rng).next_state, 0);
}

TEST(Step, RejectsInvalidInput) {
  RandomStream rng(4);
  EXPECT_THROW(step(ChainMdp{20, 0.5}, 0, 1, rng), InvalidInput);
  EXPECT_THROW(step(ChainMdp{20, 0.5}, 21, 1, rng), InvalidInput);
  EXPECT_THROW(step(QueueMdp{}, -1, 0, rng), InvalidInput);
  EXPECT_THROW(step(ChainMdp{20, 0.5}, 3, 2, rng), InvalidInput);
}

TEST(SampleTrajectory, MinimalLengthAndContiguity) {
  RandomStream rng(5);
  const Trajectory one = sample_trajectory(ChainMdp{}, PolicyTable::constant(0.5), 1, State{3}, rng);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].state, 3);
  const Trajectory many = sample_trajectory(QueueMdp{}, PolicyTable::constant(0.5), 500, State{0}, rng);
  EXPECT_TRUE(many.is_contiguous());
  EXPECT_THROW(sample_trajectory(ChainMdp{}, PolicyTable::constant(0.5), 0, State{1}, rng), InvalidInput);
}

TEST(SampleTrajectory, NeverTreatStaysAtOne) {
  RandomStream rng(6);
  const Trajectory traj = sample_trajectory(ChainMdp{20, 0.5}, PolicyTable::constant(0.0), 50, State{12}, rng);
  for (std::size_t t = 1; t < traj.size(); ++t) EXPECT_EQ(traj[t].state, 1);
  EXPECT_EQ(traj.terminal_state(), 1);
}

TEST(SampleTrajectory, DeterministicUnderSeed) {
  const auto draw = [] {
    RandomStream rng(77, {3});
    return sample_trajectory(QueueMdp{}, PolicyTable::constant(0.4), 300, State{0}, rng);
  };
  EXPECT_EQ(draw(), draw());
}

TEST(SampleTrajectory, VisitFrequenciesMatchStationaryLaw) {
  const StateDistribution p = stationary_chain(0.5, 0.3, 10);
  RandomStream rng(8);
  const Trajectory traj = sample_trajectory(ChainMdp{10, 0.3}, PolicyTable::constant(0.5), 100000, p, rng);
  std::vector<double> freq(10, 0.0);
  for (const auto& tr : traj.steps) freq[static_cast<std::size_t>(tr.state - 1)] += 1.0 / 100000.0;
  EXPECT_LT(total_variation(StateDistribution(1, freq), p), 0.02);
}

TEST(StationaryChain, ClosedFormValues) {
  const StateDistribution never = stationary_chain(0.0, 0.5, 20);
  EXPECT_EQ(never(1), 1.0);
  EXPECT_EQ(never(2), 0.0);

  const StateDistribution p = stationary_chain(0.2, 0.5, 20);
  EXPECT_NEAR(p(1), 0.9, 1e-15);
  EXPECT_NEAR(p(2), 0.09, 1e-15);
  EXPECT_NEAR(p(20), std::pow(0.1, 19), 1e-30);

  const StateDistribution e = stationary_chain(1.0, 0.5, 20);
  for (State s = 1; s < 20; ++s) EXPECT_NEAR(e(s), 0.5 * std::pow(0.5, s - 1), 1e-16);
  EXPECT_NEAR(e(20), std::pow(0.5, 19), 1e-20);

  const StateDistribution degenerate = stationary_chain(1.0, 0.0, 20);
  EXPECT_EQ(degenerate(20), 1.0);
  EXPECT_NEAR(degenerate.total(), 1.0, 1e-12);
}

TEST(StationaryChain, MatchesDirectLinearSolve) {
  for (double u : {0.0, 0.2, 0.5, 1.0})
    for (double beta : {0.0, 0.5}) {
      if (u == 1.0 && beta == 0.0) continue;  // point mass; covered above
      const Eigen::VectorXd ref = oracle::stationary(oracle::policy_kernel(oracle::dense_chain(20, beta), u));
      const StateDistribution p = stationary_chain(u, beta, 20);
      for (int i = 0; i < 20; ++i) EXPECT_NEAR(p(i + 1), ref[i], 1e-12) << "u=" << u << " beta=" << beta;
    }
}

TEST(StationaryNumeric, AgreesWithClosedForm) {
  for (double u : {0.0, 0.2, 0.5, 1.0})
    for (double beta : {0.0, 0.5}) {
      const ChainMdp chain{20, beta};
      const StateDistribution num = stationary_numeric(chain, PolicyTable::constant(u));
      const StateDistribution exact = stationary_chain(u, beta, 20);
      for (State s = 1; s <= 20; ++s) EXPECT_NEAR(num(s), exact(s), 1e-10) << "u=" << u << " beta=" << beta;
      EXPECT_NEAR(num.total(), 1.0, 1e-12);
    }
}

TEST(StationaryNumeric, QueueConcentratesNearZero) {
  const PolicyTable never = PolicyTable::constant(0.0);
  const StateDistribution p = stationary_numeric(QueueMdp{0.1, 0.9}, never, 200);
  EXPECT_GT(p(0), 0.8);
  const TabularModel model = tabulate(QueueMdp{0.1, 0.9}, 200);
  EXPECT_LT(stationarity_residual(model, never, p), 1e-12);
  for (double x : p.mass()) EXPECT_GE(x, 0.0);
}

TEST(StationaryNumeric, QueueAtHighLoadIsStationary) {
  const TabularModel model = tabulate(QueueMdp{0.1, 0.9});
  const PolicyTable always = PolicyTable::constant(1.0);
  const StateDistribution p = stationary_numeric(model, always, 1e-13, true);
  EXPECT_LT(stationarity_residual(model, always, p), 1e-13);
  EXPECT_NEAR(p.total(), 1.0, 1e-12);
}

TEST(StationaryNumeric, AbsorbingStateGivesPointMass) {
  // Chain with u = 0: every state jumps to 1, which is absorbing.
  const StateDistribution p = stationary_numeric(ChainMdp{5, 0.5}, PolicyTable::constant(0.0));
  EXPECT_NEAR(p(1), 1.0, 1e-13);
}

TEST(StationaryNumeric, TruncatedQueueWithTooSmallCapThrows) {
  EXPECT_THROW(stationary_numeric(QueueMdp{0.1, 1.5}, PolicyTable::constant(1.0), 50), NumericalError);
}

TEST(PolicyRatio, Examples) {
  const PolicyTable e = PolicyTable::constant(1.0), b = PolicyTable::constant(0.2);
  EXPECT_DOUBLE_EQ(policy_ratio(e, b, 3, 1), 5.0);
  EXPECT_EQ(policy_ratio(e, b, 3, 0), 0.0);
  EXPECT_DOUBLE_EQ(policy_ratio(b, b, 3, 0), 1.0);
  EXPECT_DOUBLE_EQ(policy_ratio(b, b, 3, 1), 1.0);
  EXPECT_DOUBLE_EQ(policy_ratio(PolicyTable::constant(0.9), PolicyTable::constant(0.3), 1, 1), 3.0);
  EXPECT_THROW(policy_ratio(e, PolicyTable::constant(0.0), 1, 1), OverlapViolation);
  EXPECT_EQ(policy_ratio(PolicyTable::constant(0.0), PolicyTable::constant(0.0), 1, 1), 0.0);
}
