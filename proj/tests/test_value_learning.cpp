#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tdr/stationary.hpp"
#include "tdr/value_learning.hpp"

using namespace tdr;

namespace {

Trajectory single(State s, Action a, double r, State next) { return Trajectory{{{s, a, r, next}}}; }

TabularModel constant_reward_chain(double c) {
  TabularModel model = tabulate(ChainMdp{8, 0.4});
  std::fill(model.mean_reward.begin(), model.mean_reward.end(), c);
  return model;
}

// Visit-weighted mean squared gap between a learned table and the oracle.
double weighted_gap(const QTable& q, const QTable& exact, const Trajectory& held_out) {
  double acc = 0.0;
  for (const auto& tr : held_out.steps) {
    const double d = q(tr.state, tr.action) - exact(tr.state, tr.action);
    acc += d * d;
  }
  return acc / static_cast<double>(held_out.size());
}

// Mean over held-out tuples of (q(s,a) - E[R + gamma v(S') | s,a])^2, the
// conditional expectation taken under the exact model.
double held_out_bellman(const QTable& q, const PolicyTable& pi_e, const TabularModel& model,
                        const Trajectory& held_out) {
  double acc = 0.0;
  for (const auto& tr : held_out.steps) {
    const std::size_t i = model.index_of(tr.state);
    double target = model.mean_reward[i];
    for (SparseMatrix::InnerIterator it(model.kernel[static_cast<std::size_t>(tr.action)],
                                        static_cast<Eigen::Index>(i));
         it; ++it)
      target += q.gamma() * it.value() * value_from_q(q, pi_e, model.state_at(static_cast<std::size_t>(it.col())));
    acc += (q(tr.state, tr.action) - target) * (q(tr.state, tr.action) - target);
  }
  return acc / static_cast<double>(held_out.size());
}

}  // namespace

TEST(TdDiscounted, SingleUpdateArithmetic) {
  const QTable q = td_discounted(single(2, 1, 1.0, 3), PolicyTable::constant(0.5), 0.5, 0.03, QTable::discounted(0.5));
  EXPECT_DOUBLE_EQ(q(2, 1), 0.03);
  EXPECT_FALSE(q.contains(3, 0));
}

TEST(TdDiscounted, ZeroRateReturnsInit) {
  QTable init = QTable::discounted(0.5);
  init.set(1, 1, 4.0);
  init.set(2, 0, -1.0);
  RandomStream rng(1);
  const Trajectory traj = sample_trajectory(ChainMdp{}, PolicyTable::constant(0.5), 200, State{1}, rng);
  const QTable q = td_discounted(traj, PolicyTable::constant(1.0), 0.5, 0.0, init);
  for (State s = 1; s <= 20; ++s)
    for (Action a = 0; a < 2; ++a) EXPECT_EQ(q(s, a), init(s, a));
}

TEST(TdDiscounted, ExperimentOneSettingsHaveSmallHeldOutBellmanResidual) {
  const ChainMdp chain{20, 0.5};
  const PolicyTable pi_b = PolicyTable::constant(0.2), pi_e = PolicyTable::constant(1.0);
  const StateDistribution p_b = stationary_chain(0.2, 0.5, 20);
  RandomStream rng(2024);
  const Trajectory train = sample_trajectory(chain, pi_b, 10000, p_b, rng);
  const Trajectory held_out = sample_trajectory(chain, pi_b, 10000, p_b, rng);
  const QTable q = td_discounted(train, pi_e, 0.5, 0.03, QTable::discounted(0.5));
  EXPECT_LT(held_out_bellman(q, pi_e, tabulate(chain), held_out), 0.5);
  for (const auto& e : q.entries()) EXPECT_LE(std::abs(e.value), 10.5 / (1 - 0.5));
}

TEST(TdDiscounted, ErrorShrinksWithTrainingLength) {
  const ChainMdp chain{20, 0.5};
  const PolicyTable pi_b = PolicyTable::constant(0.2), pi_e = PolicyTable::constant(1.0);
  const StateDistribution p_b = stationary_chain(0.2, 0.5, 20);
  const QTable exact = exact_q_discounted(chain, pi_e, 0.5);
  std::vector<double> short_err, long_err;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomStream rng(seed, {17});
    const Trajectory held_out = sample_trajectory(chain, pi_b, 5000, p_b, rng);
    const Trajectory train = sample_trajectory(chain, pi_b, 10000, p_b, rng);
    Trajectory head{{train.steps.begin(), train.steps.begin() + 1000}};
    short_err.push_back(weighted_gap(td_discounted(head, pi_e, 0.5, 0.03, QTable::discounted(0.5)), exact, held_out));
    long_err.push_back(weighted_gap(td_discounted(train, pi_e, 0.5, 0.03, QTable::discounted(0.5)), exact, held_out));
  }
  std::nth_element(short_err.begin(), short_err.begin() + 10, short_err.end());
  std::nth_element(long_err.begin(), long_err.begin() + 10, long_err.end());
  EXPECT_LT(long_err[10], short_err[10]);
}

TEST(TdDifferential, SingleUpdateArithmetic) {
  const QTable q =
      td_differential(single(1, 0, 2.0, 1), PolicyTable::constant(0.5), 0.05, 0.05, QTable::differential());
  EXPECT_DOUBLE_EQ(q(1, 0), 0.1);
  EXPECT_DOUBLE_EQ(q.theta_hat(), 0.1);
}

TEST(TdDifferential, ZeroRatesReturnInit) {
  QTable init = QTable::differential(1.5);
  init.set(1, 1, 2.0);
  RandomStream rng(3);
  const Trajectory traj = sample_trajectory(ChainMdp{}, PolicyTable::constant(0.5), 100, State{1}, rng);
  const QTable q = td_differential(traj, PolicyTable::constant(1.0), 0.0, 0.0, init);
  EXPECT_EQ(q.theta_hat(), 1.5);
  for (State s = 1; s <= 20; ++s)
    for (Action a = 0; a < 2; ++a) EXPECT_EQ(q(s, a), init(s, a));
}

TEST(TdDifferential, ConstantRewardAverageIsRecovered) {
  RandomStream rng(4);
  Trajectory traj = sample_trajectory(ChainMdp{10, 0.5}, PolicyTable::constant(0.5), 20000, State{1}, rng);
  for (auto& tr : traj.steps) tr.reward = 3.0;
  const QTable q = td_differential(traj, PolicyTable::constant(0.5), 0.05, 0.05, QTable::differential());
  EXPECT_NEAR(q.theta_hat(), 3.0, 0.05);
}

TEST(ValueFromQ, MixtureExamplesAndLinearity) {
  QTable q = QTable::discounted(0.5);
  q.set(1, 0, 2.0);
  q.set(1, 1, 4.0);
  EXPECT_DOUBLE_EQ(value_from_q(q, PolicyTable::constant(0.5), 1), 3.0);
  EXPECT_DOUBLE_EQ(value_from_q(q, PolicyTable::constant(1.0), 1), 4.0);
  EXPECT_EQ(value_from_q(QTable::discounted(0.5), PolicyTable::constant(0.3), 1), 0.0);

  QTable r = QTable::discounted(0.5);
  r.set(1, 0, -1.0);
  r.set(2, 1, 5.0);
  const PolicyTable pi = PolicyTable::constant(0.3);
  for (State s : {1, 2, 3})
    EXPECT_NEAR(value_from_q(q + r, pi, s), value_from_q(q, pi, s) + value_from_q(r, pi, s), 1e-15);
}

TEST(ExactQDiscounted, ConstantRewardFixedPoint) {
  const TabularModel model = constant_reward_chain(2.5);
  const QTable q = exact_q_discounted(model, PolicyTable::constant(0.6), 0.8);
  for (const auto& e : q.entries()) EXPECT_NEAR(e.value, 2.5 / 0.2, 1e-9);
}

TEST(ExactQDiscounted, MatchesDirectSolveAndResidual) {
  const oracle::DenseChain dense = oracle::dense_chain(20, 0.5);
  const TabularModel model = tabulate(ChainMdp{20, 0.5});
  for (double u : {1.0, 0.3}) {
    const PolicyTable pi = PolicyTable::constant(u);
    const QTable q = exact_q_discounted(model, pi, 0.5);
    EXPECT_LT(bellman_residual_discounted(model, pi, q), 1e-10);
    const Eigen::VectorXd v = oracle::discounted_values(oracle::policy_kernel(dense, u), dense.reward, 0.5);
    const Eigen::VectorXd q0 = dense.reward + 0.5 * dense.p0 * v, q1 = dense.reward + 0.5 * dense.p1 * v;
    for (int i = 0; i < 20; ++i) {
      EXPECT_NEAR(q(i + 1, 0), q0[i], 1e-9);
      EXPECT_NEAR(q(i + 1, 1), q1[i], 1e-9);
    }
  }
}

TEST(ExactQDiscounted, TinyDiscountGivesOneStepReward) {
  const ChainMdp chain{20, 0.5};
  const QTable q = exact_q_discounted(chain, PolicyTable::constant(1.0), 1e-9);
  for (State s = 1; s <= 20; ++s) EXPECT_NEAR(q(s, 1), 10 - 5 / std::sqrt(static_cast<double>(s)), 1e-7);
}

TEST(ExactQDiscounted, QueueResidual) {
  const TabularModel model = tabulate(QueueMdp{0.1, 0.9});
  const PolicyTable pi = PolicyTable::constant(1.0);
  EXPECT_LT(bellman_residual_discounted(model, pi, exact_q_discounted(model, pi, 0.5)), 1e-10);
}

TEST(ExactQDifferential, ConstantRewardIsZero) {
  const TabularModel model = constant_reward_chain(4.0);
  const QTable q = exact_q_differential(model, PolicyTable::constant(0.5));
  EXPECT_NEAR(q.theta_hat(), 4.0, 1e-12);
  for (const auto& e : q.entries()) EXPECT_NEAR(e.value, 0.0, 1e-10);
}

TEST(ExactQDifferential, ChainAverageRewardAndNormalization) {
  const ChainMdp chain{20, 0.5};
  const PolicyTable pi = PolicyTable::constant(1.0);
  const TabularModel model = tabulate(chain);
  const QTable q = exact_q_differential(model, pi);
  const StateDistribution p_e = stationary_chain(1.0, 0.5, 20);
  EXPECT_NEAR(q.theta_hat(), p_e.expectation([](State s) { return 10 - 5 / std::sqrt(static_cast<double>(s)); }),
              1e-12);
  EXPECT_LT(bellman_residual_differential(model, pi, q), 1e-8);
  EXPECT_NEAR(p_e.expectation([&](State s) { return value_from_q(q, pi, s); }), 0.0, 1e-8);

  // Series oracle: V = sum_t P^t (r - theta), centred under p_e.
  const oracle::DenseChain dense = oracle::dense_chain(20, 0.5);
  const Eigen::MatrixXd P = oracle::policy_kernel(dense, 1.0);
  const Eigen::VectorXd centred = dense.reward.array() - q.theta_hat();
  Eigen::VectorXd term = centred, v = Eigen::VectorXd::Zero(20);
  for (int t = 0; t < 2000; ++t) {
    v += term;
    term = P * term;
  }
  double mean = 0.0;
  for (int i = 0; i < 20; ++i) mean += p_e(i + 1) * v[i];
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(value_from_q(q, pi, i + 1), v[i] - mean, 1e-8);
}

TEST(ExactQDifferential, QueueResidual) {
  const TabularModel model = tabulate(QueueMdp{0.1, 0.9});
  for (double u : {1.0, 0.1}) {
    const PolicyTable pi = PolicyTable::constant(u);
    EXPECT_LT(bellman_residual_differential(model, pi, exact_q_differential(model, pi)), 1e-8);
  }
}

TEST(QTable, ShiftAndFallback) {
  QTable q = QTable::differential(1.0, 0.5);
  q.set(2, 1, 3.0);
  const QTable s = q.shifted(2.0);
  EXPECT_EQ(s(2, 1), 5.0);
  EXPECT_EQ(s(9, 0), 2.5);
  EXPECT_EQ(s.theta_hat(), 1.0);
  EXPECT_ANY_THROW(q.set(-1, 0, 1.0));
}
