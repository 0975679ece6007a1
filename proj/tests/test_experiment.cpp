#include <array>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "tdr/config.hpp"
#include "tdr/errors.hpp"
#include "tdr/experiment.hpp"
#include "tdr/stationary.hpp"

using namespace tdr;

namespace {

ExperimentConfig shipped(const std::string& name) { return load_config(std::string(TDR_CONFIG_DIR) + "/" + name); }

ExperimentConfig small_chain() {
  ExperimentConfig c;
  c.id = "small";
  c.mdp = ChainMdp{20, 0.5};
  c.nuisance.train_length = 3000;
  c.schedules = {TruncationSchedule::none(), TruncationSchedule::per_step(0.7)};
  c.horizons = {50, 200};
  c.replications = 40;
  c.seed = 17;
  return c;
}

std::string csv_of(const ExperimentConfig& c, const ExperimentResult& r) {
  std::ostringstream out;
  write_results_csv(out, c, r);
  return out.str();
}

}  // namespace

TEST(Aggregate, ExactEstimates) {
  const std::array<double, 3> xs{2.0, 2.0, 2.0};
  const ResultRecord r = aggregate(xs, 2.0);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_EQ(r.bias, 0.0);
  EXPECT_EQ(r.variance, 0.0);
  EXPECT_EQ(r.n_replications, 3u);
}

TEST(Aggregate, SymmetricPair) {
  const std::array<double, 2> xs{4.0, 2.0};
  const ResultRecord r = aggregate(xs, 3.0);
  EXPECT_DOUBLE_EQ(r.bias, 0.0);
  EXPECT_DOUBLE_EQ(r.variance, 2.0);
  EXPECT_DOUBLE_EQ(r.mse, 1.0);
  EXPECT_DOUBLE_EQ(r.relative_bias, 1.0 / 3.0);
}

TEST(Aggregate, MseIdentity) {
  const std::array<double, 5> xs{1.5, -0.25, 3.0, 2.75, 0.1};
  const ResultRecord r = aggregate(xs, 0.7);
  EXPECT_NEAR(r.mse, r.bias * r.bias + r.variance * 4.0 / 5.0, 1e-12);
  const std::array<double, 1> one{5.0};
  EXPECT_EQ(aggregate(one, 4.0).variance, 0.0);
}

TEST(RateSlope, SyntheticPowerLaws) {
  const std::array<std::size_t, 4> ts{50, 600, 7200, 20000};
  std::array<double, 4> inv{}, twothirds{};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    inv[i] = 3.0 / static_cast<double>(ts[i]);
    twothirds[i] = 0.4 * std::pow(static_cast<double>(ts[i]), -2.0 / 3.0);
  }
  EXPECT_NEAR(fit_rate_slope(ts, inv), -1.0, 1e-12);
  EXPECT_NEAR(fit_rate_slope(ts, twothirds), -2.0 / 3.0, 1e-12);
}

TEST(RateSlope, Errors) {
  const std::array<std::size_t, 3> ts{10, 20, 40};
  const std::array<double, 3> bad{1.0, 0.0, 0.5};
  EXPECT_THROW(fit_rate_slope(ts, bad), NumericalError);
  const std::array<std::size_t, 2> two{10, 20};
  const std::array<double, 2> ok{1.0, 0.5};
  EXPECT_THROW(fit_rate_slope(two, ok), InvalidInput);
}

TEST(GroundTruth, ChainLongRunClosedFormAndRollout) {
  ExperimentConfig c = small_chain();
  c.objective.kind = ObjectiveKind::longrun;
  const StateDistribution p_e = stationary_chain(1.0, 0.5, 20);
  double closed = 0.0;
  for (State s = 1; s <= 20; ++s) closed += p_e(s) * (10.0 - 5.0 / std::sqrt(static_cast<double>(s)));
  const double theta = ground_truth(c);
  EXPECT_NEAR(theta, closed, 1e-12);

  RandomStream rng(2024);
  State s = 1;
  double sum = 0.0;
  const int steps = 10'000'000;
  for (int t = 0; t < steps; ++t) {
    const StepOutcome o = step(c.mdp, s, 1, rng);
    sum += o.reward;
    s = o.next_state;
  }
  EXPECT_NEAR(sum / steps, theta, 0.01);
}

TEST(GroundTruth, DiscountedApproachesLongRun) {
  ExperimentConfig c = small_chain();
  c.objective.gamma = 0.999;
  const double discounted = ground_truth(c);
  c.objective.kind = ObjectiveKind::longrun;
  EXPECT_NEAR(discounted, ground_truth(c), 0.01);
}

TEST(GroundTruth, ConstantRewardLimit) {
  // A one-state chain pays the same mean reward forever.
  ExperimentConfig c = small_chain();
  c.mdp = ChainMdp{1, 0.5};
  for (double gamma : {0.1, 0.5, 0.9}) {
    c.objective.gamma = gamma;
    EXPECT_NEAR(ground_truth(c), 5.0, 1e-12);
  }
}

TEST(Replication, DeterministicAndDrFirst) {
  const ExperimentConfig c = small_chain();
  const Nuisances n = prepare_nuisances(c);
  const ReplicationResult a = run_replication(c, n, 200, 7);
  const ReplicationResult b = run_replication(c, n, 200, 7);
  ASSERT_EQ(a.estimates.size(), 2u);
  EXPECT_EQ(a.estimates[0].estimate, b.estimates[0].estimate);
  EXPECT_EQ(a.estimates[1].estimate, b.estimates[1].estimate);
  EXPECT_EQ(a.estimates[0].estimator, "DR");
  const Trajectory traj = evaluation_trajectory(c, n, 200, 7);
  const double dr = dr_discounted(traj, n.q, n.omega, c.evaluation(), c.behavior(), 0.5, n.initial).estimate;
  EXPECT_EQ(a.estimates[0].estimate, dr);
  EXPECT_NE(run_replication(c, n, 200, 8).estimates[0].estimate, a.estimates[0].estimate);
}

TEST(RunExperiment, SingleReplicationRecords) {
  ExperimentConfig c = small_chain();
  c.replications = 1;
  c.horizons = {50};
  const ExperimentResult r = run_experiment(c);
  ASSERT_FALSE(r.failure);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].schedule, "none");
  EXPECT_EQ(r.records[1].schedule, "t^0.7");
  EXPECT_EQ(r.records[0].variance, 0.0);
}

TEST(RunExperiment, ThreadCountDoesNotChangeBytes) {
  const ExperimentConfig c = small_chain();
  const ExperimentResult serial = run_experiment(c, {1});
  const ExperimentResult parallel = run_experiment(c, {4});
  const ExperimentResult again = run_experiment(c, {1});
  ASSERT_FALSE(serial.failure);
  EXPECT_EQ(csv_of(c, serial), csv_of(c, parallel));
  EXPECT_EQ(csv_of(c, serial), csv_of(c, again));
  EXPECT_EQ(serial.records.size(), 4u);
}

TEST(RunExperiment, FailureKeepsMarker) {
  ExperimentConfig c = small_chain();
  c.objective.kind = ObjectiveKind::longrun;
  Nuisances n = prepare_nuisances(c);
  n.omega = DensityRatioTable{};  // every weight is zero
  const ExperimentResult r = run_experiment(c, n);
  ASSERT_TRUE(r.failure);
  EXPECT_TRUE(r.records.empty());
  EXPECT_THROW(std::rethrow_exception(r.failure), NumericalError);
  const std::string csv = csv_of(c, r);
  EXPECT_NE(csv.find("# FAILED: T=50"), std::string::npos) << csv;
}

TEST(RunExperiment, LepskiCountsPerHorizon) {
  ExperimentConfig c = shipped("exp4_chain_lepski.ini");
  c.horizons = {100, 200};
  c.replications = 10;
  c.lepski->draws = 10;
  const ExperimentResult r = run_experiment(c);
  ASSERT_FALSE(r.failure) << r.failure_message;
  ASSERT_EQ(r.lepski_counts.size(), 2u);
  for (const auto& counts : r.lepski_counts) {
    ASSERT_EQ(counts.size(), c.lepski->grid.size());
    std::size_t total = 0;
    for (auto k : counts) total += k;
    EXPECT_EQ(total, 10u);
  }
  std::ostringstream out;
  write_lepski_counts_csv(out, c, r);
  EXPECT_EQ(out.str().rfind("config,T,grid_index,schedule,count\n", 0), 0u);
}

TEST(ExperimentOne, DeskRunFiniteAndTruncationConverges) {
  const ExperimentConfig c = shipped("exp1_chain_dr_vs_tdr.ini");
  const ExperimentResult r = run_experiment(c);
  ASSERT_FALSE(r.failure) << r.failure_message;
  std::vector<double> tdr_mse, dr_mse;
  for (const auto& rec : r.records) {
    EXPECT_TRUE(std::isfinite(rec.mse)) << rec.schedule;
    if (rec.schedule == "t^0.7") tdr_mse.push_back(rec.mse);
    if (rec.schedule == "none") dr_mse.push_back(rec.mse);
  }
  ASSERT_EQ(tdr_mse.size(), c.horizons.size());
  for (std::size_t i = 1; i < tdr_mse.size(); ++i) EXPECT_LT(tdr_mse[i], tdr_mse[i - 1]);
  const double tdr_slope = fit_rate_slope(c.horizons, tdr_mse);
  EXPECT_LT(tdr_slope, -0.3);
  EXPECT_LT(tdr_slope, fit_rate_slope(c.horizons, dr_mse));
}

TEST(ExperimentSix, PlateauBelowPointSeven) {
  ExperimentConfig c = shipped("exp6_chain_robustness.ini");
  const ExperimentResult r = run_experiment(c);
  ASSERT_FALSE(r.failure) << r.failure_message;
  double lo = INFINITY, hi = 0.0;
  for (const auto& rec : r.records) {
    const TruncationSchedule s = TruncationSchedule::parse(rec.schedule);
    if (s.mode != TruncationMode::per_step || s.alpha > 0.7 + 1e-12) continue;
    lo = std::min(lo, rec.mse);
    hi = std::max(hi, rec.mse);
  }
  EXPECT_LT(hi / lo, 3.0) << lo << " " << hi;
}
