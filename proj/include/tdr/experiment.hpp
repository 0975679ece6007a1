#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdr/adaptive_truncation.hpp"
#include "tdr/density_ratio.hpp"
#include "tdr/estimators.hpp"
#include "tdr/mdp.hpp"
#include "tdr/value_learning.hpp"

namespace tdr {

enum class ObjectiveKind { discounted, longrun };
enum class InitialKind { evaluation, behavior, state };

struct Objective {
  ObjectiveKind kind = ObjectiveKind::discounted;
  double gamma = 0.5;
  InitialKind initial = InitialKind::evaluation;  ///< p0 for the discounted value
  State initial_state = 0;                        ///< used when initial == state

  std::string initial_label() const;
};

enum class QSource { exact, td };
enum class OmegaSource { exact, moment_matching };

struct NuisanceConfig {
  QSource q = QSource::td;
  OmegaSource omega = OmegaSource::exact;
  std::size_t train_length = 10'000;  ///< behavior steps for TD
  double learning_rate = 0.03;        ///< q rate (both objectives)
  double theta_rate = 0.05;           ///< average-reward rate for differential TD
  int epochs = 1;
  std::size_t omega_train_length = 200'000;  ///< behavior steps for moment matching
  /// Fit q and omega on one auxiliary run (lengths must match) instead of two.
  bool shared_training_data = false;
};

struct LepskiSettings {
  std::vector<TruncationSchedule> grid;
  std::size_t draws = 100;
  double z = 1.0;
  std::size_t block_len = 0;
};

struct ExperimentConfig {
  std::string id = "experiment";
  MdpSpec mdp = ChainMdp{};
  double behavior_prob = 0.2;
  double evaluation_prob = 1.0;
  Objective objective;
  NuisanceConfig nuisance;
  std::vector<TruncationSchedule> schedules{TruncationSchedule::none()};
  std::optional<LepskiSettings> lepski;
  std::vector<std::size_t> horizons{600};
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  std::size_t burn_in = 1000;  ///< queue only; chains start from the behavior stationary law
  int queue_cap = kDefaultQueueCap;
  bool plug_in_variance = false;
  /// Replication count of the full-scale study this config scales down (0 = unset).
  std::size_t reference_replications = 0;

  PolicyTable behavior() const { return PolicyTable::constant(behavior_prob); }
  PolicyTable evaluation() const { return PolicyTable::constant(evaluation_prob); }

  /// Throws ConfigError on out-of-range or inconsistent settings.
  void validate() const;
};

/// Fitted or exact nuisances shared by every replication of a config.
struct Nuisances {
  QTable q = QTable::discounted(0.5);
  DensityRatioTable omega;
  StateDistribution initial;       ///< p0 for the discounted value
  StateDistribution behavior_law;  ///< stationary law under the behavior policy
  std::optional<MomentMatchingFit> moment_fit;
};

/// Exact stationary laws of the two policies (queue cut at the config's cap).
StateDistribution behavior_stationary(const ExperimentConfig& config);
StateDistribution evaluation_stationary(const ExperimentConfig& config);

/// Learns or computes q and omega. Training data come from their own seed
/// namespace, disjoint from the evaluation replications.
Nuisances prepare_nuisances(const ExperimentConfig& config);

/// theta_gamma(p0) or the long-run theta from exact oracles.
double ground_truth(const ExperimentConfig& config);

struct ReplicationResult {
  std::vector<EstimatorResult> estimates;  ///< one per schedule, then Lepski if configured
  std::optional<std::size_t> lepski_index;
};

/// Evaluation trajectory of length T for replication `rep`: chains start from
/// the behavior stationary law, queues from 0 after the configured burn-in.
Trajectory evaluation_trajectory(const ExperimentConfig& config, const Nuisances& nuisances, std::size_t horizon,
                                 std::size_t rep);

ReplicationResult run_replication(const ExperimentConfig& config, const Nuisances& nuisances, std::size_t horizon,
                                  std::size_t rep);

struct ResultRecord {
  std::string config_id;
  std::size_t horizon = 0;
  std::string estimator;
  std::string schedule;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double variance = 0.0;  ///< sample variance, n - 1 divisor (0 when n = 1)
  double mse = 0.0;       ///< mean squared deviation from the oracle
  double relative_bias = 0.0;  ///< mean |estimate - oracle| / |oracle|
  double oracle = 0.0;
  std::size_t n_replications = 0;
  double wall_seconds = 0.0;
};

/// mse = bias^2 + variance (n - 1) / n up to rounding.
ResultRecord aggregate(std::span<const double> estimates, double oracle);

/// OLS slope of log(mse) on log(T). Needs at least three points and positive mse.
double fit_rate_slope(std::span<const std::size_t> horizons, std::span<const double> mse);

struct RunOptions {
  unsigned threads = 1;
};

struct ExperimentResult {
  std::vector<ResultRecord> records;
  /// Per horizon (in config order), how often each Lepski grid entry was picked.
  std::vector<std::vector<std::size_t>> lepski_counts;
  double oracle = 0.0;
  /// Set when a horizon failed; records hold every horizon completed before it.
  std::exception_ptr failure;
  std::string failure_message;
};

/// Nuisance prep, replication sweep and aggregation. Replications of a horizon
/// run on up to `threads` workers; results do not depend on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});
ExperimentResult run_experiment(const ExperimentConfig& config, const Nuisances& nuisances,
                                const RunOptions& options = {});

/// Results CSV with a '#' header describing the run. Wall time is written
/// only when `with_timing` is set so default output is byte-stable.
void write_results_csv(std::ostream& out, const ExperimentConfig& config, const ExperimentResult& result,
                       bool with_timing = false);
/// "config,T,grid_index,schedule,count".
void write_lepski_counts_csv(std::ostream& out, const ExperimentConfig& config, const ExperimentResult& result);

}  // namespace tdr
