#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tdr/estimators.hpp"
#include "tdr/mdp.hpp"
#include "tdr/random.hpp"

namespace tdr {

/// Settings for data-driven truncation selection.
struct LepskiConfig {
  /// Ordered from weakest truncation (lowest bias) to strongest.
  std::vector<TruncationSchedule> grid;
  std::size_t draws = 100;     ///< bootstrap replicates per grid entry
  double z = 1.96;             ///< interval half-width in bootstrap standard deviations
  std::size_t block_len = 0;   ///< 0 means floor(T^(1/3))

  /// Throws InvalidInput unless the grid is non-empty, draws >= 2 and the
  /// effective block length lies in [1, T].
  void validate(std::size_t horizon) const;
  std::size_t effective_block_len(std::size_t horizon) const;
};

struct BootstrapInterval {
  double mean = 0.0;
  double sd = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct LepskiOutcome {
  std::size_t selected_index = 0;
  std::vector<TruncationSchedule> grid;
  std::vector<BootstrapInterval> intervals;
  std::vector<double> estimates;  ///< full-data estimate per grid entry

  double selected_estimate() const { return estimates[selected_index]; }
};

/// floor(T^(1/3)), at least 1.
std::size_t default_block_length(std::size_t horizon);

/// Concatenates ceil(T / l) blocks drawn uniformly from the T - l + 1
/// overlapping windows and cuts the result to T transitions. Transitions keep
/// their own next state, so no transition spans a seam.
Trajectory moving_block_resample(const Trajectory& traj, std::size_t block_len, RandomStream& rng);

/// Moving-block bootstrap mean and standard deviation (B - 1 divisor) of a
/// statistic, with interval mean +/- z sd. A draw whose statistic throws
/// NumericalError is redrawn up to `max_retries` times.
BootstrapInterval bootstrap_ci(const Trajectory& traj, const std::function<double(const Trajectory&)>& statistic,
                               std::size_t draws, std::size_t block_len, double z, RandomStream& rng,
                               std::size_t max_retries = 10);

/// Largest i such that intervals 0..i share a common point, scanning in order
/// and stopping at the first empty running intersection.
std::size_t lepski_index(std::span<const BootstrapInterval> intervals);

/// Bootstrap interval for every grid entry, then Lepski's intersection rule.
/// Nuisances inside `estimator` are reused across resamples.
LepskiOutcome lepski_select(const Trajectory& traj, const LepskiConfig& config, const TruncatedEstimator& estimator,
                            RandomStream& rng);

}  // namespace tdr
