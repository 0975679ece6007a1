#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tdr/adaptive_truncation.hpp"
#include "tdr/density_ratio.hpp"
#include "tdr/estimators.hpp"
#include "tdr/mdp.hpp"
#include "tdr/value_learning.hpp"

namespace tdr {

// Trajectory CSV:
//   t,state,action,reward
//   0,1,1,9.73
//   ...
//   T,state_T,,
// The trailing terminal row is optional; without it the last row has no
// observed next state and is dropped on read. Writing requires a contiguous
// trajectory.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in);

// Q table CSV: "# kind=discounted gamma=0.5 theta_hat=0 fallback=0", then
// "state,action,value" rows.
void write_qtable_csv(std::ostream& out, const QTable& q);
QTable read_qtable_csv(std::istream& in);

// Density ratio CSV: optional "# kind=... gamma=... p0=..." comment, then "state,omega".
void write_omega_csv(std::ostream& out, const DensityRatioTable& omega);
DensityRatioTable read_omega_csv(std::istream& in);

// "estimator,schedule_mode,alpha,T,estimate,variance,n_truncated". For fixed
// schedules the alpha column carries the level; variance is empty when absent.
void write_estimator_header(std::ostream& out);
void write_estimator_row(std::ostream& out, const EstimatorResult& result);

// "grid_index,alpha,mean,sd,lo,hi,selected".
void write_lepski_csv(std::ostream& out, const LepskiOutcome& outcome);

/// Opens `path` for reading; throws InvalidInput when that fails.
std::ifstream open_input(const std::filesystem::path& path);

/// Splits one CSV line on commas (no quoting), dropping a trailing '\r'.
std::vector<std::string> split_csv_line(std::string line);

}  // namespace tdr
