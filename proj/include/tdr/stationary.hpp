#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/SparseCore>

#include "tdr/distribution.hpp"
#include "tdr/mdp.hpp"

namespace tdr {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Queue states above this cap are lumped into the cap for oracle computations.
inline constexpr int kDefaultQueueCap = 500;

/// Finite, explicit form of an MDP: per-action transition matrices over a
/// contiguous block of states plus the mean reward of each state.
struct TabularModel {
  State first_state = 0;
  std::vector<double> mean_reward;
  std::array<SparseMatrix, 2> kernel;  ///< kernel[a](i, j) = P(next = j | state = i, action = a)

  std::size_t size() const { return mean_reward.size(); }
  State state_at(std::size_t i) const { return first_state + static_cast<State>(i); }
  bool contains(State s) const { return s >= first_state && s < first_state + static_cast<State>(size()); }
  std::size_t index_of(State s) const;
};

/// Chains are represented exactly. The queue is cut at `queue_cap`: arrivals
/// that would overshoot the cap land on it instead.
TabularModel tabulate(const MdpSpec& mdp, int queue_cap = kDefaultQueueCap);

/// State-to-state kernel induced by following `policy`.
SparseMatrix policy_kernel(const TabularModel& model, const PolicyTable& policy);

/// Closed-form stationary law of the chain MDP under a constant treatment
/// probability u: with v = u(1 - beta), p(s) = (1 - v) v^(s-1) for s < Q and
/// p(Q) = v^(Q-1). At v = 1 this is the point mass on Q.
StateDistribution stationary_chain(double treat_prob, double reset_prob, int num_states);

/// Power iteration for the stationary law of `policy` on the tabular model.
/// Throws NumericalError when the iteration cap is hit or, for a truncated
/// queue, when the lumped boundary state holds more than `tol` mass.
StateDistribution stationary_numeric(const TabularModel& model, const PolicyTable& policy, double tol = 1e-13,
                                     bool truncated = false, std::size_t max_iterations = 2'000'000);
StateDistribution stationary_numeric(const MdpSpec& mdp, const PolicyTable& policy, int queue_cap = kDefaultQueueCap,
                                     double tol = 1e-13);

/// || p P_pi - p ||_1 on the model's state block.
double stationarity_residual(const TabularModel& model, const PolicyTable& policy, const StateDistribution& p);

/// Distribution as a dense vector aligned with the model's state block.
Eigen::VectorXd to_dense(const TabularModel& model, const StateDistribution& p);
StateDistribution from_dense(const TabularModel& model, const Eigen::VectorXd& v);

}  // namespace tdr
