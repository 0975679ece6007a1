#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdr/constrained_ls.hpp"
#include "tdr/distribution.hpp"
#include "tdr/mdp.hpp"
#include "tdr/stationary.hpp"

namespace tdr {

enum class RatioKind { longrun, discounted };

/// Nonnegative per-state weights approximating p_e(s) / p_b(s) (long-run) or
/// p_e^gamma(s; p0) / p_b(s) (discounted). States without a stored value read
/// as `fallback()`.
class DensityRatioTable {
 public:
  explicit DensityRatioTable(RatioKind kind = RatioKind::longrun, double gamma = 0.0, std::string p0_label = {},
                             double fallback = 0.0);

  RatioKind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  const std::string& p0_label() const { return p0_label_; }
  double fallback() const { return fallback_; }

  bool contains(State s) const {
    return s >= 0 && static_cast<std::size_t>(s) < known_.size() && known_[static_cast<std::size_t>(s)];
  }
  double operator()(State s) const { return contains(s) ? values_[static_cast<std::size_t>(s)] : fallback_; }
  void set(State s, double omega);

  struct Entry {
    State state;
    double omega;
  };
  std::vector<Entry> entries() const;

 private:
  RatioKind kind_;
  double gamma_;
  std::string p0_label_;
  double fallback_;
  std::vector<double> values_;
  std::vector<std::uint8_t> known_;
};

/// Pointwise p_e / p_b over the union of both supports' blocks. Throws
/// OverlapViolation where p_b = 0 < p_e; 0/0 is stored as 0.
DensityRatioTable exact_omega(const StateDistribution& p_e, const StateDistribution& p_b);

/// Discounted visitation p_e^gamma(.; p0) = (1 - gamma) sum_t gamma^t p0 P^t,
/// summed until gamma^t < tol and renormalized.
StateDistribution discounted_visitation(const TabularModel& model, const PolicyTable& pi_e,
                                        const StateDistribution& p0, double gamma, double tol = 1e-15);

/// omega^gamma(s; p0) = p_e^gamma(s; p0) / p_b(s).
DensityRatioTable exact_omega_discounted(const TabularModel& model, const PolicyTable& pi_e,
                                         const StateDistribution& p0, const StateDistribution& p_b, double gamma,
                                         std::string p0_label = "custom", double tol = 1e-15);

/// Empirical moment system for the stationary ratio over states
/// [first, first + m): visit counts N, weighted transition matrix M,
/// H = diag(N) - M and c = N / (number of transitions).
struct MomentSystem {
  State first_state = 0;
  Eigen::VectorXd counts;
  Eigen::MatrixXd weighted_transitions;
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
};

MomentSystem build_moment_system(const Trajectory& traj, const PolicyTable& pi_b, const PolicyTable& pi_e,
                                 State first_state, int num_states);

struct MomentMatchingFit {
  DensityRatioTable omega;
  ConstrainedLsResult solve;  ///< on the visited states only
  std::vector<State> visited;
};

/// Moment-matching estimate of the stationary ratio. Unvisited states are
/// dropped from the program and assigned 0.
MomentMatchingFit estimate_omega_moment_matching(const Trajectory& traj, const PolicyTable& pi_b,
                                                 const PolicyTable& pi_e, State first_state, int num_states);

/// Chains use states 1..Q; queues use 0..(largest state seen).
MomentMatchingFit estimate_omega_moment_matching(const Trajectory& traj, const PolicyTable& pi_b,
                                                 const PolicyTable& pi_e, const MdpSpec& mdp);

}  // namespace tdr
