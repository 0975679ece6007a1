#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "tdr/mdp.hpp"
#include "tdr/stationary.hpp"

namespace tdr {

enum class QKind { discounted, differential };

struct QEntry {
  State state;
  Action action;
  double value;
};

/// Tabular action-value estimate keyed by (state, action). Lookups of pairs
/// never stored return `fallback()`.
///
/// A discounted table carries its discount factor; a differential table
/// carries the average-reward estimate learned alongside it.
class QTable {
 public:
  static QTable discounted(double gamma, double fallback = 0.0);
  static QTable differential(double theta_hat = 0.0, double fallback = 0.0);

  QKind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  double theta_hat() const { return theta_hat_; }
  double fallback() const { return fallback_; }
  void set_theta_hat(double theta) { theta_hat_ = theta; }
  void set_gamma(double gamma);

  bool contains(State s, Action a) const;
  double operator()(State s, Action a) const;
  void set(State s, Action a, double value);

  /// Stored entries ordered by (state, action).
  std::vector<QEntry> entries() const;

  /// Every stored value and the fallback moved by kappa.
  QTable shifted(double kappa) const;

  /// Pointwise sum over the union of stored pairs (fallbacks add too).
  friend QTable operator+(const QTable& lhs, const QTable& rhs);

 private:
  QTable(QKind kind, double gamma, double theta_hat, double fallback)
      : kind_(kind), gamma_(gamma), theta_hat_(theta_hat), fallback_(fallback) {}

  QKind kind_;
  double gamma_;
  double theta_hat_;
  double fallback_;
  std::vector<std::array<double, 2>> values_;
  std::vector<std::uint8_t> known_;  // bit a set when (s, a) is stored
};

/// sum_a pi_e(a|s) q(s, a).
double value_from_q(const QTable& q, const PolicyTable& pi_e, State s);

/// Single-rate TD(0) toward r + gamma * v(s'), sweeping the trajectory in
/// time order `epochs` times.
QTable td_discounted(const Trajectory& traj, const PolicyTable& pi_e, double gamma, double learning_rate,
                     const QTable& init, int epochs = 1);

/// Differential TD: Q and the average-reward estimate move along the same
/// residual r - theta + v(s') - Q(s, a) with their own rates.
QTable td_differential(const Trajectory& traj, const PolicyTable& pi_e, double q_rate, double theta_rate,
                       const QTable& init, int epochs = 1);

inline constexpr double kOracleTolerance = 1e-10;
inline constexpr std::size_t kMaxSweeps = 100'000;

/// Discounted action values by value iteration; the returned table's
/// Bellman residual is below `tol` at every pair.
QTable exact_q_discounted(const TabularModel& model, const PolicyTable& pi_e, double gamma,
                          double tol = kOracleTolerance, std::size_t max_sweeps = kMaxSweeps);
QTable exact_q_discounted(const MdpSpec& mdp, const PolicyTable& pi_e, double gamma, int queue_cap = kDefaultQueueCap,
                          double tol = kOracleTolerance);

/// Differential action values and the long-run average reward (stored as
/// theta_hat) by centred relative value iteration. The value function is
/// normalized to E_{p_e}[V] = 0.
QTable exact_q_differential(const TabularModel& model, const PolicyTable& pi_e, double tol = kOracleTolerance,
                            std::size_t max_sweeps = kMaxSweeps);
QTable exact_q_differential(const MdpSpec& mdp, const PolicyTable& pi_e, int queue_cap = kDefaultQueueCap,
                            double tol = kOracleTolerance);

/// max_{s,a} |q(s,a) - E[R + gamma v(S') | s, a]| over the model's states.
double bellman_residual_discounted(const TabularModel& model, const PolicyTable& pi_e, const QTable& q);
/// max_{s,a} |Q(s,a) + theta - E[R + V(S') | s, a]| with theta = q.theta_hat().
double bellman_residual_differential(const TabularModel& model, const PolicyTable& pi_e, const QTable& q);

}  // namespace tdr
