#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "tdr/distribution.hpp"
#include "tdr/random.hpp"

namespace tdr {

/// Binary-action policy: probability of action 1 per state, with a fallback
/// for states that carry no explicit entry.
class PolicyTable {
 public:
  explicit PolicyTable(double default_prob = 0.0);

  /// State-independent policy treating with probability p everywhere.
  static PolicyTable constant(double p) { return PolicyTable(p); }

  void set(State s, double treat_prob);

  double treat_prob(State s) const;
  /// pi(a | s) for a in {0, 1}; pi(0|s) is the exact complement of pi(1|s).
  double prob(Action a, State s) const;

  double default_prob() const { return default_prob_; }
  const std::map<State, double>& overrides() const { return overrides_; }

 private:
  double default_prob_;
  std::map<State, double> overrides_;
};

/// Chain of states 1..Q. Action 0 resets to state 1; action 1 advances to
/// min(s + 1, Q) unless a reset happens with probability `reset_prob`.
/// Reward at state s is 10 - 5/sqrt(s) plus Unif[-1/2, 1/2] noise.
struct ChainMdp {
  int num_states = 20;
  double reset_prob = 0.5;
};

/// Discrete-time queue with unit service: x' = (x - 1 + B)_+, B ~ Poisson(lambda_a).
/// Reward at x is 10 - 5/sqrt(x + 1) plus Unif[-1/2, 1/2] noise.
struct QueueMdp {
  double lambda0 = 0.1;
  double lambda1 = 0.9;
};

using MdpSpec = std::variant<ChainMdp, QueueMdp>;

/// Throws InvalidInput when parameters are out of range.
void validate(const MdpSpec& mdp);

State first_state(const MdpSpec& mdp);
bool is_valid_state(const MdpSpec& mdp, State s);
/// Expected one-step reward at s (noise has mean zero).
double mean_reward(const MdpSpec& mdp, State s);
std::string describe(const MdpSpec& mdp);

/// One logged transition (S_t, A_t, R_t, S_{t+1}).
struct Transition {
  State state = 0;
  Action action = 0;
  double reward = 0.0;
  State next_state = 0;

  bool operator==(const Transition&) const = default;
};

/// Time-ordered transitions. Trajectories produced by sampling are contiguous
/// (each next_state is the following state); block-bootstrap resamples keep
/// each transition's own next state and may have seams.
struct Trajectory {
  std::vector<Transition> steps;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  const Transition& operator[](std::size_t t) const { return steps[t]; }
  State terminal_state() const { return steps.back().next_state; }
  bool is_contiguous() const;

  bool operator==(const Trajectory&) const = default;
};

struct StepOutcome {
  State next_state;
  double reward;
};

/// Draws the next state, then the reward noise.
StepOutcome step(const MdpSpec& mdp, State s, Action a, RandomStream& rng);

using InitialState = std::variant<State, StateDistribution>;

Trajectory sample_trajectory(const MdpSpec& mdp, const PolicyTable& policy, std::size_t length,
                             const InitialState& init, RandomStream& rng);

/// eta(s, a) = pi_e(a|s) / pi_b(a|s), with 0/0 taken as 0.
double policy_ratio(const PolicyTable& pi_e, const PolicyTable& pi_b, State s, Action a);

}  // namespace tdr
