#include "tdr/mdp.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tdr/errors.hpp"

namespace tdr {

namespace {

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput(fmt::format("{} must lie in [0, 1], got {}", what, p));
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

PolicyTable::PolicyTable(double default_prob) : default_prob_(default_prob) {
  check_prob(default_prob, "PolicyTable default probability");
}

void PolicyTable::set(State s, double treat_prob) {
  check_prob(treat_prob, "PolicyTable treatment probability");
  overrides_[s] = treat_prob;
}

double PolicyTable::treat_prob(State s) const {
  if (overrides_.empty()) return default_prob_;
  auto it = overrides_.find(s);
  return it == overrides_.end() ? default_prob_ : it->second;
}

double PolicyTable::prob(Action a, State s) const {
  const double p1 = treat_prob(s);
  return a == 1 ? p1 : 1.0 - p1;
}

void validate(const MdpSpec& mdp) {
  std::visit(Overloaded{
                 [](const ChainMdp& m) {
                   if (m.num_states < 1) throw InvalidInput("ChainMdp: num_states must be positive");
                   check_prob(m.reset_prob, "ChainMdp reset probability");
                 },
                 [](const QueueMdp& m) {
                   if (!(m.lambda0 >= 0.0) || !(m.lambda1 >= 0.0) || !std::isfinite(m.lambda0) ||
                       !std::isfinite(m.lambda1))
                     throw InvalidInput("QueueMdp: arrival rates must be finite and nonnegative");
                 },
             },
             mdp);
}

State first_state(const MdpSpec& mdp) { return std::holds_alternative<ChainMdp>(mdp) ? 1 : 0; }

bool is_valid_state(const MdpSpec& mdp, State s) {
  if (const auto* chain = std::get_if<ChainMdp>(&mdp)) return s >= 1 && s <= chain->num_states;
  return s >= 0;
}

double mean_reward(const MdpSpec& mdp, State s) {
  if (!is_valid_state(mdp, s)) throw InvalidInput(fmt::format("invalid state {} for {}", s, describe(mdp)));
  if (std::holds_alternative<ChainMdp>(mdp)) return 10.0 - 5.0 / std::sqrt(static_cast<double>(s));
  return 10.0 - 5.0 / std::sqrt(static_cast<double>(s) + 1.0);
}

std::string describe(const MdpSpec& mdp) {
  return std::visit(Overloaded{
                        [](const ChainMdp& m) {
                          return fmt::format("chain(Q={}, beta={})", m.num_states, m.reset_prob);
                        },
                        [](const QueueMdp& m) {
                          return fmt::format("queue(lambda0={}, lambda1={})", m.lambda0, m.lambda1);
                        },
                    },
                    mdp);
}

bool Trajectory::is_contiguous() const {
  for (std::size_t t = 0; t + 1 < steps.size(); ++t)
    if (steps[t].next_state != steps[t + 1].state) return false;
  return true;
}

StepOutcome step(const MdpSpec& mdp, State s, Action a, RandomStream& rng) {
  if (a != 0 && a != 1) throw InvalidInput(fmt::format("invalid action {}", a));
  if (!is_valid_state(mdp, s)) throw InvalidInput(fmt::format("invalid state {} for {}", s, describe(mdp)));

  State next = std::visit(Overloaded{
                              [&](const ChainMdp& m) -> State {
                                if (a == 0) return 1;
                                if (rng.uniform01() < m.reset_prob) return 1;
                                return s + 1 < m.num_states ? s + 1 : m.num_states;
                              },
                              [&](const QueueMdp& m) -> State {
                                const int arrivals = rng.poisson(a == 1 ? m.lambda1 : m.lambda0);
                                const int x = s - 1 + arrivals;
                                return x > 0 ? x : 0;
                              },
                          },
                          mdp);
  const double reward = mean_reward(mdp, s) + (rng.uniform01() - 0.5);
  return {next, reward};
}

Trajectory sample_trajectory(const MdpSpec& mdp, const PolicyTable& policy, std::size_t length,
                             const InitialState& init, RandomStream& rng) {
  if (length < 1) throw InvalidInput("sample_trajectory: length must be at least 1");
  State s = std::holds_alternative<State>(init) ? std::get<State>(init)
                                                : std::get<StateDistribution>(init).sample(rng);
  Trajectory traj;
  traj.steps.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    const Action a = rng.bernoulli(policy.treat_prob(s)) ? 1 : 0;
    const auto [next, reward] = step(mdp, s, a, rng);
    traj.steps.push_back({s, a, reward, next});
    s = next;
  }
  return traj;
}

double policy_ratio(const PolicyTable& pi_e, const PolicyTable& pi_b, State s, Action a) {
  const double num = pi_e.prob(a, s);
  const double den = pi_b.prob(a, s);
  if (den == 0.0) {
    if (num == 0.0) return 0.0;
    throw OverlapViolation(fmt::format("policy overlap violated at state {}, action {}: pi_b = 0 < pi_e", s, a));
  }
  return num / den;
}

}  // namespace tdr
