#include "tdr/value_learning.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include <fmt/format.h>

#include "tdr/errors.hpp"

namespace tdr {

QTable QTable::discounted(double gamma, double fallback) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput(fmt::format("discount must lie in (0, 1), got {}", gamma));
  return QTable(QKind::discounted, gamma, 0.0, fallback);
}

QTable QTable::differential(double theta_hat, double fallback) {
  return QTable(QKind::differential, 0.0, theta_hat, fallback);
}

void QTable::set_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput(fmt::format("discount must lie in (0, 1), got {}", gamma));
  gamma_ = gamma;
}

bool QTable::contains(State s, Action a) const {
  if (s < 0 || static_cast<std::size_t>(s) >= known_.size()) return false;
  return (known_[static_cast<std::size_t>(s)] >> a) & 1U;
}

double QTable::operator()(State s, Action a) const {
  return contains(s, a) ? values_[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] : fallback_;
}

void QTable::set(State s, Action a, double value) {
  if (s < 0) throw InvalidInput(fmt::format("QTable: negative state {}", s));
  if (a != 0 && a != 1) throw InvalidInput(fmt::format("QTable: invalid action {}", a));
  const auto i = static_cast<std::size_t>(s);
  if (i >= values_.size()) {
    values_.resize(i + 1, {fallback_, fallback_});
    known_.resize(i + 1, 0);
  }
  values_[i][static_cast<std::size_t>(a)] = value;
  known_[i] = static_cast<std::uint8_t>(known_[i] | (1U << a));
}

std::vector<QEntry> QTable::entries() const {
  std::vector<QEntry> out;
  for (std::size_t i = 0; i < known_.size(); ++i)
    for (Action a = 0; a < 2; ++a)
      if ((known_[i] >> a) & 1U) out.push_back({static_cast<State>(i), a, values_[i][static_cast<std::size_t>(a)]});
  return out;
}

QTable QTable::shifted(double kappa) const {
  QTable out = *this;
  out.fallback_ += kappa;
  for (auto& row : out.values_)
    for (double& v : row) v += kappa;
  return out;
}

QTable operator+(const QTable& lhs, const QTable& rhs) {
  QTable out = lhs;
  out.fallback_ = lhs.fallback_ + rhs.fallback_;
  out.values_.clear();
  out.known_.clear();
  const std::size_t n = std::max(lhs.known_.size(), rhs.known_.size());
  for (std::size_t i = 0; i < n; ++i)
    for (Action a = 0; a < 2; ++a) {
      const auto s = static_cast<State>(i);
      if (lhs.contains(s, a) || rhs.contains(s, a)) out.set(s, a, lhs(s, a) + rhs(s, a));
    }
  return out;
}

double value_from_q(const QTable& q, const PolicyTable& pi_e, State s) {
  const double p1 = pi_e.treat_prob(s);
  return p1 * q(s, 1) + (1.0 - p1) * q(s, 0);
}

QTable td_discounted(const Trajectory& traj, const PolicyTable& pi_e, double gamma, double learning_rate,
                     const QTable& init, int epochs) {
  if (!(learning_rate >= 0.0)) throw InvalidInput("td_discounted: learning rate must be nonnegative");
  if (epochs < 1) throw InvalidInput("td_discounted: epochs must be at least 1");
  QTable q = init;
  q.set_gamma(gamma);
  for (int e = 0; e < epochs; ++e)
    for (const auto& tr : traj.steps) {
      const double target = tr.reward + gamma * value_from_q(q, pi_e, tr.next_state);
      const double current = q(tr.state, tr.action);
      q.set(tr.state, tr.action, current + learning_rate * (target - current));
    }
  return q;
}

QTable td_differential(const Trajectory& traj, const PolicyTable& pi_e, double q_rate, double theta_rate,
                       const QTable& init, int epochs) {
  if (!(q_rate >= 0.0) || !(theta_rate >= 0.0))
    throw InvalidInput("td_differential: learning rates must be nonnegative");
  if (epochs < 1) throw InvalidInput("td_differential: epochs must be at least 1");
  QTable q = QTable::differential(init.theta_hat(), init.fallback());
  for (const auto& e : init.entries()) q.set(e.state, e.action, e.value);
  double theta = init.theta_hat();
  for (int e = 0; e < epochs; ++e)
    for (const auto& tr : traj.steps) {
      const double current = q(tr.state, tr.action);
      const double residual = tr.reward - theta + value_from_q(q, pi_e, tr.next_state) - current;
      q.set(tr.state, tr.action, current + q_rate * residual);
      theta += theta_rate * residual;
    }
  q.set_theta_hat(theta);
  return q;
}

namespace {

Eigen::VectorXd reward_vector(const TabularModel& model) {
  return Eigen::Map<const Eigen::VectorXd>(model.mean_reward.data(), static_cast<Eigen::Index>(model.size()));
}

void fill(QTable& q, const TabularModel& model, const Eigen::VectorXd& q0, const Eigen::VectorXd& q1) {
  for (std::size_t i = 0; i < model.size(); ++i) {
    q.set(model.state_at(i), 0, q0[static_cast<Eigen::Index>(i)]);
    q.set(model.state_at(i), 1, q1[static_cast<Eigen::Index>(i)]);
  }
}

Eigen::VectorXd value_vector(const TabularModel& model, const PolicyTable& pi_e, const QTable& q) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(model.size()));
  for (std::size_t i = 0; i < model.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = value_from_q(q, pi_e, model.state_at(i));
  return v;
}

}  // namespace

QTable exact_q_discounted(const TabularModel& model, const PolicyTable& pi_e, double gamma, double tol,
                          std::size_t max_sweeps) {
  QTable q = QTable::discounted(gamma);
  const Eigen::VectorXd r = reward_vector(model);
  const SparseMatrix kernel = policy_kernel(model, pi_e);
  Eigen::VectorXd v = r / (1.0 - gamma);
  double change = 0.0;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    Eigen::VectorXd next = r + gamma * (kernel * v);
    change = (next - v).lpNorm<Eigen::Infinity>();
    // q built from v has Bellman residual gamma * P_a (v - next), bounded by gamma * change.
    if (gamma * change < 0.5 * tol) {
      const Eigen::VectorXd q0 = r + gamma * (model.kernel[0] * v);
      const Eigen::VectorXd q1 = r + gamma * (model.kernel[1] * v);
      fill(q, model, q0, q1);
      return q;
    }
    v.swap(next);
  }
  throw NumericalError(fmt::format("exact_q_discounted: no convergence after {} sweeps", max_sweeps), gamma * change);
}

QTable exact_q_discounted(const MdpSpec& mdp, const PolicyTable& pi_e, double gamma, int queue_cap, double tol) {
  return exact_q_discounted(tabulate(mdp, queue_cap), pi_e, gamma, tol);
}

QTable exact_q_differential(const TabularModel& model, const PolicyTable& pi_e, double tol, std::size_t max_sweeps) {
  const StateDistribution pe = stationary_numeric(model, pi_e, 1e-14);
  const Eigen::VectorXd weights = to_dense(model, pe);
  const Eigen::VectorXd r = reward_vector(model);
  const double theta = weights.dot(r);
  const Eigen::VectorXd centred = r - Eigen::VectorXd::Constant(r.size(), theta);
  const SparseMatrix kernel = policy_kernel(model, pi_e);

  // V solves (I - P + 1 p_e^T) V = r - theta, the centred Poisson equation;
  // relative value iteration then polishes it to `tol`.
  const auto n = r.size();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  if (n <= 4000) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd(kernel) +
                        Eigen::VectorXd::Ones(n) * weights.transpose();
    Eigen::VectorXd direct = A.partialPivLu().solve(centred);
    if (direct.allFinite()) v = direct;
  }
  double change = 0.0;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    Eigen::VectorXd next = centred + kernel * v;
    next.array() -= weights.dot(next);
    change = (next - v).lpNorm<Eigen::Infinity>();
    if (change < 0.25 * tol) {
      QTable q = QTable::differential(theta);
      const Eigen::VectorXd q0 = centred + model.kernel[0] * next;
      const Eigen::VectorXd q1 = centred + model.kernel[1] * next;
      fill(q, model, q0, q1);
      return q;
    }
    v.swap(next);
  }
  throw NumericalError(fmt::format("exact_q_differential: no convergence after {} sweeps", max_sweeps), change);
}

QTable exact_q_differential(const MdpSpec& mdp, const PolicyTable& pi_e, int queue_cap, double tol) {
  return exact_q_differential(tabulate(mdp, queue_cap), pi_e, tol);
}

double bellman_residual_discounted(const TabularModel& model, const PolicyTable& pi_e, const QTable& q) {
  const Eigen::VectorXd r = reward_vector(model);
  const Eigen::VectorXd v = value_vector(model, pi_e, q);
  double worst = 0.0;
  for (Action a = 0; a < 2; ++a) {
    const Eigen::VectorXd target = r + q.gamma() * (model.kernel[static_cast<std::size_t>(a)] * v);
    for (std::size_t i = 0; i < model.size(); ++i)
      worst = std::max(worst, std::abs(q(model.state_at(i), a) - target[static_cast<Eigen::Index>(i)]));
  }
  return worst;
}

double bellman_residual_differential(const TabularModel& model, const PolicyTable& pi_e, const QTable& q) {
  const Eigen::VectorXd r = reward_vector(model);
  const Eigen::VectorXd v = value_vector(model, pi_e, q);
  double worst = 0.0;
  for (Action a = 0; a < 2; ++a) {
    const Eigen::VectorXd target = r + model.kernel[static_cast<std::size_t>(a)] * v;
    for (std::size_t i = 0; i < model.size(); ++i)
      worst = std::max(worst,
                       std::abs(q(model.state_at(i), a) + q.theta_hat() - target[static_cast<Eigen::Index>(i)]));
  }
  return worst;
}

}  // namespace tdr
