#include "tdr/stationary.hpp"

#include <cmath>

#include <Eigen/Dense>

#include <fmt/format.h>

#include "tdr/errors.hpp"

namespace tdr {

std::size_t TabularModel::index_of(State s) const {
  if (!contains(s)) throw InvalidInput(fmt::format("state {} outside the tabulated range", s));
  return static_cast<std::size_t>(s - first_state);
}

namespace {

using Triplet = Eigen::Triplet<double>;

TabularModel tabulate_chain(const ChainMdp& m) {
  const int n = m.num_states;
  TabularModel model;
  model.first_state = 1;
  model.mean_reward.resize(static_cast<std::size_t>(n));
  std::vector<Triplet> reset, advance;
  for (int i = 0; i < n; ++i) {
    const State s = i + 1;
    model.mean_reward[static_cast<std::size_t>(i)] = 10.0 - 5.0 / std::sqrt(static_cast<double>(s));
    reset.emplace_back(i, 0, 1.0);
    const int up = std::min(i + 1, n - 1);
    if (up == 0) {
      advance.emplace_back(i, 0, 1.0);
    } else {
      advance.emplace_back(i, 0, m.reset_prob);
      advance.emplace_back(i, up, 1.0 - m.reset_prob);
    }
  }
  for (auto& k : model.kernel) k.resize(n, n);
  model.kernel[0].setFromTriplets(reset.begin(), reset.end());
  model.kernel[1].setFromTriplets(advance.begin(), advance.end());
  return model;
}

TabularModel tabulate_queue(const QueueMdp& m, int cap) {
  if (cap < 1) throw InvalidInput("queue cap must be at least 1");
  const int n = cap + 1;
  TabularModel model;
  model.first_state = 0;
  model.mean_reward.resize(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) model.mean_reward[static_cast<std::size_t>(x)] = 10.0 - 5.0 / std::sqrt(x + 1.0);

  for (int a = 0; a < 2; ++a) {
    const double rate = a == 1 ? m.lambda1 : m.lambda0;
    std::vector<Triplet> entries;
    for (int x = 0; x < n; ++x) {
      double pmf = std::exp(-rate);
      double below_cap = 0.0;
      for (int k = 0;; ++k) {
        if (k > 0) pmf *= rate / k;
        const int next = std::max(x - 1 + k, 0);
        if (next >= cap) break;
        if (pmf == 0.0 && k > rate) break;
        if (pmf > 0.0) entries.emplace_back(x, next, pmf);
        below_cap += pmf;
      }
      const double rest = 1.0 - below_cap;
      if (rest > 0.0) entries.emplace_back(x, cap, rest);
    }
    model.kernel[static_cast<std::size_t>(a)].resize(n, n);
    // Duplicates (x = 0 with k in {0, 1} both landing on 0) are summed.
    model.kernel[static_cast<std::size_t>(a)].setFromTriplets(entries.begin(), entries.end());
  }
  return model;
}

}  // namespace

TabularModel tabulate(const MdpSpec& mdp, int queue_cap) {
  validate(mdp);
  if (const auto* chain = std::get_if<ChainMdp>(&mdp)) return tabulate_chain(*chain);
  return tabulate_queue(std::get<QueueMdp>(mdp), queue_cap);
}

SparseMatrix policy_kernel(const TabularModel& model, const PolicyTable& policy) {
  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::VectorXd treat(n);
  for (Eigen::Index i = 0; i < n; ++i) treat[i] = policy.treat_prob(model.state_at(static_cast<std::size_t>(i)));
  SparseMatrix p0 = (Eigen::VectorXd::Ones(n) - treat).asDiagonal() * model.kernel[0];
  SparseMatrix p1 = treat.asDiagonal() * model.kernel[1];
  SparseMatrix out = p0 + p1;
  out.prune(0.0);
  return out;
}

StateDistribution stationary_chain(double treat_prob, double reset_prob, int num_states) {
  if (!(treat_prob >= 0.0 && treat_prob <= 1.0) || !(reset_prob >= 0.0 && reset_prob <= 1.0))
    throw InvalidInput("stationary_chain: probabilities must lie in [0, 1]");
  if (num_states < 1) throw InvalidInput("stationary_chain: num_states must be positive");
  const double v = treat_prob * (1.0 - reset_prob);
  std::vector<double> p(static_cast<std::size_t>(num_states));
  double power = 1.0;  // v^(s-1)
  for (int s = 1; s < num_states; ++s) {
    p[static_cast<std::size_t>(s - 1)] = (1.0 - v) * power;
    power *= v;
  }
  p.back() = power;
  return StateDistribution(1, std::move(p));
}

Eigen::VectorXd to_dense(const TabularModel& model, const StateDistribution& p) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(model.size()));
  for (std::size_t i = 0; i < model.size(); ++i) v[static_cast<Eigen::Index>(i)] = p(model.state_at(i));
  return v;
}

StateDistribution from_dense(const TabularModel& model, const Eigen::VectorXd& v) {
  std::vector<double> mass(v.data(), v.data() + v.size());
  for (double& m : mass) m = std::max(m, 0.0);
  return StateDistribution(model.first_state, std::move(mass));
}

double stationarity_residual(const TabularModel& model, const PolicyTable& policy, const StateDistribution& p) {
  const SparseMatrix kernel = policy_kernel(model, policy);
  const Eigen::VectorXd dense = to_dense(model, p);
  return (kernel.transpose() * dense - dense).lpNorm<1>();
}

namespace {
constexpr Eigen::Index kDirectSolveLimit = 4000;
}  // namespace

StateDistribution stationary_numeric(const TabularModel& model, const PolicyTable& policy, double tol,
                                     bool truncated, std::size_t max_iterations) {
  if (!(tol > 0.0)) throw InvalidInput("stationary_numeric: tol must be positive");
  const SparseMatrix kernel_t = SparseMatrix(policy_kernel(model, policy).transpose());
  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  // Slowly mixing kernels (a queue near full load) take power iteration a
  // long time from a uniform start, so start from a direct solve of
  // p (P - I) = 0, sum p = 1 and let the iteration polish it.
  if (n <= kDirectSolveLimit) {
    Eigen::MatrixXd A = Eigen::MatrixXd(kernel_t) - Eigen::MatrixXd::Identity(n, n);
    A.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[n - 1] = 1.0;
    Eigen::VectorXd direct = A.partialPivLu().solve(rhs).cwiseMax(0.0);
    if (direct.allFinite() && direct.sum() > 0.0) p = direct / direct.sum();
  }
  double residual = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd next = kernel_t * p;
    next /= next.sum();
    residual = (next - p).lpNorm<1>();
    p.swap(next);
    // Stop a little inside tol so the reported residual of the returned p is below it.
    if (residual < 0.5 * tol) {
      if (truncated && p[n - 1] > tol)
        throw NumericalError(fmt::format("stationary_numeric: {} mass on the truncation boundary; raise the cap",
                                         p[n - 1]),
                             p[n - 1]);
      return from_dense(model, p);
    }
  }
  throw NumericalError(fmt::format("stationary_numeric: no convergence after {} iterations (residual {:.3e})",
                                   max_iterations, residual),
                       residual);
}

StateDistribution stationary_numeric(const MdpSpec& mdp, const PolicyTable& policy, int queue_cap, double tol) {
  return stationary_numeric(tabulate(mdp, queue_cap), policy, tol, std::holds_alternative<QueueMdp>(mdp));
}

}  // namespace tdr
