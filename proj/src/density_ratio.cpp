#include "tdr/density_ratio.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tdr/errors.hpp"

namespace tdr {

DensityRatioTable::DensityRatioTable(RatioKind kind, double gamma, std::string p0_label, double fallback)
    : kind_(kind), gamma_(gamma), p0_label_(std::move(p0_label)), fallback_(fallback) {
  if (kind == RatioKind::discounted && !(gamma > 0.0 && gamma < 1.0))
    throw InvalidInput("DensityRatioTable: discounted ratio needs gamma in (0, 1)");
}

void DensityRatioTable::set(State s, double omega) {
  if (s < 0) throw InvalidInput(fmt::format("DensityRatioTable: negative state {}", s));
  if (!(omega >= 0.0) || !std::isfinite(omega))
    throw InvalidInput(fmt::format("DensityRatioTable: ratio at state {} must be finite and >= 0, got {}", s, omega));
  const auto i = static_cast<std::size_t>(s);
  if (i >= values_.size()) {
    values_.resize(i + 1, fallback_);
    known_.resize(i + 1, 0);
  }
  values_[i] = omega;
  known_[i] = 1;
}

std::vector<DensityRatioTable::Entry> DensityRatioTable::entries() const {
  std::vector<Entry> out;
  for (std::size_t i = 0; i < known_.size(); ++i)
    if (known_[i]) out.push_back({static_cast<State>(i), values_[i]});
  return out;
}

namespace {

void fill_ratio(DensityRatioTable& table, const StateDistribution& p_e, const StateDistribution& p_b) {
  const State lo = std::min(p_e.first_state(), p_b.first_state());
  const State hi = std::max(p_e.last_state(), p_b.last_state());
  for (State s = lo; s <= hi; ++s) {
    const double num = p_e(s);
    const double den = p_b(s);
    if (den == 0.0) {
      if (num != 0.0)
        throw OverlapViolation(fmt::format("distributional overlap violated at state {}: p_b = 0 < p_e = {}", s, num));
      table.set(s, 0.0);
    } else {
      table.set(s, num / den);
    }
  }
}

}  // namespace

DensityRatioTable exact_omega(const StateDistribution& p_e, const StateDistribution& p_b) {
  DensityRatioTable table(RatioKind::longrun);
  fill_ratio(table, p_e, p_b);
  return table;
}

StateDistribution discounted_visitation(const TabularModel& model, const PolicyTable& pi_e,
                                        const StateDistribution& p0, double gamma, double tol) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("discounted_visitation: gamma must lie in [0, 1)");
  const SparseMatrix kernel_t = SparseMatrix(policy_kernel(model, pi_e).transpose());
  Eigen::VectorXd d = to_dense(model, p0);
  Eigen::VectorXd acc = (1.0 - gamma) * d;
  for (double weight = gamma; weight >= tol; weight *= gamma) {
    d = kernel_t * d;
    acc += (1.0 - gamma) * weight * d;
  }
  acc /= acc.sum();
  return from_dense(model, acc);
}

DensityRatioTable exact_omega_discounted(const TabularModel& model, const PolicyTable& pi_e,
                                         const StateDistribution& p0, const StateDistribution& p_b, double gamma,
                                         std::string p0_label, double tol) {
  DensityRatioTable table(RatioKind::discounted, gamma, std::move(p0_label));
  fill_ratio(table, discounted_visitation(model, pi_e, p0, gamma, tol), p_b);
  return table;
}

MomentSystem build_moment_system(const Trajectory& traj, const PolicyTable& pi_b, const PolicyTable& pi_e,
                                 State first_state, int num_states) {
  if (traj.size() < 1) throw InvalidInput("moment matching needs at least one transition");
  if (num_states < 1) throw InvalidInput("moment matching needs at least one state");
  MomentSystem sys;
  sys.first_state = first_state;
  sys.counts = Eigen::VectorXd::Zero(num_states);
  sys.weighted_transitions = Eigen::MatrixXd::Zero(num_states, num_states);
  auto index = [&](State s) {
    const int i = s - first_state;
    if (i < 0 || i >= num_states)
      throw InvalidInput(fmt::format("moment matching: state {} outside [{}, {}]", s, first_state,
                                     first_state + num_states - 1));
    return static_cast<Eigen::Index>(i);
  };
  for (const auto& tr : traj.steps) {
    const Eigen::Index i = index(tr.state);
    const Eigen::Index j = index(tr.next_state);
    sys.counts[i] += 1.0;
    sys.weighted_transitions(j, i) += policy_ratio(pi_e, pi_b, tr.state, tr.action);
  }
  sys.H = Eigen::MatrixXd(sys.counts.asDiagonal()) - sys.weighted_transitions;
  sys.c = sys.counts / static_cast<double>(traj.size());
  return sys;
}

MomentMatchingFit estimate_omega_moment_matching(const Trajectory& traj, const PolicyTable& pi_b,
                                                 const PolicyTable& pi_e, State first_state, int num_states) {
  const MomentSystem sys = build_moment_system(traj, pi_b, pi_e, first_state, num_states);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < sys.counts.size(); ++i)
    if (sys.counts[i] > 0.0) keep.push_back(i);
  if (keep.empty()) throw NumericalError("moment matching: no visited states");

  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd H(k, k);
  Eigen::VectorXd c(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    c[a] = sys.c[keep[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < k; ++b) H(a, b) = sys.H(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
  }

  MomentMatchingFit fit{DensityRatioTable(RatioKind::longrun), solve_constrained_ls(H, c), {}};
  for (Eigen::Index i = 0; i < sys.counts.size(); ++i) fit.omega.set(first_state + static_cast<State>(i), 0.0);
  for (Eigen::Index a = 0; a < k; ++a) {
    const State s = first_state + static_cast<State>(keep[static_cast<std::size_t>(a)]);
    fit.visited.push_back(s);
    fit.omega.set(s, fit.solve.beta[a]);
  }
  return fit;
}

MomentMatchingFit estimate_omega_moment_matching(const Trajectory& traj, const PolicyTable& pi_b,
                                                 const PolicyTable& pi_e, const MdpSpec& mdp) {
  if (const auto* chain = std::get_if<ChainMdp>(&mdp))
    return estimate_omega_moment_matching(traj, pi_b, pi_e, 1, chain->num_states);
  State top = 0;
  for (const auto& tr : traj.steps) top = std::max({top, tr.state, tr.next_state});
  return estimate_omega_moment_matching(traj, pi_b, pi_e, 0, top + 1);
}

}  // namespace tdr
