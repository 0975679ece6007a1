#include "tdr/estimators.hpp"

#include <charconv>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "tdr/errors.hpp"

namespace tdr {

namespace {

double parse_number(std::string_view text, std::string_view context) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw InvalidInput(fmt::format("truncation schedule '{}': bad number '{}'", context, text));
  return value;
}

void check_exponent(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw InvalidInput(fmt::format("truncation exponent must be finite and >= 0, got {}", alpha));
}

}  // namespace

TruncationSchedule TruncationSchedule::per_step(double alpha) {
  check_exponent(alpha);
  return {TruncationMode::per_step, alpha, std::numeric_limits<double>::infinity()};
}

TruncationSchedule TruncationSchedule::horizon(double alpha) {
  check_exponent(alpha);
  return {TruncationMode::horizon, alpha, std::numeric_limits<double>::infinity()};
}

TruncationSchedule TruncationSchedule::fixed(double level) {
  if (!(level > 0.0)) throw InvalidInput(fmt::format("fixed truncation level must be positive, got {}", level));
  return {TruncationMode::fixed, 0.0, level};
}

TruncationSchedule TruncationSchedule::parse(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text == "none") return none();
  if (text.starts_with("t^")) return per_step(parse_number(text.substr(2), text));
  if (text.starts_with("T^")) return horizon(parse_number(text.substr(2), text));
  if (text.starts_with("fixed:")) return fixed(parse_number(text.substr(6), text));
  throw InvalidInput(fmt::format("unknown truncation schedule '{}' (expected none, t^a, T^a or fixed:L)", text));
}

std::string TruncationSchedule::label() const {
  switch (mode) {
    case TruncationMode::none: return "none";
    case TruncationMode::per_step: return fmt::format("t^{}", alpha);
    case TruncationMode::horizon: return fmt::format("T^{}", alpha);
    case TruncationMode::fixed: return fmt::format("fixed:{}", level);
  }
  return "none";
}

std::string_view TruncationSchedule::mode_name() const {
  switch (mode) {
    case TruncationMode::none: return "none";
    case TruncationMode::per_step: return "per_step";
    case TruncationMode::horizon: return "horizon";
    case TruncationMode::fixed: return "fixed";
  }
  return "none";
}

double truncation_level(const TruncationSchedule& sched, std::size_t t, std::size_t horizon) {
  switch (sched.mode) {
    case TruncationMode::none: return std::numeric_limits<double>::infinity();
    case TruncationMode::per_step: return std::pow(static_cast<double>(t + 1), sched.alpha);
    case TruncationMode::horizon: return std::pow(static_cast<double>(horizon), sched.alpha);
    case TruncationMode::fixed: return sched.level;
  }
  return std::numeric_limits<double>::infinity();
}

double overlap_exponent_from_mixing(double zeta, double t0) {
  if (!(zeta > 0.0) || !(t0 > 0.0)) throw InvalidInput("mixing parameters must be positive");
  return 1.0 / (zeta * t0);
}

double theory_truncation_exponent(double delta) {
  if (!(delta > 0.0)) throw InvalidInput("overlap exponent must be positive");
  return delta < 1.0 ? 1.0 / (1.0 + delta) : 0.5;
}

double theory_mse_slope(double delta) {
  if (!(delta > 0.0)) throw InvalidInput("overlap exponent must be positive");
  return delta < 1.0 ? -2.0 * delta / (1.0 + delta) : -1.0;
}

namespace {

// Per-step ingredients shared by every estimator: clamped weight times eta,
// and the Bellman-type residual b_t.
class StepTerms {
 public:
  StepTerms(const QTable& q, const DensityRatioTable& omega, const PolicyTable& pi_e, const PolicyTable& pi_b,
            double next_weight)
      : q_(q), omega_(omega), pi_e_(pi_e), pi_b_(pi_b), next_weight_(next_weight) {}

  double value(State s) {
    const double p1 = pi_e_.treat_prob(s);
    if ((p1 > 0.0 && !q_.contains(s, 1)) || (p1 < 1.0 && !q_.contains(s, 0))) ++missing_q;
    return p1 * q_(s, 1) + (1.0 - p1) * q_(s, 0);
  }

  // R + next_weight * v(S') - q(S, A)
  double residual(const Transition& tr) {
    if (!q_.contains(tr.state, tr.action)) ++missing_q;
    return tr.reward + next_weight_ * value(tr.next_state) - q_(tr.state, tr.action);
  }

  // (omega(S_t) clamped at tau_t) * eta(S_t, A_t). Power schedules never
  // drop below 1, so the level is only evaluated for weights above 1.
  double weight(const Transition& tr, const TruncationSchedule& sched, std::size_t t, std::size_t horizon) {
    if (!omega_.contains(tr.state)) ++missing_omega;
    double w = omega_(tr.state);
    if (sched.mode != TruncationMode::none && (w > 1.0 || sched.mode == TruncationMode::fixed)) {
      const double tau = truncation_level(sched, t, horizon);
      if (w > tau) {
        w = tau;
        ++n_truncated;
      }
    }
    return w * policy_ratio(pi_e_, pi_b_, tr.state, tr.action);
  }

  std::size_t missing_q = 0;
  std::size_t missing_omega = 0;
  std::size_t n_truncated = 0;

 private:
  const QTable& q_;
  const DensityRatioTable& omega_;
  const PolicyTable& pi_e_;
  const PolicyTable& pi_b_;
  double next_weight_;
};

void require_nonempty(const Trajectory& traj) {
  if (traj.empty()) throw InvalidInput("estimator: empty trajectory");
}

void require_discounted(const QTable& q, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("estimator: gamma must lie in (0, 1)");
  if (q.kind() != QKind::discounted || q.gamma() != gamma)
    throw InvalidInput(fmt::format("estimator: q table is not discounted with gamma = {}", gamma));
}

}  // namespace

EstimatorResult dr_discounted(const Trajectory& traj, const QTable& q_hat, const DensityRatioTable& omega_hat,
                              const PolicyTable& pi_e, const PolicyTable& pi_b, double gamma,
                              const StateDistribution& p0) {
  EstimatorResult r = tdr_discounted(traj, q_hat, omega_hat, pi_e, pi_b, gamma, p0, TruncationSchedule::none());
  r.estimator = "dr_discounted";
  return r;
}

EstimatorResult tdr_discounted(const Trajectory& traj, const QTable& q_hat, const DensityRatioTable& omega_hat,
                               const PolicyTable& pi_e, const PolicyTable& pi_b, double gamma,
                               const StateDistribution& p0, const TruncationSchedule& sched) {
  require_nonempty(traj);
  require_discounted(q_hat, gamma);
  StepTerms terms(q_hat, omega_hat, pi_e, pi_b, gamma);
  const std::size_t T = traj.size();

  double initial = 0.0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    const double mass = p0.mass()[i];
    if (mass != 0.0) initial += mass * terms.value(p0.first_state() + static_cast<State>(i));
  }

  double correction = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const Transition& tr = traj[t];
    const double w = terms.weight(tr, sched, t, T);
    if (w != 0.0) correction += w * terms.residual(tr);
  }

  EstimatorResult r;
  r.estimator = "tdr_discounted";
  r.estimate = (1.0 - gamma) * initial + correction / static_cast<double>(T);
  r.schedule = sched;
  r.n_truncated = terms.n_truncated;
  r.horizon = T;
  r.missing_q = terms.missing_q;
  r.missing_omega = terms.missing_omega;
  return r;
}

EstimatorResult dr_longrun(const Trajectory& traj, const QTable& Q_hat, const DensityRatioTable& omega_hat,
                           const PolicyTable& pi_e, const PolicyTable& pi_b) {
  EstimatorResult r = tdr_longrun(traj, Q_hat, omega_hat, pi_e, pi_b, TruncationSchedule::none());
  r.estimator = "dr_longrun";
  return r;
}

EstimatorResult tdr_longrun(const Trajectory& traj, const QTable& Q_hat, const DensityRatioTable& omega_hat,
                            const PolicyTable& pi_e, const PolicyTable& pi_b, const TruncationSchedule& sched) {
  require_nonempty(traj);
  StepTerms terms(Q_hat, omega_hat, pi_e, pi_b, 1.0);
  const std::size_t T = traj.size();
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const Transition& tr = traj[t];
    const double w = terms.weight(tr, sched, t, T);
    if (w != 0.0) {
      numerator += w * terms.residual(tr);
      denominator += w;
    }
  }
  if (!(denominator > 0.0)) throw NumericalError("long-run estimator: degenerate weights (zero total weight)");

  EstimatorResult r;
  r.estimator = "tdr_longrun";
  r.estimate = numerator / denominator;
  r.schedule = sched;
  r.n_truncated = terms.n_truncated;
  r.horizon = T;
  r.missing_q = terms.missing_q;
  r.missing_omega = terms.missing_omega;
  return r;
}

double plug_in_variance_discounted(const Trajectory& traj, const QTable& q_hat, const DensityRatioTable& omega_hat,
                                   const PolicyTable& pi_e, const PolicyTable& pi_b, double gamma,
                                   const TruncationSchedule& sched) {
  require_nonempty(traj);
  require_discounted(q_hat, gamma);
  StepTerms terms(q_hat, omega_hat, pi_e, pi_b, gamma);
  const std::size_t T = traj.size();
  double acc = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double w = terms.weight(traj[t], sched, t, T);
    if (w == 0.0) continue;
    const double x = w * terms.residual(traj[t]);
    acc += x * x;
  }
  return acc / static_cast<double>(T);
}

double plug_in_variance_longrun(const Trajectory& traj, const QTable& Q_hat, const DensityRatioTable& omega_hat,
                                const PolicyTable& pi_e, const PolicyTable& pi_b, double theta_ref,
                                const TruncationSchedule& sched) {
  require_nonempty(traj);
  StepTerms terms(Q_hat, omega_hat, pi_e, pi_b, 1.0);
  const std::size_t T = traj.size();
  double acc = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double w = terms.weight(traj[t], sched, t, T);
    if (w == 0.0) continue;
    const double x = w * (terms.residual(traj[t]) - theta_ref);
    acc += x * x;
  }
  return acc / static_cast<double>(T);
}

Interval normal_interval(double estimate, double variance, std::size_t horizon, double z) {
  if (horizon == 0) throw InvalidInput("normal_interval: horizon must be positive");
  const double half = z * std::sqrt(std::max(variance, 0.0) / static_cast<double>(horizon));
  return {estimate - half, estimate + half};
}

TruncatedEstimator make_discounted_estimator(QTable q_hat, DensityRatioTable omega_hat, PolicyTable pi_e,
                                             PolicyTable pi_b, double gamma, StateDistribution p0) {
  return [q = std::move(q_hat), omega = std::move(omega_hat), pe = std::move(pi_e), pb = std::move(pi_b), gamma,
          p0 = std::move(p0)](const Trajectory& traj, const TruncationSchedule& sched) {
    return tdr_discounted(traj, q, omega, pe, pb, gamma, p0, sched).estimate;
  };
}

TruncatedEstimator make_longrun_estimator(QTable Q_hat, DensityRatioTable omega_hat, PolicyTable pi_e,
                                          PolicyTable pi_b) {
  return [q = std::move(Q_hat), omega = std::move(omega_hat), pe = std::move(pi_e), pb = std::move(pi_b)](
             const Trajectory& traj, const TruncationSchedule& sched) {
    return tdr_longrun(traj, q, omega, pe, pb, sched).estimate;
  };
}

}  // namespace tdr
