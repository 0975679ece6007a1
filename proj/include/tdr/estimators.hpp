#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "tdr/density_ratio.hpp"
#include "tdr/distribution.hpp"
#include "tdr/mdp.hpp"
#include "tdr/value_learning.hpp"

namespace tdr {

enum class TruncationMode { none, per_step, horizon, fixed };

/// Truncation levels tau_t applied to the density-ratio weights.
///
///   none      tau_t = +inf (plain doubly robust)
///   per_step  tau_t = (t + 1)^alpha, t = 0..T-1, so tau_0 = 1
///   horizon   tau_t = T^alpha for every t
///   fixed     tau_t = level
struct TruncationSchedule {
  TruncationMode mode = TruncationMode::none;
  double alpha = 0.0;
  double level = std::numeric_limits<double>::infinity();

  static TruncationSchedule none() { return {}; }
  static TruncationSchedule per_step(double alpha);
  static TruncationSchedule horizon(double alpha);
  static TruncationSchedule fixed(double level);

  /// Accepts "none", "t^a", "T^a" and "fixed:L"; inverse of label().
  static TruncationSchedule parse(std::string_view text);
  std::string label() const;
  std::string_view mode_name() const;

  bool operator==(const TruncationSchedule&) const = default;
};

double truncation_level(const TruncationSchedule& sched, std::size_t t, std::size_t horizon);

/// Weak-overlap exponent implied by geometric mixing time t0 and policy
/// overlap C_eta = exp(zeta): delta = 1 / (zeta * t0).
double overlap_exponent_from_mixing(double zeta, double t0);
/// MSE-balancing truncation exponent: 1/(1 + delta) for delta < 1, 1/2 otherwise.
double theory_truncation_exponent(double delta);
/// Predicted log-log MSE slope: -2 delta / (1 + delta) for delta < 1, -1 otherwise (up to logs).
double theory_mse_slope(double delta);

struct EstimatorResult {
  std::string estimator;
  double estimate = 0.0;
  TruncationSchedule schedule;
  std::size_t n_truncated = 0;
  std::optional<double> plug_in_variance;
  std::size_t horizon = 0;
  std::size_t missing_q = 0;      ///< q/Q lookups that fell back to the table default
  std::size_t missing_omega = 0;  ///< omega lookups that fell back to the table default
};

/// (1 - gamma) sum_s p0(s) v(s) + (1/T) sum_t omega(S_t) eta_t (R_t + gamma v(S_{t+1}) - q(S_t, A_t)).
EstimatorResult dr_discounted(const Trajectory& traj, const QTable& q_hat, const DensityRatioTable& omega_hat,
                              const PolicyTable& pi_e, const PolicyTable& pi_b, double gamma,
                              const StateDistribution& p0);

/// dr_discounted with omega(S_t) replaced by min(omega(S_t), tau_t).
EstimatorResult tdr_discounted(const Trajectory& traj, const QTable& q_hat, const DensityRatioTable& omega_hat,
                               const PolicyTable& pi_e, const PolicyTable& pi_b, double gamma,
                               const StateDistribution& p0, const TruncationSchedule& sched);

/// Self-normalized: sum_t w_t (R_t + V(S_{t+1}) - Q(S_t, A_t)) / sum_t w_t with w_t = omega(S_t) eta_t.
/// Throws NumericalError when the weights sum to zero.
EstimatorResult dr_longrun(const Trajectory& traj, const QTable& Q_hat, const DensityRatioTable& omega_hat,
                           const PolicyTable& pi_e, const PolicyTable& pi_b);

/// dr_longrun with omega clamped at tau_t in both numerator and denominator.
EstimatorResult tdr_longrun(const Trajectory& traj, const QTable& Q_hat, const DensityRatioTable& omega_hat,
                            const PolicyTable& pi_e, const PolicyTable& pi_b, const TruncationSchedule& sched);

/// Mean over t of omega(S_t)^2 eta_t^2 (R_t + gamma v(S_{t+1}) - q(S_t, A_t))^2.
/// A schedule other than none clamps omega as the truncated estimator does.
double plug_in_variance_discounted(const Trajectory& traj, const QTable& q_hat, const DensityRatioTable& omega_hat,
                                   const PolicyTable& pi_e, const PolicyTable& pi_b, double gamma,
                                   const TruncationSchedule& sched = TruncationSchedule::none());

/// Mean over t of omega(S_t)^2 eta_t^2 (R_t + V(S_{t+1}) - Q(S_t, A_t) - theta_ref)^2.
double plug_in_variance_longrun(const Trajectory& traj, const QTable& Q_hat, const DensityRatioTable& omega_hat,
                                const PolicyTable& pi_e, const PolicyTable& pi_b, double theta_ref,
                                const TruncationSchedule& sched = TruncationSchedule::none());

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// estimate +/- z * sqrt(variance / T).
Interval normal_interval(double estimate, double variance, std::size_t horizon, double z = 1.96);

/// Point estimate of one truncated estimator on a (possibly resampled) trajectory.
using TruncatedEstimator = std::function<double(const Trajectory&, const TruncationSchedule&)>;

TruncatedEstimator make_discounted_estimator(QTable q_hat, DensityRatioTable omega_hat, PolicyTable pi_e,
                                             PolicyTable pi_b, double gamma, StateDistribution p0);
TruncatedEstimator make_longrun_estimator(QTable Q_hat, DensityRatioTable omega_hat, PolicyTable pi_e,
                                          PolicyTable pi_b);

}  // namespace tdr
