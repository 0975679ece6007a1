#include "tdr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "tdr/errors.hpp"
#include "tdr/stationary.hpp"

namespace tdr {

namespace {

// Stream namespaces. Evaluation replications never share a path with training.
constexpr std::uint64_t kTrainTag = 0x7472'6169'6eULL;
constexpr std::uint64_t kOmegaTag = 0x6f6d'6567'61ULL;
constexpr std::uint64_t kEvalTag = 0x6576'616cULL;
constexpr std::uint64_t kLepskiTag = 0x6c65'7073ULL;

bool is_chain(const MdpSpec& mdp) { return std::holds_alternative<ChainMdp>(mdp); }

StateDistribution initial_law(const ExperimentConfig& config) {
  switch (config.objective.initial) {
    case InitialKind::evaluation: return evaluation_stationary(config);
    case InitialKind::behavior: return behavior_stationary(config);
    case InitialKind::state: return StateDistribution::point_mass(config.objective.initial_state);
  }
  throw ConfigError("unknown initial distribution");
}

// Behavior-policy rollout whose start approximates the behavior stationary law.
Trajectory behavior_rollout(const ExperimentConfig& config, const StateDistribution& behavior_law, std::size_t length,
                            RandomStream& rng) {
  const PolicyTable pi_b = config.behavior();
  if (is_chain(config.mdp)) return sample_trajectory(config.mdp, pi_b, length, behavior_law, rng);
  State start = first_state(config.mdp);
  if (config.burn_in > 0) start = sample_trajectory(config.mdp, pi_b, config.burn_in, start, rng).terminal_state();
  return sample_trajectory(config.mdp, pi_b, length, start, rng);
}

double sample_variance(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

std::string Objective::initial_label() const {
  switch (initial) {
    case InitialKind::evaluation: return "evaluation";
    case InitialKind::behavior: return "behavior";
    case InitialKind::state: return fmt::format("state:{}", initial_state);
  }
  return "?";
}

void ExperimentConfig::validate() const {
  try {
    tdr::validate(mdp);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(fmt::format("{} probability must lie in [0, 1], got {}", what, p));
  };
  prob(behavior_prob, "behavior");
  prob(evaluation_prob, "evaluation");
  if ((evaluation_prob > 0.0 && behavior_prob == 0.0) || (evaluation_prob < 1.0 && behavior_prob == 1.0))
    throw ConfigError("behavior policy must cover every action the evaluation policy takes");
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (horizons.empty()) throw ConfigError("horizons must be non-empty");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (horizons[i] < 1) throw ConfigError("horizons must be positive");
    if (i > 0 && horizons[i] <= horizons[i - 1]) throw ConfigError("horizons must be strictly increasing");
  }
  if (schedules.empty() && !lepski) throw ConfigError("no estimators configured");
  if (objective.kind == ObjectiveKind::discounted) {
    if (!(objective.gamma > 0.0 && objective.gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (objective.initial == InitialKind::state && !is_valid_state(mdp, objective.initial_state))
      throw ConfigError(fmt::format("initial state {} is not a state of {}", objective.initial_state, describe(mdp)));
    // Moment matching targets the stationary ratio, which equals the
    // discounted ratio only when p0 is the evaluation stationary law.
    if (nuisance.omega == OmegaSource::moment_matching && objective.initial != InitialKind::evaluation)
      throw ConfigError("moment-matching omega requires initial = evaluation for discounted objectives");
  }
  if (nuisance.q == QSource::td) {
    if (nuisance.train_length < 1) throw ConfigError("train_length must be positive");
    if (!(nuisance.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (objective.kind == ObjectiveKind::longrun && !(nuisance.theta_rate > 0.0))
      throw ConfigError("theta_rate must be positive");
    if (nuisance.epochs < 1) throw ConfigError("epochs must be at least 1");
  }
  if (nuisance.omega == OmegaSource::moment_matching && nuisance.omega_train_length < 2)
    throw ConfigError("omega_train_length must be at least 2");
  if (nuisance.shared_training_data &&
      (nuisance.q != QSource::td || nuisance.omega != OmegaSource::moment_matching ||
       nuisance.train_length != nuisance.omega_train_length))
    throw ConfigError("shared_training_data needs q = td, omega = moment_matching and equal training lengths");
  if (lepski) {
    if (lepski->grid.empty()) throw ConfigError("lepski grid must be non-empty");
    if (lepski->draws < 2) throw ConfigError("lepski draws must be at least 2");
    if (!(lepski->z > 0.0)) throw ConfigError("lepski z must be positive");
  }
  if (queue_cap < 1) throw ConfigError("queue_cap must be positive");
}

StateDistribution behavior_stationary(const ExperimentConfig& config) {
  if (const auto* chain = std::get_if<ChainMdp>(&config.mdp))
    return stationary_chain(config.behavior_prob, chain->reset_prob, chain->num_states);
  return stationary_numeric(config.mdp, config.behavior(), config.queue_cap);
}

StateDistribution evaluation_stationary(const ExperimentConfig& config) {
  if (const auto* chain = std::get_if<ChainMdp>(&config.mdp))
    return stationary_chain(config.evaluation_prob, chain->reset_prob, chain->num_states);
  return stationary_numeric(config.mdp, config.evaluation(), config.queue_cap);
}

Nuisances prepare_nuisances(const ExperimentConfig& config) {
  config.validate();
  const PolicyTable pi_b = config.behavior();
  const PolicyTable pi_e = config.evaluation();
  const bool discounted = config.objective.kind == ObjectiveKind::discounted;
  const double gamma = config.objective.gamma;
  const TabularModel model = tabulate(config.mdp, config.queue_cap);

  Nuisances out;
  Trajectory train;
  out.behavior_law = behavior_stationary(config);
  out.initial = discounted ? initial_law(config) : StateDistribution{};

  if (config.nuisance.q == QSource::exact) {
    out.q = discounted ? exact_q_discounted(model, pi_e, gamma) : exact_q_differential(model, pi_e);
  } else {
    RandomStream rng(config.seed, {kTrainTag});
    train = behavior_rollout(config, out.behavior_law, config.nuisance.train_length, rng);
    out.q = discounted ? td_discounted(train, pi_e, gamma, config.nuisance.learning_rate, QTable::discounted(gamma),
                                       config.nuisance.epochs)
                       : td_differential(train, pi_e, config.nuisance.learning_rate, config.nuisance.theta_rate,
                                         QTable::differential(), config.nuisance.epochs);
  }

  if (config.nuisance.omega == OmegaSource::exact) {
    out.omega = discounted ? exact_omega_discounted(model, pi_e, out.initial, out.behavior_law, gamma,
                                                    config.objective.initial_label())
                           : exact_omega(evaluation_stationary(config), out.behavior_law);
  } else {
    Trajectory aux;
    if (config.nuisance.shared_training_data) {
      aux = std::move(train);
    } else {
      RandomStream rng(config.seed, {kOmegaTag});
      aux = behavior_rollout(config, out.behavior_law, config.nuisance.omega_train_length, rng);
    }
    out.moment_fit = estimate_omega_moment_matching(aux, pi_b, pi_e, config.mdp);
    out.omega = out.moment_fit->omega;
  }
  return out;
}

double ground_truth(const ExperimentConfig& config) {
  config.validate();
  const PolicyTable pi_e = config.evaluation();
  if (config.objective.kind == ObjectiveKind::longrun) {
    const StateDistribution p_e = evaluation_stationary(config);
    return p_e.expectation([&](State s) { return mean_reward(config.mdp, s); });
  }
  const double gamma = config.objective.gamma;
  const TabularModel model = tabulate(config.mdp, config.queue_cap);
  const QTable q = exact_q_discounted(model, pi_e, gamma);
  return (1.0 - gamma) * initial_law(config).expectation([&](State s) { return value_from_q(q, pi_e, s); });
}

Trajectory evaluation_trajectory(const ExperimentConfig& config, const Nuisances& nuisances, std::size_t horizon,
                                 std::size_t rep) {
  RandomStream rng(config.seed, {kEvalTag, horizon, rep});
  return behavior_rollout(config, nuisances.behavior_law, horizon, rng);
}

ReplicationResult run_replication(const ExperimentConfig& config, const Nuisances& nuisances, std::size_t horizon,
                                  std::size_t rep) {
  const PolicyTable pi_b = config.behavior();
  const PolicyTable pi_e = config.evaluation();
  const Trajectory traj = evaluation_trajectory(config, nuisances, horizon, rep);
  const bool discounted = config.objective.kind == ObjectiveKind::discounted;
  const double gamma = config.objective.gamma;

  ReplicationResult out;
  for (const auto& sched : config.schedules) {
    EstimatorResult r =
        discounted ? tdr_discounted(traj, nuisances.q, nuisances.omega, pi_e, pi_b, gamma, nuisances.initial, sched)
                   : tdr_longrun(traj, nuisances.q, nuisances.omega, pi_e, pi_b, sched);
    r.estimator = sched.mode == TruncationMode::none ? "DR" : "TDR";
    if (config.plug_in_variance)
      r.plug_in_variance =
          discounted ? plug_in_variance_discounted(traj, nuisances.q, nuisances.omega, pi_e, pi_b, gamma, sched)
                     : plug_in_variance_longrun(traj, nuisances.q, nuisances.omega, pi_e, pi_b, r.estimate, sched);
    out.estimates.push_back(std::move(r));
  }
  if (config.lepski) {
    const auto& ls = *config.lepski;
    const TruncatedEstimator est =
        discounted ? make_discounted_estimator(nuisances.q, nuisances.omega, pi_e, pi_b, gamma, nuisances.initial)
                   : make_longrun_estimator(nuisances.q, nuisances.omega, pi_e, pi_b);
    RandomStream rng(config.seed, {kLepskiTag, horizon, rep});
    const LepskiOutcome sel = lepski_select(traj, LepskiConfig{ls.grid, ls.draws, ls.z, ls.block_len}, est, rng);
    EstimatorResult r;
    r.estimator = "Lepski";
    r.estimate = sel.selected_estimate();
    r.schedule = sel.grid[sel.selected_index];
    r.horizon = horizon;
    out.estimates.push_back(std::move(r));
    out.lepski_index = sel.selected_index;
  }
  return out;
}

ResultRecord aggregate(std::span<const double> estimates, double oracle) {
  if (estimates.empty()) throw InvalidInput("aggregate: no estimates");
  const double n = static_cast<double>(estimates.size());
  double sum = 0.0, sq = 0.0, abs_dev = 0.0;
  for (double x : estimates) {
    sum += x;
    sq += (x - oracle) * (x - oracle);
    abs_dev += std::abs(x - oracle);
  }
  ResultRecord r;
  r.oracle = oracle;
  r.n_replications = estimates.size();
  r.mean_estimate = sum / n;
  r.bias = r.mean_estimate - oracle;
  r.variance = sample_variance(estimates, r.mean_estimate);
  r.mse = sq / n;
  r.relative_bias = oracle != 0.0 ? abs_dev / n / std::abs(oracle) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

double fit_rate_slope(std::span<const std::size_t> horizons, std::span<const double> mse) {
  if (horizons.size() != mse.size()) throw InvalidInput("fit_rate_slope: length mismatch");
  if (horizons.size() < 3) throw InvalidInput("fit_rate_slope: need at least three horizons");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < mse.size(); ++i) {
    if (!(mse[i] > 0.0)) throw NumericalError(fmt::format("fit_rate_slope: nonpositive mse {}", mse[i]));
    if (horizons[i] == 0) throw InvalidInput("fit_rate_slope: zero horizon");
    x.push_back(std::log(static_cast<double>(horizons[i])));
    y.push_back(std::log(mse[i]));
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw InvalidInput("fit_rate_slope: horizons must not all be equal");
  return sxy / sxx;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentResult result;
  try {
    const Nuisances nuisances = prepare_nuisances(config);
    return run_experiment(config, nuisances, options);
  } catch (const std::exception& e) {
    result.failure = std::current_exception();
    result.failure_message = e.what();
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Nuisances& nuisances,
                                const RunOptions& options) {
  ExperimentResult result;
  try {
    config.validate();
    result.oracle = ground_truth(config);
  } catch (const std::exception& e) {
    result.failure = std::current_exception();
    result.failure_message = e.what();
    return result;
  }

  const unsigned threads = std::max(1u, options.threads);
  for (std::size_t horizon : config.horizons) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<ReplicationResult> reps(config.replications);
    std::vector<std::exception_ptr> errors(config.replications);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t r; (r = next.fetch_add(1)) < config.replications;) {
        try {
          reps[r] = run_replication(config, nuisances, horizon, r);
        } catch (...) {
          errors[r] = std::current_exception();
        }
      }
    };
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned i = 0; i < std::min<std::size_t>(threads, config.replications); ++i) pool.emplace_back(worker);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (std::size_t r = 0; r < config.replications; ++r) {
      if (!errors[r]) continue;
      result.failure = errors[r];
      try {
        std::rethrow_exception(errors[r]);
      } catch (const std::exception& e) {
        result.failure_message = fmt::format("T={} replication {}: {}", horizon, r, e.what());
      } catch (...) {
        result.failure_message = fmt::format("T={} replication {}: unknown error", horizon, r);
      }
      return result;
    }

    const std::size_t n_est = reps.front().estimates.size();
    std::vector<double> column(config.replications);
    for (std::size_t k = 0; k < n_est; ++k) {
      for (std::size_t r = 0; r < config.replications; ++r) column[r] = reps[r].estimates[k].estimate;
      ResultRecord rec = aggregate(column, result.oracle);
      const auto& first = reps.front().estimates[k];
      rec.config_id = config.id;
      rec.horizon = horizon;
      rec.estimator = first.estimator;
      rec.schedule = first.estimator == "Lepski" ? "lepski" : first.schedule.label();
      rec.wall_seconds = seconds;
      result.records.push_back(std::move(rec));
    }
    if (config.lepski) {
      std::vector<std::size_t> counts(config.lepski->grid.size(), 0);
      for (const auto& rep : reps) ++counts[*rep.lepski_index];
      result.lepski_counts.push_back(std::move(counts));
    }
  }
  return result;
}

void write_results_csv(std::ostream& out, const ExperimentConfig& config, const ExperimentResult& result,
                       bool with_timing) {
  const auto& obj = config.objective;
  const std::string objective =
      obj.kind == ObjectiveKind::longrun ? "longrun"
                                         : fmt::format("discounted(gamma={},p0={})", obj.gamma, obj.initial_label());
  fmt::print(out, "# id={} mdp={} objective={} behavior={} evaluation={} seed={}\n", config.id, describe(config.mdp),
             objective, config.behavior_prob, config.evaluation_prob, config.seed);
  if (config.reference_replications > 0)
    fmt::print(out, "# replications={} reference_replications={} replication_scale={}\n", config.replications,
               config.reference_replications,
               static_cast<double>(config.replications) / static_cast<double>(config.reference_replications));
  else
    fmt::print(out, "# replications={}\n", config.replications);
  fmt::print(out, "config,T,estimator,schedule,mean,bias,variance,mse,relative_bias,oracle,n{}\n",
             with_timing ? ",wall_seconds" : "");
  for (const auto& r : result.records) {
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{}", r.config_id, r.horizon, r.estimator, r.schedule,
               r.mean_estimate, r.bias, r.variance, r.mse, r.relative_bias, r.oracle, r.n_replications);
    if (with_timing) fmt::print(out, ",{:.3f}", r.wall_seconds);
    fmt::print(out, "\n");
  }
  if (result.failure) fmt::print(out, "# FAILED: {}\n", result.failure_message);
}

void write_lepski_counts_csv(std::ostream& out, const ExperimentConfig& config, const ExperimentResult& result) {
  fmt::print(out, "config,T,grid_index,schedule,count\n");
  if (!config.lepski) return;
  for (std::size_t h = 0; h < result.lepski_counts.size(); ++h)
    for (std::size_t g = 0; g < result.lepski_counts[h].size(); ++g)
      fmt::print(out, "{},{},{},{},{}\n", config.id, config.horizons[h], g, config.lepski->grid[g].label(),
                 result.lepski_counts[h][g]);
}

}  // namespace tdr
