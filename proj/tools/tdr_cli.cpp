// Command-line front end: simulate, nuisance, estimate, lepski, experiment.
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tdr/config.hpp"
#include "tdr/errors.hpp"
#include "tdr/experiment.hpp"
#include "tdr/io.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Writes to the named file, or stdout when the name is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw tdr::InvalidInput(fmt::format("cannot open '{}' for writing", path));
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

tdr::ExperimentConfig load(const Common& c) {
  tdr::ExperimentConfig config = tdr::load_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  return config;
}

tdr::Trajectory read_trajectory(const std::string& path) {
  auto in = tdr::open_input(path);
  return tdr::read_trajectory_csv(in);
}

tdr::QTable read_q(const std::string& path) {
  auto in = tdr::open_input(path);
  return tdr::read_qtable_csv(in);
}

tdr::DensityRatioTable read_omega(const std::string& path) {
  auto in = tdr::open_input(path);
  return tdr::read_omega_csv(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doubly robust and truncated doubly robust off-policy evaluation"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "override the config seed");
    sub->add_option("--out", common.out, "output file (default stdout)");
  };

  auto* simulate = app.add_subcommand("simulate", "sample a trajectory CSV");
  add_common(simulate);
  std::size_t length = 1000;
  std::string policy = "behavior";
  simulate->add_option("--length", length, "number of transitions")->check(CLI::PositiveNumber);
  simulate->add_option("--policy", policy, "behavior or evaluation")
      ->check(CLI::IsMember({"behavior", "evaluation"}));

  auto* nuisance = app.add_subcommand("nuisance", "fit q and omega as configured and write them as CSV");
  add_common(nuisance);
  std::string q_out = "q.csv", omega_out = "omega.csv";
  nuisance->add_option("--q-out", q_out, "Q table output");
  nuisance->add_option("--omega-out", omega_out, "density ratio output");

  std::string traj_path, q_path, omega_path;
  auto add_inputs = [&](CLI::App* sub) {
    sub->add_option("--trajectory", traj_path, "trajectory CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--q", q_path, "Q table CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--omega", omega_path, "density ratio CSV")->required()->check(CLI::ExistingFile);
  };

  auto* estimate = app.add_subcommand("estimate", "DR/TDR estimates for one trajectory");
  add_common(estimate);
  add_inputs(estimate);
  std::vector<std::string> schedule_text;
  bool with_variance = false;
  estimate->add_option("--schedule", schedule_text, "none, t^a, T^a or fixed:L (repeatable; default from config)");
  estimate->add_flag("--variance", with_variance, "also report the plug-in variance");

  auto* lepski = app.add_subcommand("lepski", "data-driven truncation selection for one trajectory");
  add_common(lepski);
  add_inputs(lepski);
  std::vector<std::string> grid_text;
  lepski->add_option("--grid", grid_text, "grid schedules, weakest truncation first (default from config)");

  auto* experiment = app.add_subcommand("experiment", "run a replication study and write the results CSV");
  add_common(experiment);
  unsigned threads = 1;
  bool timing = false;
  std::string lepski_out;
  experiment->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  experiment->add_flag("--timing", timing, "add a wall-time column");
  experiment->add_option("--lepski-out", lepski_out, "Lepski selection counts CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const tdr::ExperimentConfig config = load(common);
    const bool discounted = config.objective.kind == tdr::ObjectiveKind::discounted;

    if (simulate->parsed()) {
      tdr::ExperimentConfig run = config;
      tdr::Nuisances start;
      if (policy == "evaluation") {
        run.behavior_prob = config.evaluation_prob;
        start.behavior_law = tdr::evaluation_stationary(config);
      } else {
        start.behavior_law = tdr::behavior_stationary(config);
      }
      Output out(common.out);
      tdr::write_trajectory_csv(out.stream(), tdr::evaluation_trajectory(run, start, length, 0));
    } else if (nuisance->parsed()) {
      const tdr::Nuisances n = tdr::prepare_nuisances(config);
      Output q(q_out), w(omega_out);
      tdr::write_qtable_csv(q.stream(), n.q);
      tdr::write_omega_csv(w.stream(), n.omega);
    } else if (estimate->parsed() || lepski->parsed()) {
      const tdr::Trajectory traj = read_trajectory(traj_path);
      const tdr::QTable q = read_q(q_path);
      const tdr::DensityRatioTable omega = read_omega(omega_path);
      const tdr::PolicyTable pi_b = config.behavior(), pi_e = config.evaluation();
      tdr::ExperimentConfig no_fit = config;
      no_fit.nuisance.q = tdr::QSource::exact;
      no_fit.nuisance.omega = tdr::OmegaSource::exact;
      const tdr::StateDistribution p0 =
          discounted ? tdr::prepare_nuisances(no_fit).initial : tdr::StateDistribution{};
      Output out(common.out);
      if (estimate->parsed()) {
        std::vector<tdr::TruncationSchedule> schedules = config.schedules;
        if (!schedule_text.empty()) {
          schedules.clear();
          for (const auto& s : schedule_text) schedules.push_back(tdr::TruncationSchedule::parse(s));
        }
        tdr::write_estimator_header(out.stream());
        for (const auto& sched : schedules) {
          tdr::EstimatorResult r = discounted
                                       ? tdr::tdr_discounted(traj, q, omega, pi_e, pi_b, config.objective.gamma, p0, sched)
                                       : tdr::tdr_longrun(traj, q, omega, pi_e, pi_b, sched);
          r.estimator = sched.mode == tdr::TruncationMode::none ? "DR" : "TDR";
          if (with_variance)
            r.plug_in_variance =
                discounted ? tdr::plug_in_variance_discounted(traj, q, omega, pi_e, pi_b, config.objective.gamma, sched)
                           : tdr::plug_in_variance_longrun(traj, q, omega, pi_e, pi_b, r.estimate, sched);
          tdr::write_estimator_row(out.stream(), r);
        }
      } else {
        tdr::LepskiConfig lc;
        if (config.lepski) lc = {config.lepski->grid, config.lepski->draws, config.lepski->z, config.lepski->block_len};
        if (!grid_text.empty()) {
          lc.grid.clear();
          for (const auto& s : grid_text) lc.grid.push_back(tdr::TruncationSchedule::parse(s));
        }
        const tdr::TruncatedEstimator est =
            discounted ? tdr::make_discounted_estimator(q, omega, pi_e, pi_b, config.objective.gamma, p0)
                       : tdr::make_longrun_estimator(q, omega, pi_e, pi_b);
        tdr::RandomStream rng(config.seed);
        tdr::write_lepski_csv(out.stream(), tdr::lepski_select(traj, lc, est, rng));
      }
    } else if (experiment->parsed()) {
      const tdr::ExperimentResult result = tdr::run_experiment(config, {threads});
      {
        Output out(common.out);
        tdr::write_results_csv(out.stream(), config, result, timing);
      }
      if (!lepski_out.empty()) {
        Output out(lepski_out);
        tdr::write_lepski_counts_csv(out.stream(), config, result);
      }
      if (result.failure) std::rethrow_exception(result.failure);
    }
  } catch (const tdr::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
