// command-line front end: train / sweep / report / gradcheck / envcheck
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdm/envs.hpp"
#include "pdm/gradcheck.hpp"
#include "pdm/harness.hpp"
#include "pdm/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // runtime / assertion failure
constexpr int kExitUsage = 2;    // usage / config error

int cmd_train(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
              const std::string& out_dir) {
  pdm::TrainConfig config;
  try {
    config = pdm::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << '\n';
    return kExitUsage;
  }
  if (!seeds.empty()) config.seeds = seeds;

  const std::vector<pdm::RunRecord> records = pdm::run(config, out_dir);
  int rc = kExitOk;
  for (const pdm::RunRecord& r : records) {
    if (r.failed) {
      std::cerr << "seed " << r.seed << " failed: " << r.error << '\n';
      rc = kExitFailure;
      continue;
    }
    const pdm::IterationRecord& last = r.iterations.back();
    std::cout << "seed " << r.seed << ": " << last.iteration
              << " iterations, final smoothed score " << last.smoothed_score << '\n';
  }
  return rc;
}

int cmd_sweep(const std::vector<std::string>& config_paths, const std::string& out_dir) {
  int rc = kExitOk;
  for (const std::string& path : config_paths) {
    const std::string name = std::filesystem::path(path).stem().string();
    std::cout << "== " << name << '\n';
    const int one = cmd_train(path, {}, out_dir + "/" + name);
    if (one == kExitUsage) return kExitUsage;
    if (one != kExitOk) rc = kExitFailure;
  }
  return rc;
}

int cmd_gradcheck(std::size_t trials, double tolerance, std::uint64_t seed) {
  const pdm::GradCheckResult r = pdm::gradcheck_all(trials, seed);
  std::cout << "trials: " << r.trials << "\nworst relative error: " << r.worst_rel_err << '\n';
  if (r.trials == 0) {
    std::cout << "no trials run: vacuous pass\n";
    return kExitOk;
  }
  if (!r.pass(tolerance)) {
    std::cerr << "tolerance " << tolerance << " exceeded by case '" << r.worst_case << "' (seed "
              << r.worst_seed << ")\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_report(const std::string& baseline, const std::vector<std::string>& runs,
               const std::string& out_dir) {
  try {
    pdm::write_report(baseline, runs, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "report: " << e.what() << '\n';
    return kExitFailure;
  }
  std::cout << "report written to " << out_dir << '\n';
  return kExitOk;
}

bool check(bool ok, const std::string& what) {
  std::cout << (ok ? "  ok    " : "  FAIL  ") << what << '\n';
  return ok;
}

int cmd_envcheck() {
  bool ok = true;
  for (const char* name : {"cartpole", "acrobot", "pendulum"}) {
    std::cout << name << '\n';
    auto env = pdm::make_env(name);

    // seeded resets reproduce bit-identically
    const std::vector<double> a = env->reset(7), b = env->reset(7);
    ok &= check(a == b, "reset determinism");

    // identical action sequences give identical trajectories
    auto rollout = [&](std::uint64_t seed) {
      std::vector<double> trace = env->reset(seed);
      for (int t = 0; t < 50; ++t) {
        pdm::Action act;
        if (env->discrete())
          act.index = t % static_cast<int>(env->num_actions());
        else
          act.value.assign(env->action_dim(), std::sin(0.3 * t));
        const pdm::StepResult s = env->step(act);
        trace.insert(trace.end(), s.observation.begin(), s.observation.end());
        trace.push_back(s.reward);
        if (s.terminated || s.truncated) break;
      }
      return trace;
    };
    ok &= check(rollout(11) == rollout(11), "trajectory determinism");

    // observations stay finite over a random policy
    std::mt19937_64 rng(3);
    bool finite = true;
    env->reset(3);
    for (int t = 0; t < 200 && finite; ++t) {
      pdm::Action act;
      if (env->discrete()) {
        act.index = static_cast<int>(rng() % env->num_actions());
      } else {
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        act.value.assign(env->action_dim(), u(rng));
      }
      const pdm::StepResult s = env->step(act);
      for (double v : s.observation) finite &= std::isfinite(v);
      finite &= std::isfinite(s.reward);
      if (s.terminated || s.truncated) env->reset(rng());
    }
    ok &= check(finite, "finite observations under random actions");
  }

  // undriven frictionless pendulum conserves energy at small dt
  {
    double theta = 2.0, omega = 0.0;
    auto energy = [](double t, double w) {
      // rod pendulum, m = l = 1, g = 10: E = I w^2 / 2 + m g (l/2) cos t, I = 1/3
      return w * w / 6.0 + 5.0 * std::cos(t);
    };
    const double e0 = energy(theta, omega);
    for (int i = 0; i < 100000; ++i)
      pdm::PendulumSwingup::dynamics_step(theta, omega, 0.0, 1e-4);
    const double drift = std::abs(energy(theta, omega) - e0) / std::abs(e0);
    std::cout << "pendulum energy drift over 10s at dt=1e-4: " << drift << '\n';
    ok &= check(drift < 1e-3, "energy conservation");
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairwise-distance-matching RL toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", report_out = "report", baseline;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> configs, run_dirs;
  std::size_t trials = 100;
  double tolerance = 1e-5;
  std::uint64_t gc_seed = 0;

  CLI::App* train = app.add_subcommand("train", "train one configuration over its seeds");
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--seed", seeds, "override the config's seeds list");
  train->add_option("--out", out_dir, "output directory");

  CLI::App* sweep = app.add_subcommand("sweep", "train several configurations");
  sweep->add_option("--config", configs, "JSON config files")->required();
  sweep->add_option("--out", out_dir, "parent output directory");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_option("--trials", trials, "trials per loss variant");
  gradcheck->add_option("--tolerance", tolerance, "max acceptable relative error");
  gradcheck->add_option("--seed", gc_seed, "base seed");

  CLI::App* report = app.add_subcommand("report", "summaries, profiles, and plots");
  report->add_option("--baseline", baseline, "baseline run directory")->required();
  report->add_option("--runs", run_dirs, "candidate run directories");
  report->add_option("--out", report_out, "report output directory");

  app.add_subcommand("envcheck", "environment determinism and dynamics checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, seeds, out_dir);
    if (sweep->parsed()) return cmd_sweep(configs, out_dir);
    if (gradcheck->parsed()) return cmd_gradcheck(trials, tolerance, gc_seed);
    if (report->parsed()) return cmd_report(baseline, run_dirs, report_out);
    return cmd_envcheck();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
