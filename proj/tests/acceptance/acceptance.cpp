// End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fail. Training runs are cached under acceptance_runs/
// in the working directory so reruns only re-evaluate the checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pdm/distance.hpp"
#include "pdm/gradcheck.hpp"
#include "pdm/harness.hpp"
#include "pdm/locloss.hpp"
#include "pdm/metrics.hpp"
#include "pdm/net.hpp"
#include "pdm/rl.hpp"

using namespace pdm;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& label, bool pass, const std::string& detail) {
  std::printf("criterion %2d [%s] %s — %s\n", id, pass ? "PASS" : "FAIL", label.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

// Trains once and reuses the on-disk records on later invocations.
std::vector<RunRecord> train_cached(const TrainConfig& config, const std::string& name) {
  const std::string dir = "acceptance_runs/" + name;
  try {
    RunDir rd = load_run_dir(dir);
    if (rd.records.size() == config.seeds.size()) {
      bool complete = true;
      for (const RunRecord& r : rd.records)
        complete = complete && !r.failed && r.iterations.size() == config.iterations;
      if (complete) return rd.records;
    }
  } catch (...) {
  }
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::printf("  training %s (%zu seeds x %zu iterations)...\n", name.c_str(),
              config.seeds.size(), config.iterations);
  std::fflush(stdout);
  return run(config, dir);
}

std::vector<std::vector<double>> raw_scores(const std::vector<RunRecord>& records) {
  std::vector<std::vector<double>> out;
  for (const RunRecord& r : records) out.push_back(scores_of(r));
  return out;
}

TrainConfig base_config(const std::string& env, TrainingMode mode) {
  TrainConfig c;
  c.env = env;
  c.algorithm = Algorithm::Reinforce;
  c.mode = mode;
  c.alpha = 5e-4;
  c.iterations = 1500;
  c.seeds = {0, 1, 2, 3, 4};
  c.workers = 1;
  return c;
}

RealMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RealMatrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

bool records_match(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r].failed != b[r].failed || a[r].iterations.size() != b[r].iterations.size())
      return false;
    for (std::size_t i = 0; i < a[r].iterations.size(); ++i) {
      const IterationRecord& x = a[r].iterations[i];
      const IterationRecord& y = b[r].iterations[i];
      // wall_ms is timing noise, everything else must be bit-identical
      if (x.iteration != y.iteration || x.score != y.score ||
          x.smoothed_score != y.smoothed_score || x.policy_loss != y.policy_loss ||
          x.value_loss != y.value_loss || x.local_losses != y.local_losses)
        return false;
    }
  }
  return true;
}

// ------------------------------------------------------------ criterion 1

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const GradCheckResult local = gradcheck_local_losses(100, 2026);
  const GradCheckResult bp = gradcheck_backprop(100, 2026);
  const GradCheckResult all = merge(local, bp);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = all.pass(1e-5) && secs < 60.0;
  report(1, "gradient correctness", pass,
         fmt(all.trials) + " trials, worst rel err " + fmt(all.worst_rel_err) + " (" +
             all.worst_case + ") in " + fmt(secs) + "s");
}

// -------------------------------------------------------- criteria 2,3,4,5

void criteria_training() {
  const std::vector<RunRecord> cp_local =
      train_cached(base_config("cartpole", TrainingMode::LocalU), "cartpole_local_u");
  const SummaryRow cp_local_row = summarize_runs(raw_scores(cp_local), 100);
  report(2, "cartpole local unsupervised reaches 400", cp_local_row.max_score >= 400.0,
         "best averaged score " + fmt(cp_local_row.max_score) + " at iteration " +
             fmt(cp_local_row.max_iter));

  const std::vector<RunRecord> cp_bp =
      train_cached(base_config("cartpole", TrainingMode::BpFull), "cartpole_bp");
  const SummaryRow cp_bp_row = summarize_runs(raw_scores(cp_bp), 100);
  report(3, "cartpole backprop baseline reaches 400", cp_bp_row.max_score >= 400.0,
         "best averaged score " + fmt(cp_bp_row.max_score) + " at iteration " +
             fmt(cp_bp_row.max_iter));

  const std::vector<RunRecord> ac_local =
      train_cached(base_config("acrobot", TrainingMode::LocalG), "acrobot_local_g");
  const std::vector<RunRecord> ac_bp =
      train_cached(base_config("acrobot", TrainingMode::BpFull), "acrobot_bp");
  const SummaryRow ac_local_row = summarize_runs(raw_scores(ac_local), 100);
  const SummaryRow ac_bp_row = summarize_runs(raw_scores(ac_bp), 100);
  report(4, "acrobot guided beats -140 with tighter spread than backprop",
         ac_local_row.max_score >= -140.0 &&
             ac_local_row.rel_spread_pct < ac_bp_row.rel_spread_pct,
         "guided " + fmt(ac_local_row.max_score) + " (spread " +
             fmt(ac_local_row.rel_spread_pct) + "%), backprop " + fmt(ac_bp_row.max_score) +
             " (spread " + fmt(ac_bp_row.rel_spread_pct) + "%)");

  // criterion 5: pooled normalized final scores, local vs backprop
  std::size_t local_hits = 0, local_n = 0, bp_hits = 0, bp_n = 0;
  const auto count_env = [&](const std::vector<RunRecord>& local_recs,
                             const std::vector<RunRecord>& bp_recs) {
    std::vector<std::vector<double>> smoothed;
    for (const RunRecord& r : local_recs) smoothed.push_back(smooth(scores_of(r), 100));
    for (const RunRecord& r : bp_recs) smoothed.push_back(smooth(scores_of(r), 100));
    const NormalizedScores norm = normalized_scores(smoothed);
    for (std::size_t i = 0; i < norm.runs.size(); ++i) {
      const bool hit = norm.runs[i].back() > 0.5;
      if (i < local_recs.size()) {
        ++local_n;
        local_hits += hit ? 1 : 0;
      } else {
        ++bp_n;
        bp_hits += hit ? 1 : 0;
      }
    }
  };
  count_env(cp_local, cp_bp);
  count_env(ac_local, ac_bp);
  const double local_frac = static_cast<double>(local_hits) / static_cast<double>(local_n);
  const double bp_frac = static_cast<double>(bp_hits) / static_cast<double>(bp_n);
  report(5, "local runs clear the 0.5 normalized-score mark at least as often",
         local_frac >= bp_frac,
         "local " + fmt(local_hits) + "/" + fmt(local_n) + ", backprop " + fmt(bp_hits) + "/" +
             fmt(bp_n));
}

// ------------------------------------------------------------ criterion 6

void criterion_isolation() {
  bool pass = true;
  std::string detail = "head updates, frozen mode and rate overrides all isolated";

  TrainConfig cfg;
  cfg.env = "cartpole";
  cfg.mode = TrainingMode::LocalU;
  cfg.hidden_sizes = {8, 8};
  auto env = make_env(cfg.env);
  const PolicyHead head = build_policy_head(cfg, *env);
  UpdateConfig ucfg;

  std::mt19937_64 rng(3);
  {
    // head updates leave (frozen) hidden layers bit-identical
    LayeredNetwork net = build_network(cfg, *env, 11);
    for (DenseLayer& l : net.hidden) l.frozen = true;
    const EpisodeBatch ep = collect(*env, net, head, rng, 5, cfg.gamma);
    const LayeredNetwork before = net;
    reinforce_update(net, head, ep, ucfg);
    for (std::size_t l = 0; l < net.hidden.size(); ++l)
      if (net.hidden[l].weights != before.hidden[l].weights ||
          net.hidden[l].bias != before.hidden[l].bias) {
        pass = false;
        detail = "head update touched hidden layer " + fmt(l);
      }
    if (net.heads[0].weights == before.heads[0].weights) {
      pass = false;
      detail = "head update left the policy head unchanged";
    }
  }
  {
    // FROZEN_RANDOM never moves the hidden stack
    TrainConfig frozen = cfg;
    frozen.mode = TrainingMode::FrozenRandom;
    LayeredNetwork net = build_network(frozen, *env, 12);
    const EpisodeBatch ep = collect(*env, net, head, rng, 6, cfg.gamma);
    const LayeredNetwork before = net;
    reinforce_update(net, head, ep, ucfg);
    for (std::size_t l = 0; l < net.hidden.size(); ++l)
      if (net.hidden[l].weights != before.hidden[l].weights) {
        pass = false;
        detail = "frozen mode moved hidden layer " + fmt(l);
      }
  }
  {
    // a per-layer rate override changes only its designated layer
    NetConfig nc;
    nc.input_dim = 4;
    nc.hidden_sizes = {6, 6};
    nc.head_sizes = {2};
    nc.mode = TrainingMode::LocalU;
    nc.rate = 1e-3;
    LayeredNetwork uniform = init(nc, 21);
    nc.hidden_rates = {1e-3, 5e-3};
    LayeredNetwork overridden = init(nc, 21);

    const RealMatrix batch = random_matrix(rng, 6, 4);
    const std::vector<RealMatrix> acts_a = forward(uniform, batch);
    const std::vector<RealMatrix> acts_b = forward(overridden, batch);
    update_hidden_local(uniform, acts_a, {}, ucfg);
    update_hidden_local(overridden, acts_b, {}, ucfg);
    if (uniform.hidden[0].weights != overridden.hidden[0].weights) {
      pass = false;
      detail = "rate override leaked into an unchanged layer";
    }
    if (uniform.hidden[1].weights == overridden.hidden[1].weights) {
      pass = false;
      detail = "rate override had no effect on its designated layer";
    }
  }
  report(6, "update isolation invariants", pass, detail);
}

// ------------------------------------------------------------ criterion 7

void criterion_distance_properties() {
  bool pass = true;
  std::string detail = "scale invariance, permutation, naive oracle, masks, guide range";
  std::mt19937_64 rng(4);

  // scale invariance of the normalized matrix
  for (double c : {1e-6, 0.5, 3.0, 1e6}) {
    const RealMatrix x = random_matrix(rng, 7, 3);
    RealMatrix scaled = x;
    for (double& v : scaled.data()) v *= c;
    const TargetMatrix a = normalize(pairwise_l1(x));
    const TargetMatrix b = normalize(pairwise_l1(scaled));
    for (std::size_t i = 0; i < a.entries.size(); ++i)
      if (std::abs(a.entries.data()[i] - b.entries.data()[i]) >= 1e-12) {
        pass = false;
        detail = "scale invariance broken at factor " + fmt(c);
      }
  }

  // permutation equivariance, exact
  {
    const std::size_t n = 6;
    const RealMatrix x = random_matrix(rng, n, 4);
    const std::vector<std::size_t> perm{4, 2, 0, 5, 1, 3};
    RealMatrix px(n, 4);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 4; ++k) px(i, k) = x(perm[i], k);
    const DistanceMatrix d = pairwise_l1(x);
    const DistanceMatrix pd = pairwise_l1(px);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (pd.entries(i, j) != d.entries(perm[i], perm[j])) {
          pass = false;
          detail = "permutation equivariance broken";
        }
  }

  // naive double-loop oracle at N = 64, exact
  {
    const std::size_t n = 64, dim = 5;
    const RealMatrix x = random_matrix(rng, n, dim);
    const DistanceMatrix d = pairwise_l1(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += std::abs(x(i, k) - x(j, k));
        if (d.entries(i, j) != s) {
          pass = false;
          detail = "pairwise distances disagree with the naive oracle";
        }
      }
  }

  // mask cardinalities
  for (std::size_t n = 2; n <= 40; ++n) {
    const DistanceMatrix d = pairwise_l1(random_matrix(rng, n, 3));
    const std::size_t half = (n - 1 + 1) / 2;
    const std::size_t quarter = (n - 1 + 3) / 4;
    for (MaskPolicy p : {MaskPolicy::KeepAll, MaskPolicy::ClosestHalf, MaskPolicy::FurthestHalf,
                         MaskPolicy::ClosestAndFurthestQuarter}) {
      const NeighborhoodMask m = neighborhood_mask(d, p);
      std::size_t expect = n - 1;
      if (p == MaskPolicy::ClosestHalf || p == MaskPolicy::FurthestHalf) expect = half;
      if (p == MaskPolicy::ClosestAndFurthestQuarter) expect = std::min(2 * quarter, n - 1);
      for (std::size_t i = 0; i < n; ++i) {
        if (!m.at(i, i)) {
          pass = false;
          detail = "mask dropped a diagonal entry";
        }
        std::size_t kept = 0;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i && m.at(i, j)) ++kept;
        if (kept != expect) {
          pass = false;
          detail = "mask cardinality off at n=" + fmt(n);
        }
      }
    }
  }

  // guided targets stay in [0,1]
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 5;
    const DistanceMatrix d = pairwise_l1(random_matrix(rng, n, 3));
    std::vector<double> values(n);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (double& v : values) v = u(rng);
    const TargetMatrix g = guide(d, values);
    if (!g.guided) pass = false;
    for (double v : g.entries.data())
      if (v < 0.0 || v > 1.0) {
        pass = false;
        detail = "guided target left [0,1]";
      }
  }

  report(7, "distance-module properties", pass, detail);
}

// ---------------------------------------------------------- criteria 8,9

void criterion_sparse() {
  bool exact = true;
  std::mt19937_64 rng(5);
  for (int t = 0; t < 25; ++t) {
    const RealMatrix a = random_matrix(rng, 7, 3);
    const RealMatrix b = random_matrix(rng, 7, 5);
    const DistanceMatrix da = pairwise_l1(a);
    const TargetMatrix ta = normalize(da);
    const TargetMatrix tb = normalize(pairwise_l1(b));
    LocalLossSpec dense;
    dense.in_dim = 3;
    dense.out_dim = 5;
    LocalLossSpec masked = dense;
    masked.mask = neighborhood_mask(da, MaskPolicy::KeepAll);
    if (loss_u(ta, tb, dense) != loss_u(ta, tb, masked)) exact = false;
  }

  TrainConfig cfg = base_config("cartpole", TrainingMode::LocalU);
  cfg.mask_policy = MaskPolicy::ClosestAndFurthestQuarter;
  cfg.seeds = {0, 1, 2};
  const SummaryRow row =
      summarize_runs(raw_scores(train_cached(cfg, "cartpole_quarter_mask")), 100);
  report(8, "sparse quarter mask stays competitive", exact && row.max_score >= 300.0,
         std::string(exact ? "keep-all mask bit-exact" : "KEEP-ALL MASK MISMATCH") +
             ", quarter-mask best averaged score " + fmt(row.max_score));
}

void criterion_error_fp() {
  bool in_range = true;
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const TargetMatrix a = normalize(pairwise_l1(random_matrix(rng, 6, 3)));
    const TargetMatrix b = normalize(pairwise_l1(random_matrix(rng, 6, 4)));
    for (double f : forward_error(a, b).factors)
      if (f < 1.0 || f > 2.0) in_range = false;
  }

  TrainConfig cfg = base_config("cartpole", TrainingMode::LocalU);
  cfg.error_fp = true;
  cfg.seeds = {0, 1, 2};
  const SummaryRow row = summarize_runs(raw_scores(train_cached(cfg, "cartpole_error_fp")), 100);
  report(9, "forwarded-error variant learns", in_range && row.max_score >= 300.0,
         std::string(in_range ? "factors in [1,2]" : "FACTORS OUT OF RANGE") +
             ", best averaged score " + fmt(row.max_score));
}

// ------------------------------------------------------------ criterion 10

void criterion_determinism() {
  TrainConfig cfg;
  cfg.env = "cartpole";
  cfg.algorithm = Algorithm::ReinforceV;
  cfg.mode = TrainingMode::LocalG;
  cfg.hidden_sizes = {16, 16};
  cfg.iterations = 30;
  cfg.seeds = {0, 1, 2};
  cfg.workers = 1;
  const std::vector<RunRecord> serial = run(cfg);
  cfg.workers = 3;
  const std::vector<RunRecord> parallel = run(cfg);
  const std::vector<RunRecord> again = run(cfg);
  const bool pass = records_match(serial, parallel) && records_match(parallel, again);
  report(10, "bit-identical reruns regardless of worker count", pass,
         pass ? "3 seeds x 30 iterations match across 1 and 3 workers"
              : "records diverged between reruns");
}

}  // namespace

int main() {
  criterion_gradients();
  criteria_training();
  criterion_isolation();
  criterion_distance_properties();
  criterion_sparse();
  criterion_error_fp();
  criterion_determinism();
  if (failures > 0) {
    std::printf("%d criterion(s) FAILED\n", failures);
    return 1;
  }
  std::printf("all 10 criteria passed\n");
  return 0;
}
