#include "pdm/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pdm/envs.hpp"
#include "pdm/metrics.hpp"

namespace pdm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

UpdateConfig update_config_of(const TrainConfig& c) {
  UpdateConfig u;
  u.gamma = c.gamma;
  u.w_val = c.w_val;
  u.whiten_returns = c.whiten_returns;
  u.mask_policy = c.mask_policy;
  u.error_fp = c.error_fp;
  u.hidden_first = c.hidden_first;
  u.ppo_batch = c.ppo_batch;
  u.ppo_epochs = c.ppo_epochs;
  u.ppo_clip = c.ppo_clip;
  u.ppo_w_kl = c.ppo_w_kl;
  u.ppo_clip_value = c.ppo_clip_value;
  u.ppo_local_per_minibatch = c.ppo_local_per_minibatch;
  return u;
}

json iteration_to_json(const IterationRecord& r) {
  json j;
  j["iteration"] = r.iteration;
  j["score"] = r.score;
  j["smoothed_score"] = r.smoothed_score;
  j["policy_loss"] = r.policy_loss;
  j["value_loss"] = r.value_loss;
  j["local_losses"] = r.local_losses;
  j["wall_ms"] = r.wall_ms;
  return j;
}

}  // namespace

PolicyHead build_policy_head(const TrainConfig& config, const Env& env) {
  PolicyHead head;
  if (env.discrete()) {
    head.kind = PolicyHead::Kind::Categorical;
    head.dim = env.num_actions();
  } else {
    head.kind = PolicyHead::Kind::Gaussian;
    head.dim = env.action_dim();
    head.sigma2 = config.sigma2;
  }
  return head;
}

LayeredNetwork build_network(const TrainConfig& config, const Env& env, std::uint64_t seed) {
  NetConfig nc;
  nc.input_dim = env.obs_dim();
  nc.hidden_sizes = config.hidden_sizes;
  nc.head_sizes.push_back(env.discrete() ? env.num_actions() : env.action_dim());
  if (config.algorithm != Algorithm::Reinforce) nc.head_sizes.push_back(1);
  nc.mode = config.mode;
  nc.use_bias = config.use_bias;
  nc.rate = config.alpha;
  nc.grad_clip = config.g_clip;

  const std::size_t layers = config.hidden_sizes.size();
  nc.hidden_rates.assign(layers, config.alpha);
  if (!config.alpha_per_layer.empty()) {
    nc.hidden_rates = config.alpha_per_layer;
  } else if (config.rate_schedule == "double") {
    for (double& r : nc.hidden_rates) r *= 2.0;
  } else if (config.rate_schedule == "half") {
    for (double& r : nc.hidden_rates) r /= 2.0;
  } else if (config.rate_schedule == "depth") {
    // layer right below the policy head gets 2x, the one before 3x, ...
    for (std::size_t l = 0; l < layers; ++l)
      nc.hidden_rates[l] = config.alpha * static_cast<double>(1 + (layers - l));
  }
  return init(nc, seed);
}

RunRecord run_single(const TrainConfig& config, std::uint64_t seed, const std::string& out_dir) {
  RunRecord record;
  record.seed = seed;

  std::ofstream os;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    os.open(out_dir + "/run_" + std::to_string(seed) + ".jsonl", std::ios::trunc);
  }

  try {
    auto env = make_env(config.env);
    LayeredNetwork net = build_network(config, *env, seed);
    const PolicyHead head = build_policy_head(config, *env);
    const UpdateConfig ucfg = update_config_of(config);
    std::mt19937_64 rng(mix_seed(seed, 0));
    ReplayBuffer buffer;
    buffer.capacity = config.ppo_buffer;

    // trailing window for the smoothed score
    std::vector<double> raw_scores;
    raw_scores.reserve(config.iterations);
    double window_sum = 0.0;

    std::uint64_t episode_counter = 0;
    for (std::size_t it = 1; it <= config.iterations; ++it) {
      const auto t0 = std::chrono::steady_clock::now();

      if (config.fault_seed && *config.fault_seed == seed && it == config.fault_iteration)
        net.hidden[0].weights(0, 0) = std::numeric_limits<double>::quiet_NaN();

      LossRecord loss;
      if (config.algorithm == Algorithm::Ppo) {
        double score_sum = 0.0;
        std::size_t episodes = 0;
        while (buffer.items.size() < buffer.capacity) {
          EpisodeBatch ep =
              collect(*env, net, head, rng, mix_seed(seed, ++episode_counter), config.gamma);
          score_sum += std::accumulate(ep.rewards.begin(), ep.rewards.end(), 0.0);
          ++episodes;
          for (std::size_t t = 0; t < ep.length(); ++t) {
            Transition tr;
            tr.state.assign(ep.states.row(t), ep.states.row(t) + ep.states.cols());
            tr.action = ep.actions[t];
            tr.log_prob = ep.log_probs[t];
            tr.ret = ep.returns[t];
            tr.value = ep.values.empty() ? 0.0 : ep.values[t];
            buffer.items.push_back(std::move(tr));
          }
        }
        buffer.items.resize(buffer.capacity);
        loss = ppo_update(net, head, buffer, ucfg, rng);
        loss.score = score_sum / static_cast<double>(episodes);
      } else {
        const EpisodeBatch ep =
            collect(*env, net, head, rng, mix_seed(seed, ++episode_counter), config.gamma);
        loss = config.algorithm == Algorithm::Reinforce
                   ? reinforce_update(net, head, ep, ucfg)
                   : value_baseline_update(net, head, ep, ucfg);
      }

      raw_scores.push_back(loss.score);
      window_sum += loss.score;
      if (raw_scores.size() > config.smooth_window)
        window_sum -= raw_scores[raw_scores.size() - 1 - config.smooth_window];

      IterationRecord ir;
      ir.iteration = it;
      ir.score = loss.score;
      ir.smoothed_score =
          window_sum / static_cast<double>(std::min(raw_scores.size(),
                                                    static_cast<std::size_t>(config.smooth_window)));
      ir.policy_loss = loss.policy_loss;
      ir.value_loss = loss.value_loss;
      ir.local_losses = loss.local_losses;
      ir.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                       .count();
      if (os) os << iteration_to_json(ir).dump() << '\n';
      record.iterations.push_back(std::move(ir));
    }
    if (!out_dir.empty())
      save_checkpoint(net, out_dir + "/checkpoint_" + std::to_string(seed) + ".bin");
  } catch (const std::exception& e) {
    record.failed = true;
    record.error = e.what();
    if (os) os << json{{"failed", true}, {"error", record.error}}.dump() << '\n';
  }
  return record;
}

std::vector<RunRecord> run(const TrainConfig& config, const std::string& out_dir) {
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir + "/config.json") << config_to_json(config) << '\n';
  }

  std::size_t workers = std::max<std::size_t>(1, config.workers);
  if (const char* cap = std::getenv("PDM_RL_THREADS")) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v > 0) workers = std::min(workers, static_cast<std::size_t>(v));
  }
  workers = std::min(workers, config.seeds.size());

  std::vector<RunRecord> records(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.seeds.size()) return;
      records[i] = run_single(config, config.seeds[i], out_dir);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return records;
}

void write_run_jsonl(const RunRecord& record, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_run_jsonl: cannot open " + path);
  for (const IterationRecord& r : record.iterations) os << iteration_to_json(r).dump() << '\n';
  if (record.failed) os << json{{"failed", true}, {"error", record.error}}.dump() << '\n';
}

RunRecord load_run_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_run_jsonl: cannot open " + path);
  RunRecord record;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.contains("failed") && j["failed"].get<bool>()) {
      record.failed = true;
      record.error = j.value("error", "");
      continue;
    }
    IterationRecord r;
    r.iteration = j["iteration"].get<std::size_t>();
    r.score = j["score"].get<double>();
    r.smoothed_score = j["smoothed_score"].get<double>();
    r.policy_loss = j["policy_loss"].get<double>();
    r.value_loss = j["value_loss"].get<double>();
    r.local_losses = j["local_losses"].get<std::vector<double>>();
    r.wall_ms = j["wall_ms"].get<double>();
    record.iterations.push_back(std::move(r));
  }
  return record;
}

RunDir load_run_dir(const std::string& dir) {
  RunDir rd;
  std::ifstream cfg(dir + "/config.json");
  if (!cfg) throw std::runtime_error("load_run_dir: missing config.json in " + dir);
  std::stringstream ss;
  ss << cfg.rdbuf();
  rd.config = parse_config(ss.str());
  for (std::uint64_t seed : rd.config.seeds) {
    const std::string path = dir + "/run_" + std::to_string(seed) + ".jsonl";
    RunRecord rec = load_run_jsonl(path);
    rec.seed = seed;
    rd.records.push_back(std::move(rec));
  }
  return rd;
}

std::vector<double> scores_of(const RunRecord& record) {
  std::vector<double> s;
  s.reserve(record.iterations.size());
  for (const IterationRecord& r : record.iterations) s.push_back(r.score);
  return s;
}

}  // namespace pdm
