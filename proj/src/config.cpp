#include "pdm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pdm {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config: field '" + field + "' " + why);
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "reinforce") return Algorithm::Reinforce;
  if (s == "reinforce_v") return Algorithm::ReinforceV;
  if (s == "ppo") return Algorithm::Ppo;
  bad("algorithm", "must be one of reinforce, reinforce_v, ppo (got '" + s + "')");
}

TrainingMode parse_mode(const std::string& s) {
  if (s == "bp") return TrainingMode::BpFull;
  if (s == "local_u") return TrainingMode::LocalU;
  if (s == "local_g") return TrainingMode::LocalG;
  if (s == "frozen") return TrainingMode::FrozenRandom;
  bad("mode", "must be one of bp, local_u, local_g, frozen (got '" + s + "')");
}

MaskPolicy parse_mask(const std::string& s) {
  if (s == "keep_all") return MaskPolicy::KeepAll;
  if (s == "closest_half") return MaskPolicy::ClosestHalf;
  if (s == "furthest_half") return MaskPolicy::FurthestHalf;
  if (s == "closest_furthest_quarter") return MaskPolicy::ClosestAndFurthestQuarter;
  bad("mask_policy", "unknown policy '" + s + "'");
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Reinforce: return "reinforce";
    case Algorithm::ReinforceV: return "reinforce_v";
    case Algorithm::Ppo: return "ppo";
  }
  return "?";
}

std::string to_string(TrainingMode m) {
  switch (m) {
    case TrainingMode::BpFull: return "bp";
    case TrainingMode::LocalU: return "local_u";
    case TrainingMode::LocalG: return "local_g";
    case TrainingMode::FrozenRandom: return "frozen";
  }
  return "?";
}

std::string to_string(MaskPolicy p) {
  switch (p) {
    case MaskPolicy::KeepAll: return "keep_all";
    case MaskPolicy::ClosestHalf: return "closest_half";
    case MaskPolicy::FurthestHalf: return "furthest_half";
    case MaskPolicy::ClosestAndFurthestQuarter: return "closest_furthest_quarter";
  }
  return "?";
}

TrainConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: document must be a JSON object");

  static const std::set<std::string> known = {
      "env",        "algorithm",   "mode",          "hidden_sizes",
      "gamma",      "sigma2",      "alpha",         "alpha_per_layer",
      "rate_schedule", "g_clip",   "w_val",         "ppo_buffer",
      "ppo_batch",  "ppo_epochs",  "ppo_clip",      "ppo_w_kl",
      "ppo_clip_value", "ppo_local_per_minibatch",  "mask_policy",
      "error_fp",   "use_bias",    "whiten_returns", "hidden_first",
      "iterations", "seeds",       "workers",       "smooth_window"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) bad(it.key(), "is not a recognized key");

  TrainConfig c;
  try {
    if (j.contains("env")) c.env = j["env"].get<std::string>();
    if (j.contains("algorithm")) c.algorithm = parse_algorithm(j["algorithm"].get<std::string>());
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("hidden_sizes")) c.hidden_sizes = j["hidden_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
    if (j.contains("sigma2")) c.sigma2 = j["sigma2"].get<double>();
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("alpha_per_layer")) c.alpha_per_layer = j["alpha_per_layer"].get<std::vector<double>>();
    if (j.contains("rate_schedule")) c.rate_schedule = j["rate_schedule"].get<std::string>();
    if (j.contains("g_clip")) c.g_clip = j["g_clip"].get<double>();
    if (j.contains("w_val")) c.w_val = j["w_val"].get<double>();
    if (j.contains("ppo_buffer")) c.ppo_buffer = j["ppo_buffer"].get<std::size_t>();
    if (j.contains("ppo_batch")) c.ppo_batch = j["ppo_batch"].get<std::size_t>();
    if (j.contains("ppo_epochs")) c.ppo_epochs = j["ppo_epochs"].get<std::size_t>();
    if (j.contains("ppo_clip")) c.ppo_clip = j["ppo_clip"].get<double>();
    if (j.contains("ppo_w_kl")) c.ppo_w_kl = j["ppo_w_kl"].get<double>();
    if (j.contains("ppo_clip_value")) c.ppo_clip_value = j["ppo_clip_value"].get<double>();
    if (j.contains("ppo_local_per_minibatch"))
      c.ppo_local_per_minibatch = j["ppo_local_per_minibatch"].get<bool>();
    if (j.contains("mask_policy")) c.mask_policy = parse_mask(j["mask_policy"].get<std::string>());
    if (j.contains("error_fp")) c.error_fp = j["error_fp"].get<bool>();
    if (j.contains("use_bias")) c.use_bias = j["use_bias"].get<bool>();
    if (j.contains("whiten_returns")) c.whiten_returns = j["whiten_returns"].get<bool>();
    if (j.contains("hidden_first")) c.hidden_first = j["hidden_first"].get<bool>();
    if (j.contains("iterations")) c.iterations = j["iterations"].get<std::size_t>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
    if (j.contains("smooth_window")) c.smooth_window = j["smooth_window"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: type error: ") + e.what());
  }

  if (c.env != "cartpole" && c.env != "acrobot" && c.env != "pendulum")
    bad("env", "must be cartpole, acrobot or pendulum (got '" + c.env + "')");
  if (c.hidden_sizes.empty()) bad("hidden_sizes", "must be nonempty");
  for (std::size_t s : c.hidden_sizes)
    if (s == 0) bad("hidden_sizes", "entries must be positive");
  if (!(c.alpha > 0.0)) bad("alpha", "must be positive");
  for (double a : c.alpha_per_layer)
    if (!(a > 0.0)) bad("alpha_per_layer", "entries must be positive");
  if (!c.alpha_per_layer.empty() && c.alpha_per_layer.size() != c.hidden_sizes.size())
    bad("alpha_per_layer", "length must match hidden_sizes");
  if (c.gamma < 0.0 || c.gamma > 1.0) bad("gamma", "must be in [0,1]");
  if (!(c.sigma2 > 0.0)) bad("sigma2", "must be positive");
  if (c.g_clip < 0.0) bad("g_clip", "must be nonnegative");
  if (c.rate_schedule != "uniform" && c.rate_schedule != "double" && c.rate_schedule != "half" &&
      c.rate_schedule != "depth")
    bad("rate_schedule", "must be uniform, double, half or depth");
  if (c.iterations == 0) bad("iterations", "must be positive");
  if (c.seeds.empty()) bad("seeds", "must be nonempty");
  if (c.ppo_buffer == 0) bad("ppo_buffer", "must be positive");
  if (c.ppo_batch == 0) bad("ppo_batch", "must be positive");
  if (c.ppo_epochs == 0) bad("ppo_epochs", "must be positive");
  if (c.smooth_window == 0) bad("smooth_window", "must be positive");
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("config: cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const TrainConfig& c) {
  json j;
  j["env"] = c.env;
  j["algorithm"] = to_string(c.algorithm);
  j["mode"] = to_string(c.mode);
  j["hidden_sizes"] = c.hidden_sizes;
  j["gamma"] = c.gamma;
  j["sigma2"] = c.sigma2;
  j["alpha"] = c.alpha;
  j["alpha_per_layer"] = c.alpha_per_layer;
  j["rate_schedule"] = c.rate_schedule;
  j["g_clip"] = c.g_clip;
  j["w_val"] = c.w_val;
  j["ppo_buffer"] = c.ppo_buffer;
  j["ppo_batch"] = c.ppo_batch;
  j["ppo_epochs"] = c.ppo_epochs;
  j["ppo_clip"] = c.ppo_clip;
  j["ppo_w_kl"] = c.ppo_w_kl;
  j["ppo_clip_value"] = c.ppo_clip_value;
  j["ppo_local_per_minibatch"] = c.ppo_local_per_minibatch;
  j["mask_policy"] = to_string(c.mask_policy);
  j["error_fp"] = c.error_fp;
  j["use_bias"] = c.use_bias;
  j["whiten_returns"] = c.whiten_returns;
  j["hidden_first"] = c.hidden_first;
  j["iterations"] = c.iterations;
  j["seeds"] = c.seeds;
  j["workers"] = c.workers;
  j["smooth_window"] = c.smooth_window;
  return j.dump(2);
}

}  // namespace pdm
