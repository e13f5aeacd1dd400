#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdm/distance.hpp"
#include "pdm/net.hpp"

namespace pdm {

enum class Algorithm { Reinforce, ReinforceV, Ppo };

// One experiment: environment + algorithm + training mode + hyperparameters.
// Loaded from a flat JSON document; unknown keys are rejected.
struct TrainConfig {
  std::string env = "cartpole";
  Algorithm algorithm = Algorithm::Reinforce;
  TrainingMode mode = TrainingMode::BpFull;
  std::vector<std::size_t> hidden_sizes{128, 256};
  double gamma = 0.99;
  double sigma2 = 0.1;
  double alpha = 3e-4;
  std::vector<double> alpha_per_layer;  // hidden-layer overrides, empty = schedule
  std::string rate_schedule = "uniform";  // uniform | double | half | depth
  double g_clip = 1.0;
  double w_val = 0.5;
  std::size_t ppo_buffer = 2000;
  std::size_t ppo_batch = 128;
  std::size_t ppo_epochs = 10;
  double ppo_clip = 0.2;
  double ppo_w_kl = 0.01;
  double ppo_clip_value = 0.5;
  bool ppo_local_per_minibatch = true;
  MaskPolicy mask_policy = MaskPolicy::KeepAll;
  bool error_fp = false;
  bool use_bias = true;
  bool whiten_returns = false;
  bool hidden_first = true;
  std::size_t iterations = 1500;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t workers = 1;
  std::size_t smooth_window = 100;

  // test hooks, not part of the JSON schema
  std::optional<std::uint64_t> fault_seed;
  std::size_t fault_iteration = 0;
};

// Parses and validates; throws std::invalid_argument with a field-level
// message on unknown keys or bad values.
TrainConfig parse_config(const std::string& json_text);
TrainConfig load_config(const std::string& path);
std::string config_to_json(const TrainConfig& config);

std::string to_string(Algorithm a);
std::string to_string(TrainingMode m);
std::string to_string(MaskPolicy p);

}  // namespace pdm
