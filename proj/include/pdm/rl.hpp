#pragma once

#include <random>
#include <span>
#include <vector>

#include "pdm/distance.hpp"
#include "pdm/envs.hpp"
#include "pdm/net.hpp"

namespace pdm {

struct PolicyHead {
  enum class Kind { Categorical, Gaussian };
  Kind kind = Kind::Categorical;
  std::size_t dim = 2;    // number of actions / action dimension
  double sigma2 = 0.1;    // fixed variance, Gaussian only
};

struct EpisodeBatch {
  RealMatrix states;  // T x d
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs;
  std::vector<double> values;  // empty without a value head
  std::vector<double> returns;

  std::size_t length() const { return rewards.size(); }
};

struct Transition {
  std::vector<double> state;
  Action action;
  double log_prob = 0.0;
  double ret = 0.0;
  double value = 0.0;
};

struct ReplayBuffer {
  std::size_t capacity = 2000;
  std::vector<Transition> items;
};

struct UpdateConfig {
  double gamma = 0.99;
  double w_val = 0.5;
  bool whiten_returns = false;
  MaskPolicy mask_policy = MaskPolicy::KeepAll;
  bool error_fp = false;
  bool hidden_first = true;  // hidden layers update before the heads
  std::size_t ppo_batch = 128;
  std::size_t ppo_epochs = 10;
  double ppo_clip = 0.2;
  double ppo_w_kl = 0.01;
  double ppo_clip_value = 0.5;
  bool ppo_local_per_minibatch = true;
};

struct LossRecord {
  double score = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  std::vector<double> local_losses;  // one per hidden layer, local modes only
};

// G_t = sum_{k>=t} gamma^(k-t) r_k, backward recursion.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

struct HeadEval {
  double log_prob = 0.0;
  std::vector<double> grad;  // d log_prob / d logits (or mean)
};

HeadEval head_log_prob_and_grad(const PolicyHead& head, std::span<const double> head_output,
                                const Action& action);

// Roll out one episode with sampled actions; records states, actions,
// rewards, log-probs, optional values and discounted returns.
EpisodeBatch collect(Env& env, const LayeredNetwork& net, const PolicyHead& head,
                     std::mt19937_64& rng, std::uint64_t reset_seed, double gamma);

// REINFORCE with baseline b = 0 on the policy head; hidden layers trained by
// the mode's rule (local losses, full backprop, or frozen).
LossRecord reinforce_update(LayeredNetwork& net, const PolicyHead& head,
                            const EpisodeBatch& episode, const UpdateConfig& cfg);

// REINFORCE with learned state-value baseline; requires a value head.
LossRecord value_baseline_update(LayeredNetwork& net, const PolicyHead& head,
                                 const EpisodeBatch& episode, const UpdateConfig& cfg);

// Clipped-surrogate PPO with KL penalty and clipped value loss over the full
// buffer; consumes (clears) the buffer.
LossRecord ppo_update(LayeredNetwork& net, const PolicyHead& head, ReplayBuffer& buffer,
                      const UpdateConfig& cfg, std::mt19937_64& rng);

// Local-loss update of all unfrozen hidden layers from recorded activations.
// guidance, when given, carries the raw per-point values for the guided
// target. Returns per-layer local losses.
std::vector<double> update_hidden_local(LayeredNetwork& net, const std::vector<RealMatrix>& acts,
                                        std::span<const double> guidance, const UpdateConfig& cfg);

}  // namespace pdm
