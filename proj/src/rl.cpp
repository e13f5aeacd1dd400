#include "pdm/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "pdm/locloss.hpp"

namespace pdm {

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("discounted_returns: gamma outside [0,1]");
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

HeadEval head_log_prob_and_grad(const PolicyHead& head, std::span<const double> head_output,
                                const Action& action) {
  HeadEval ev;
  ev.grad.assign(head_output.size(), 0.0);
  if (head.kind == PolicyHead::Kind::Categorical) {
    const double mx = *std::max_element(head_output.begin(), head_output.end());
    double z = 0.0;
    for (double l : head_output) z += std::exp(l - mx);
    const double lse = mx + std::log(z);
    ev.log_prob = head_output[static_cast<std::size_t>(action.index)] - lse;
    for (std::size_t k = 0; k < head_output.size(); ++k)
      ev.grad[k] = (static_cast<int>(k) == action.index ? 1.0 : 0.0) -
                   std::exp(head_output[k] - lse);
  } else {
    const double s2 = head.sigma2;
    const std::size_t k = head_output.size();
    ev.log_prob = -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi * s2);
    for (std::size_t i = 0; i < k; ++i) {
      const double d = action.value[i] - head_output[i];
      ev.log_prob -= d * d / (2.0 * s2);
      ev.grad[i] = d / s2;
    }
  }
  return ev;
}

namespace {

RealMatrix row_matrix(std::span<const double> v) {
  RealMatrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.data().begin());
  return m;
}

Action sample_action(const PolicyHead& head, std::span<const double> head_output,
                     std::mt19937_64& rng) {
  Action a;
  if (head.kind == PolicyHead::Kind::Categorical) {
    const double mx = *std::max_element(head_output.begin(), head_output.end());
    std::vector<double> p(head_output.size());
    double z = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) z += p[k] = std::exp(head_output[k] - mx);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng) * z;
    std::size_t k = 0;
    for (; k + 1 < p.size(); ++k) {
      if (r < p[k]) break;
      r -= p[k];
    }
    a.index = static_cast<int>(k);
  } else {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma = std::sqrt(head.sigma2);
    a.value.resize(head_output.size());
    for (std::size_t i = 0; i < a.value.size(); ++i)
      a.value[i] = head_output[i] + sigma * gauss(rng);
  }
  return a;
}

// gradients of a linear head on detached features
ParamGrad head_grad_from_features(const RealMatrix& features, const RealMatrix& out_grad) {
  ParamGrad g;
  g.weight_grad = matmul(transpose(features), out_grad);
  g.bias_grad.assign(out_grad.cols(), 0.0);
  for (std::size_t i = 0; i < out_grad.rows(); ++i)
    for (std::size_t k = 0; k < out_grad.cols(); ++k) g.bias_grad[k] += out_grad(i, k);
  return g;
}

std::vector<double> weighting(const EpisodeBatch& episode, const UpdateConfig& cfg,
                              const std::vector<double>* baseline) {
  std::vector<double> w = episode.returns;
  if (baseline)
    for (std::size_t t = 0; t < w.size(); ++t) w[t] -= (*baseline)[t];
  if (cfg.whiten_returns && w.size() > 1) {
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    double var = 0.0;
    for (double x : w) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(w.size()));
    for (double& x : w) x = (x - mean) / (sd + 1e-8);
  }
  return w;
}

bool local_mode(const LayeredNetwork& net) {
  return net.mode == TrainingMode::LocalU || net.mode == TrainingMode::LocalG ||
         net.mode == TrainingMode::FrozenRandom;
}

}  // namespace

EpisodeBatch collect(Env& env, const LayeredNetwork& net, const PolicyHead& head,
                     std::mt19937_64& rng, std::uint64_t reset_seed, double gamma) {
  const bool has_value_head = net.heads.size() > 1;
  EpisodeBatch ep;
  std::vector<double> flat_states;

  std::vector<double> obs = env.reset(reset_seed);
  bool done = false;
  while (!done) {
    const RealMatrix state = row_matrix(obs);
    const std::vector<RealMatrix> acts = forward(net, state);
    const RealMatrix logits = layer_forward(net.heads[0], acts.back());
    const Action a = sample_action(head, {logits.row(0), logits.cols()}, rng);
    const HeadEval ev = head_log_prob_and_grad(head, {logits.row(0), logits.cols()}, a);
    if (has_value_head) {
      const RealMatrix v = layer_forward(net.heads[1], acts.back());
      ep.values.push_back(v(0, 0));
    }
    flat_states.insert(flat_states.end(), obs.begin(), obs.end());
    ep.actions.push_back(a);
    ep.log_probs.push_back(ev.log_prob);

    const StepResult r = env.step(a);
    ep.rewards.push_back(r.reward);
    obs = r.observation;
    done = r.terminated || r.truncated;
  }

  ep.states = RealMatrix(ep.rewards.size(), env.obs_dim());
  ep.states.data() = std::move(flat_states);
  ep.returns = discounted_returns(ep.rewards, gamma);
  return ep;
}

std::vector<double> update_hidden_local(LayeredNetwork& net, const std::vector<RealMatrix>& acts,
                                        std::span<const double> guidance, const UpdateConfig& cfg) {
  std::vector<double> losses(net.hidden.size(), 0.0);
  const std::size_t n = acts[0].rows();
  if (n < 2) return losses;  // pairwise distances need at least two points

  const bool guided = net.mode == TrainingMode::LocalG;
  if (guided && guidance.size() != n)
    throw std::invalid_argument("update_hidden_local: guidance length mismatch");

  std::vector<double> error_factors;  // e_{l-1}, error-fp mode only
  for (std::size_t l = 0; l < net.hidden.size(); ++l) {
    DenseLayer& layer = net.hidden[l];

    LocalLossSpec spec;
    spec.variant = guided ? LossVariant::Guided : LossVariant::Unsupervised;
    spec.in_dim = layer.in_dim();
    spec.out_dim = layer.out_dim();
    spec.error_fp = cfg.error_fp;

    // target from this layer's own (detached) input; error-fp additionally
    // scales it by the previous layer's matching error
    DistanceMatrix dl = pairwise_l1(acts[l]);
    if (cfg.error_fp && !error_factors.empty()) dl = scale_by_error(dl, error_factors);
    const TargetMatrix target = guided ? guide(dl, guidance) : normalize(dl);
    if (cfg.mask_policy != MaskPolicy::KeepAll)
      spec.mask = neighborhood_mask(dl, cfg.mask_policy);

    if (cfg.error_fp) {
      const TargetMatrix out_dist = normalize(pairwise_l1(acts[l + 1]));
      error_factors = forward_error(target, out_dist).factors;
    }

    if (layer.frozen) continue;
    const LayerGradient g =
        layer_gradient(acts[l], layer.weights, layer.bias, target, spec);
    losses[l] = g.loss;
    adam_step(net.hidden_opt[l], layer, g.weight_grad, g.bias_grad,
              "hidden" + std::to_string(l));
  }
  return losses;
}

namespace {

struct HeadUpdatePlan {
  RealMatrix policy_out_grad;          // T x K, dLoss/d logits
  RealMatrix value_out_grad;           // T x 1, empty without value head
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

void apply_plan(LayeredNetwork& net, const RealMatrix& states, const std::vector<RealMatrix>& acts,
                const HeadUpdatePlan& plan, std::span<const double> guidance,
                const UpdateConfig& cfg, std::vector<double>* local_losses,
                bool update_hidden_layers = true) {
  const bool has_value = plan.value_out_grad.rows() > 0;
  if (net.mode == TrainingMode::BpFull) {
    std::vector<RealMatrix> out_grads{plan.policy_out_grad};
    std::vector<double> weights{1.0};
    if (has_value) {
      out_grads.push_back(plan.value_out_grad);
      weights.push_back(cfg.w_val);
    }
    const NetworkGradients g = backprop_full(net, states, out_grads, weights);
    for (std::size_t l = 0; l < net.hidden.size(); ++l)
      adam_step(net.hidden_opt[l], net.hidden[l], g.hidden[l].weight_grad,
                g.hidden[l].bias_grad, "hidden" + std::to_string(l));
    for (std::size_t h = 0; h < net.heads.size(); ++h)
      adam_step(net.head_opt[h], net.heads[h], g.heads[h].weight_grad, g.heads[h].bias_grad,
                "head" + std::to_string(h));
    return;
  }

  // local modes: every layer updates independently from the same forward pass
  auto update_heads = [&] {
    const RealMatrix& features = acts.back();
    const ParamGrad gp = head_grad_from_features(features, plan.policy_out_grad);
    adam_step(net.head_opt[0], net.heads[0], gp.weight_grad, gp.bias_grad, "policy_head");
    if (has_value) {
      const ParamGrad gv = head_grad_from_features(features, plan.value_out_grad);
      adam_step(net.head_opt[1], net.heads[1], gv.weight_grad, gv.bias_grad, "value_head");
    }
  };
  auto update_hidden = [&] {
    if (!update_hidden_layers) return;
    std::vector<double> l = update_hidden_local(net, acts, guidance, cfg);
    if (local_losses) *local_losses = std::move(l);
  };
  if (cfg.hidden_first) {
    update_hidden();
    update_heads();
  } else {
    update_heads();
    update_hidden();
  }
}

}  // namespace

LossRecord reinforce_update(LayeredNetwork& net, const PolicyHead& head,
                            const EpisodeBatch& episode, const UpdateConfig& cfg) {
  const std::size_t t_len = episode.length();
  if (t_len == 0) throw std::invalid_argument("reinforce_update: empty episode");

  const std::vector<RealMatrix> acts = forward(net, episode.states);
  const RealMatrix logits = layer_forward(net.heads[0], acts.back());
  const std::vector<double> w = weighting(episode, cfg, nullptr);

  HeadUpdatePlan plan;
  plan.policy_out_grad = RealMatrix(t_len, logits.cols());
  for (std::size_t t = 0; t < t_len; ++t) {
    const HeadEval ev =
        head_log_prob_and_grad(head, {logits.row(t), logits.cols()}, episode.actions[t]);
    plan.policy_loss -= w[t] * ev.log_prob;
    for (std::size_t k = 0; k < logits.cols(); ++k)
      plan.policy_out_grad(t, k) = -w[t] * ev.grad[k];
  }

  LossRecord rec;
  rec.score = std::accumulate(episode.rewards.begin(), episode.rewards.end(), 0.0);
  rec.policy_loss = plan.policy_loss;
  apply_plan(net, episode.states, acts, plan, episode.returns, cfg,
             local_mode(net) ? &rec.local_losses : nullptr);
  return rec;
}

LossRecord value_baseline_update(LayeredNetwork& net, const PolicyHead& head,
                                 const EpisodeBatch& episode, const UpdateConfig& cfg) {
  if (net.heads.size() < 2)
    throw std::invalid_argument("value_baseline_update: network has no value head");
  const std::size_t t_len = episode.length();
  if (t_len == 0) throw std::invalid_argument("value_baseline_update: empty episode");

  const std::vector<RealMatrix> acts = forward(net, episode.states);
  const RealMatrix logits = layer_forward(net.heads[0], acts.back());
  const RealMatrix values = layer_forward(net.heads[1], acts.back());

  std::vector<double> baseline(t_len);
  for (std::size_t t = 0; t < t_len; ++t) baseline[t] = values(t, 0);
  const std::vector<double> w = weighting(episode, cfg, &baseline);

  HeadUpdatePlan plan;
  plan.policy_out_grad = RealMatrix(t_len, logits.cols());
  plan.value_out_grad = RealMatrix(t_len, 1);
  for (std::size_t t = 0; t < t_len; ++t) {
    const HeadEval ev =
        head_log_prob_and_grad(head, {logits.row(t), logits.cols()}, episode.actions[t]);
    plan.policy_loss -= w[t] * ev.log_prob;
    for (std::size_t k = 0; k < logits.cols(); ++k)
      plan.policy_out_grad(t, k) = -w[t] * ev.grad[k];
    const double err = baseline[t] - episode.returns[t];
    plan.value_loss += err * err / static_cast<double>(t_len);
    plan.value_out_grad(t, 0) = 2.0 * err / static_cast<double>(t_len);
  }

  LossRecord rec;
  rec.score = std::accumulate(episode.rewards.begin(), episode.rewards.end(), 0.0);
  rec.policy_loss = plan.policy_loss;
  rec.value_loss = plan.value_loss;
  apply_plan(net, episode.states, acts, plan, baseline, cfg,
             local_mode(net) ? &rec.local_losses : nullptr);
  return rec;
}

LossRecord ppo_update(LayeredNetwork& net, const PolicyHead& head, ReplayBuffer& buffer,
                      const UpdateConfig& cfg, std::mt19937_64& rng) {
  if (net.heads.size() < 2) throw std::invalid_argument("ppo_update: network has no value head");
  if (buffer.items.size() < buffer.capacity)
    throw std::logic_error("ppo_update: replay buffer not filled to capacity");

  const std::size_t n = buffer.items.size();
  const std::size_t d = buffer.items.front().state.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  LossRecord rec;
  std::size_t updates = 0;
  std::vector<double> local_acc(net.hidden.size(), 0.0);
  std::size_t local_updates = 0;

  for (std::size_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.ppo_batch) {
      const std::size_t b = std::min(cfg.ppo_batch, n - start);
      RealMatrix states(b, d);
      for (std::size_t i = 0; i < b; ++i) {
        const Transition& tr = buffer.items[order[start + i]];
        std::copy(tr.state.begin(), tr.state.end(), states.row(i));
      }

      const std::vector<RealMatrix> acts = forward(net, states);
      const RealMatrix logits = layer_forward(net.heads[0], acts.back());
      const RealMatrix values = layer_forward(net.heads[1], acts.back());

      HeadUpdatePlan plan;
      plan.policy_out_grad = RealMatrix(b, logits.cols());
      plan.value_out_grad = RealMatrix(b, 1);
      std::vector<double> v_old(b);
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        const Transition& tr = buffer.items[order[start + i]];
        v_old[i] = tr.value;
        const HeadEval ev =
            head_log_prob_and_grad(head, {logits.row(i), logits.cols()}, tr.action);
        const double ratio = std::exp(ev.log_prob - tr.log_prob);
        const double adv = tr.ret - tr.value;
        const double clipped = std::clamp(ratio, 1.0 - cfg.ppo_clip, 1.0 + cfg.ppo_clip);
        const double obj_unclipped = ratio * adv;
        const double obj = std::min(obj_unclipped, clipped * adv);
        // surrogate gradient flows only while the unclipped branch is active
        const double dobj_dlp = obj_unclipped <= clipped * adv ? ratio * adv : 0.0;
        plan.policy_loss += (-obj + cfg.ppo_w_kl * (tr.log_prob - ev.log_prob)) * inv_b;
        const double dloss_dlp = (-dobj_dlp - cfg.ppo_w_kl) * inv_b;
        for (std::size_t k = 0; k < logits.cols(); ++k)
          plan.policy_out_grad(i, k) = dloss_dlp * ev.grad[k];

        const double v = values(i, 0);
        const double v_clip =
            tr.value + std::clamp(v - tr.value, -cfg.ppo_clip_value, cfg.ppo_clip_value);
        const double l_raw = (v - tr.ret) * (v - tr.ret);
        const double l_clip = (v_clip - tr.ret) * (v_clip - tr.ret);
        plan.value_loss += std::max(l_raw, l_clip) * inv_b;
        double dv;
        if (l_raw >= l_clip)
          dv = 2.0 * (v - tr.ret);
        else
          dv = std::abs(v - tr.value) < cfg.ppo_clip_value ? 2.0 * (v_clip - tr.ret) : 0.0;
        plan.value_out_grad(i, 0) = dv * inv_b;
      }

      std::vector<double> local_losses;
      const bool hidden_now = cfg.ppo_local_per_minibatch || (epoch == 0 && start == 0);
      apply_plan(net, states, acts, plan, v_old, cfg,
                 local_mode(net) ? &local_losses : nullptr, hidden_now);
      if (!local_losses.empty()) {
        for (std::size_t l = 0; l < local_losses.size(); ++l) local_acc[l] += local_losses[l];
        ++local_updates;
      }
      rec.policy_loss += plan.policy_loss;
      rec.value_loss += plan.value_loss;
      ++updates;
    }
  }

  rec.policy_loss /= static_cast<double>(updates);
  rec.value_loss /= static_cast<double>(updates);
  if (local_updates > 0) {
    rec.local_losses.resize(local_acc.size());
    for (std::size_t l = 0; l < local_acc.size(); ++l)
      rec.local_losses[l] = local_acc[l] / static_cast<double>(local_updates);
  }
  buffer.items.clear();
  return rec;
}

}  // namespace pdm
