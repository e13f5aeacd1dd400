#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pdm/matrix.hpp"

namespace pdm {

enum class Activation { Tanh, Linear };

struct DenseLayer {
  RealMatrix weights;        // in x out
  std::vector<double> bias;  // out
  Activation activation = Activation::Tanh;
  bool frozen = false;
  bool use_bias = true;

  std::size_t in_dim() const { return weights.rows(); }
  std::size_t out_dim() const { return weights.cols(); }
};

struct AdamState {
  RealMatrix m_w, v_w;
  std::vector<double> m_b, v_b;
  std::int64_t step_count = 0;
  double rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 1.0;
};

enum class TrainingMode { BpFull, LocalU, LocalG, FrozenRandom };

struct NetConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_sizes{128, 256};
  std::vector<std::size_t> head_sizes;  // policy head, optional value head
  TrainingMode mode = TrainingMode::BpFull;
  bool use_bias = true;
  double rate = 3e-4;
  std::vector<double> hidden_rates;  // per-layer overrides, empty = uniform
  double grad_clip = 1.0;
};

struct LayeredNetwork {
  std::vector<DenseLayer> hidden;
  std::vector<DenseLayer> heads;  // linear; heads[0] policy, heads[1] value
  std::vector<AdamState> hidden_opt;
  std::vector<AdamState> head_opt;
  TrainingMode mode = TrainingMode::BpFull;

  std::size_t input_dim() const { return hidden.empty() ? 0 : hidden.front().in_dim(); }
  std::size_t feature_dim() const { return hidden.empty() ? 0 : hidden.back().out_dim(); }
};

RealMatrix layer_forward(const DenseLayer& layer, const RealMatrix& input);

// activations[0] = batch, activations[l] = act(W_l^T h_{l-1} + b_l) for each
// hidden layer. Recorded values are plain matrices; consumers treat them as
// constants (the detach contract). Heads are applied separately.
std::vector<RealMatrix> forward(const LayeredNetwork& net, const RealMatrix& batch);

// Global l2-norm clipping over the (weight, bias) gradient pair, then one
// Adam step with bias correction. Frozen layers are untouched.
void adam_step(AdamState& state, DenseLayer& layer, const RealMatrix& weight_grad,
               std::span<const double> bias_grad, const std::string& layer_name);

struct ParamGrad {
  RealMatrix weight_grad;
  std::vector<double> bias_grad;
};

struct NetworkGradients {
  std::vector<ParamGrad> hidden;
  std::vector<ParamGrad> heads;
};

// Exact reverse-mode gradients through all heads and hidden layers.
// head_output_grads[h] is dLoss/d(head h output); branch_weights[h] scales
// that head's entire branch (value branch uses w_val).
NetworkGradients backprop_full(const LayeredNetwork& net, const RealMatrix& batch,
                               const std::vector<RealMatrix>& head_output_grads,
                               const std::vector<double>& branch_weights);

// Uniform weights in [-1/sqrt(in), 1/sqrt(in)], zero biases; deterministic
// given the seed. FrozenRandom marks all hidden layers frozen.
LayeredNetwork init(const NetConfig& config, std::uint64_t seed);

// Versioned binary checkpoint; round-trip is bit-exact.
void save_checkpoint(const LayeredNetwork& net, const std::string& path);
LayeredNetwork load_checkpoint(const std::string& path);

}  // namespace pdm
