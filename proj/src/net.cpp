#include "pdm/net.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace pdm {

RealMatrix layer_forward(const DenseLayer& layer, const RealMatrix& input) {
  if (input.cols() != layer.in_dim())
    throw std::invalid_argument("layer_forward: input dimension mismatch");
  RealMatrix z = matmul(input, layer.weights);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double* zi = z.row(i);
    for (std::size_t k = 0; k < z.cols(); ++k) {
      double v = zi[k] + (layer.use_bias ? layer.bias[k] : 0.0);
      zi[k] = layer.activation == Activation::Tanh ? std::tanh(v) : v;
    }
  }
  return z;
}

std::vector<RealMatrix> forward(const LayeredNetwork& net, const RealMatrix& batch) {
  if (batch.cols() != net.input_dim())
    throw std::invalid_argument("forward: batch dimension mismatch");
  std::vector<RealMatrix> acts;
  acts.reserve(net.hidden.size() + 1);
  acts.push_back(batch);
  for (const DenseLayer& layer : net.hidden) acts.push_back(layer_forward(layer, acts.back()));
  return acts;
}

void adam_step(AdamState& state, DenseLayer& layer, const RealMatrix& weight_grad,
               std::span<const double> bias_grad, const std::string& layer_name) {
  if (layer.frozen) return;
  if (weight_grad.rows() != layer.in_dim() || weight_grad.cols() != layer.out_dim() ||
      bias_grad.size() != layer.bias.size())
    throw std::invalid_argument("adam_step: gradient shape mismatch");

  double sq = 0.0;
  for (double g : weight_grad.data()) {
    if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient in " + layer_name);
    sq += g * g;
  }
  for (double g : bias_grad) {
    if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient in " + layer_name);
    sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double scale = (state.grad_clip > 0.0 && norm > state.grad_clip)
                           ? state.grad_clip / norm
                           : 1.0;

  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  auto update = [&](double& param, double& m, double& v, double grad) {
    grad *= scale;
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad * grad;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    param -= state.rate * mhat / (std::sqrt(vhat) + state.epsilon);
  };

  for (std::size_t i = 0; i < layer.weights.size(); ++i)
    update(layer.weights.data()[i], state.m_w.data()[i], state.v_w.data()[i],
           weight_grad.data()[i]);
  if (layer.use_bias)
    for (std::size_t k = 0; k < layer.bias.size(); ++k)
      update(layer.bias[k], state.m_b[k], state.v_b[k], bias_grad[k]);
}

namespace {

void check_finite(const RealMatrix& m, const char* what) {
  if (!m.all_finite()) throw std::runtime_error(std::string("backprop_full: non-finite ") + what);
}

// backward through one dense layer given dLoss/d(layer output)
ParamGrad layer_backward(const DenseLayer& layer, const RealMatrix& input,
                         const RealMatrix& output, const RealMatrix& out_grad,
                         RealMatrix* input_grad) {
  RealMatrix gz = out_grad;
  if (layer.activation == Activation::Tanh)
    for (std::size_t i = 0; i < gz.size(); ++i)
      gz.data()[i] *= 1.0 - output.data()[i] * output.data()[i];

  ParamGrad g;
  g.weight_grad = matmul(transpose(input), gz);
  g.bias_grad.assign(layer.out_dim(), 0.0);
  for (std::size_t i = 0; i < gz.rows(); ++i)
    for (std::size_t k = 0; k < gz.cols(); ++k) g.bias_grad[k] += gz(i, k);
  if (input_grad) {
    RealMatrix gi = matmul(gz, transpose(layer.weights));
    for (std::size_t i = 0; i < gi.size(); ++i) input_grad->data()[i] += gi.data()[i];
  }
  return g;
}

}  // namespace

NetworkGradients backprop_full(const LayeredNetwork& net, const RealMatrix& batch,
                               const std::vector<RealMatrix>& head_output_grads,
                               const std::vector<double>& branch_weights) {
  if (head_output_grads.size() != net.heads.size() ||
      branch_weights.size() != net.heads.size())
    throw std::invalid_argument("backprop_full: one gradient and weight per head required");

  const std::vector<RealMatrix> acts = forward(net, batch);
  const RealMatrix& features = acts.back();

  NetworkGradients grads;
  grads.heads.resize(net.heads.size());
  RealMatrix feat_grad(features.rows(), features.cols());
  for (std::size_t h = 0; h < net.heads.size(); ++h) {
    RealMatrix g = head_output_grads[h];
    check_finite(g, "head gradient");
    for (double& v : g.data()) v *= branch_weights[h];
    const RealMatrix out = layer_forward(net.heads[h], features);
    grads.heads[h] = layer_backward(net.heads[h], features, out, g, &feat_grad);
  }

  grads.hidden.resize(net.hidden.size());
  RealMatrix upstream = std::move(feat_grad);
  for (std::size_t l = net.hidden.size(); l-- > 0;) {
    check_finite(upstream, "intermediate");
    RealMatrix input_grad(acts[l].rows(), acts[l].cols());
    grads.hidden[l] =
        layer_backward(net.hidden[l], acts[l], acts[l + 1], upstream, l > 0 ? &input_grad : nullptr);
    upstream = std::move(input_grad);
  }
  return grads;
}

LayeredNetwork init(const NetConfig& config, std::uint64_t seed) {
  if (config.input_dim == 0 || config.hidden_sizes.empty() || config.head_sizes.empty())
    throw std::invalid_argument("init: sizes must be nonempty");

  std::mt19937_64 rng(seed);
  auto make_layer = [&](std::size_t in, std::size_t out, Activation act) {
    DenseLayer layer;
    layer.weights = RealMatrix(in, out);
    layer.bias.assign(out, 0.0);
    layer.activation = act;
    layer.use_bias = config.use_bias;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : layer.weights.data()) w = dist(rng);
    return layer;
  };
  auto make_opt = [&](const DenseLayer& layer, double rate) {
    AdamState s;
    s.m_w = RealMatrix(layer.in_dim(), layer.out_dim());
    s.v_w = RealMatrix(layer.in_dim(), layer.out_dim());
    s.m_b.assign(layer.out_dim(), 0.0);
    s.v_b.assign(layer.out_dim(), 0.0);
    s.rate = rate;
    s.grad_clip = config.grad_clip;
    return s;
  };

  LayeredNetwork net;
  net.mode = config.mode;
  std::size_t in = config.input_dim;
  for (std::size_t l = 0; l < config.hidden_sizes.size(); ++l) {
    DenseLayer layer = make_layer(in, config.hidden_sizes[l], Activation::Tanh);
    layer.frozen = config.mode == TrainingMode::FrozenRandom;
    const double rate =
        l < config.hidden_rates.size() && config.hidden_rates[l] > 0.0 ? config.hidden_rates[l]
                                                                       : config.rate;
    net.hidden_opt.push_back(make_opt(layer, rate));
    in = layer.out_dim();
    net.hidden.push_back(std::move(layer));
  }
  for (std::size_t h = 0; h < config.head_sizes.size(); ++h) {
    DenseLayer head = make_layer(in, config.head_sizes[h], Activation::Linear);
    net.head_opt.push_back(make_opt(head, config.rate));
    net.heads.push_back(std::move(head));
  }
  return net;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x50444d31;  // "PDM1"

void write_u64(std::ofstream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint64_t read_u64(std::ifstream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
void write_doubles(std::ofstream& os, const std::vector<double>& v) {
  write_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}
std::vector<double> read_doubles(std::ifstream& is) {
  std::vector<double> v(read_u64(is));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  return v;
}

void write_layer(std::ofstream& os, const DenseLayer& layer, const AdamState& opt) {
  write_u64(os, layer.in_dim());
  write_u64(os, layer.out_dim());
  write_u64(os, static_cast<std::uint64_t>(layer.activation));
  write_u64(os, layer.frozen ? 1 : 0);
  write_u64(os, layer.use_bias ? 1 : 0);
  write_doubles(os, layer.weights.data());
  write_doubles(os, layer.bias);
  write_u64(os, static_cast<std::uint64_t>(opt.step_count));
  write_doubles(os, {opt.rate, opt.beta1, opt.beta2, opt.epsilon, opt.grad_clip});
  write_doubles(os, opt.m_w.data());
  write_doubles(os, opt.v_w.data());
  write_doubles(os, opt.m_b);
  write_doubles(os, opt.v_b);
}

std::pair<DenseLayer, AdamState> read_layer(std::ifstream& is) {
  DenseLayer layer;
  AdamState opt;
  const std::size_t in = read_u64(is);
  const std::size_t out = read_u64(is);
  layer.activation = static_cast<Activation>(read_u64(is));
  layer.frozen = read_u64(is) != 0;
  layer.use_bias = read_u64(is) != 0;
  layer.weights = RealMatrix(in, out);
  layer.weights.data() = read_doubles(is);
  layer.bias = read_doubles(is);
  opt.step_count = static_cast<std::int64_t>(read_u64(is));
  const std::vector<double> scalars = read_doubles(is);
  opt.rate = scalars[0];
  opt.beta1 = scalars[1];
  opt.beta2 = scalars[2];
  opt.epsilon = scalars[3];
  opt.grad_clip = scalars[4];
  opt.m_w = RealMatrix(in, out);
  opt.m_w.data() = read_doubles(is);
  opt.v_w = RealMatrix(in, out);
  opt.v_w.data() = read_doubles(is);
  opt.m_b = read_doubles(is);
  opt.v_b = read_doubles(is);
  return {std::move(layer), std::move(opt)};
}

}  // namespace

void save_checkpoint(const LayeredNetwork& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  write_u64(os, kCheckpointMagic);
  write_u64(os, static_cast<std::uint64_t>(net.mode));
  write_u64(os, net.hidden.size());
  write_u64(os, net.heads.size());
  for (std::size_t l = 0; l < net.hidden.size(); ++l) write_layer(os, net.hidden[l], net.hidden_opt[l]);
  for (std::size_t h = 0; h < net.heads.size(); ++h) write_layer(os, net.heads[h], net.head_opt[h]);
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

LayeredNetwork load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  if (read_u64(is) != kCheckpointMagic) throw std::runtime_error("load_checkpoint: bad magic");
  LayeredNetwork net;
  net.mode = static_cast<TrainingMode>(read_u64(is));
  const std::size_t nh = read_u64(is);
  const std::size_t nheads = read_u64(is);
  for (std::size_t l = 0; l < nh; ++l) {
    auto [layer, opt] = read_layer(is);
    net.hidden.push_back(std::move(layer));
    net.hidden_opt.push_back(std::move(opt));
  }
  for (std::size_t h = 0; h < nheads; ++h) {
    auto [layer, opt] = read_layer(is);
    net.heads.push_back(std::move(layer));
    net.head_opt.push_back(std::move(opt));
  }
  if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return net;
}

}  // namespace pdm
