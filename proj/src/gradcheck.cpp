#include "pdm/gradcheck.hpp"

#include <cmath>
#include <random>

#include "pdm/locloss.hpp"
#include "pdm/net.hpp"

namespace pdm {

namespace {

constexpr double kFdStep = 1e-6;

// relative error with an absolute floor so that near-zero coordinate pairs do
// not blow up the ratio
double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-4);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  return z ^ (z >> 31);
}

RealMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  RealMatrix m(r, c);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

// evaluation-only forward of the layer-local loss; independent of the
// analytic gradient's chain-rule path
double eval_local_loss(const RealMatrix& input, const RealMatrix& w, std::span<const double> bias,
                       const TargetMatrix& target, const LocalLossSpec& spec) {
  RealMatrix y = matmul(input, w);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t k = 0; k < y.cols(); ++k) y(i, k) = std::tanh(y(i, k) + bias[k]);
  const TargetMatrix out_dist = normalize(pairwise_l1(y));
  return spec.variant == LossVariant::Guided ? loss_g(target, out_dist, spec)
                                             : loss_u(target, out_dist, spec);
}

// true when the instance sits safely away from the |.|-kinks and max-ties
// that finite differences cannot cross
bool well_conditioned(const RealMatrix& input, const RealMatrix& w, std::span<const double> bias) {
  RealMatrix y = matmul(input, w);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t k = 0; k < y.cols(); ++k) y(i, k) = std::tanh(y(i, k) + bias[k]);
  const std::size_t n = y.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = 0; k < y.cols(); ++k)
        if (std::abs(y(i, k) - y(j, k)) < 1e-4) return false;
  // distinct pair distances must be separated at the top (max tie crossing)
  const DistanceMatrix d = pairwise_l1(y);
  double top1 = 0.0, top2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = d.entries(i, j);
      if (v > top1) {
        top2 = top1;
        top1 = v;
      } else if (v > top2) {
        top2 = v;
      }
    }
  return top1 - top2 > 1e-4;
}

struct Variant {
  const char* name;
  LossVariant loss;
  MaskPolicy mask;
  bool error_scaled;
};

constexpr Variant kVariants[] = {
    {"unsupervised", LossVariant::Unsupervised, MaskPolicy::KeepAll, false},
    {"guided", LossVariant::Guided, MaskPolicy::KeepAll, false},
    {"unsupervised_closest_half", LossVariant::Unsupervised, MaskPolicy::ClosestHalf, false},
    {"unsupervised_quarter", LossVariant::Unsupervised, MaskPolicy::ClosestAndFurthestQuarter,
     false},
    {"guided_closest_half", LossVariant::Guided, MaskPolicy::ClosestHalf, false},
    {"unsupervised_error_fp", LossVariant::Unsupervised, MaskPolicy::KeepAll, true},
};

}  // namespace

GradCheckResult merge(const GradCheckResult& a, const GradCheckResult& b) {
  GradCheckResult r = a;
  r.trials += b.trials;
  if (b.worst_rel_err > r.worst_rel_err) {
    r.worst_rel_err = b.worst_rel_err;
    r.worst_seed = b.worst_seed;
    r.worst_case = b.worst_case;
  }
  return r;
}

GradCheckResult gradcheck_local_losses(std::size_t trials_per_variant, std::uint64_t seed) {
  GradCheckResult result;
  for (const Variant& variant : kVariants) {
    for (std::size_t trial = 0; trial < trials_per_variant; ++trial) {
      const std::uint64_t case_seed = mix(seed, result.trials);
      std::mt19937_64 rng(case_seed);
      std::uniform_int_distribution<std::size_t> pick_n(2, 8), pick_in(1, 6), pick_out(1, 8);

      RealMatrix input, w;
      std::vector<double> bias;
      std::size_t n = 0, in = 0, out = 0;
      for (int attempt = 0; attempt < 64; ++attempt) {
        n = pick_n(rng);
        in = pick_in(rng);
        out = pick_out(rng);
        input = random_matrix(rng, n, in, -1.0, 1.0);
        w = random_matrix(rng, in, out, -1.0, 1.0);
        bias = random_matrix(rng, 1, out, -0.5, 0.5).data();
        if (well_conditioned(input, w, bias)) break;
      }

      // target from an unrelated random batch
      DistanceMatrix dx = pairwise_l1(random_matrix(rng, n, in, -1.0, 1.0));
      if (variant.error_scaled) {
        const std::vector<double> factors = random_matrix(rng, 1, n, 1.0, 2.0).data();
        dx = scale_by_error(dx, factors);
      }
      TargetMatrix target;
      if (variant.loss == LossVariant::Guided) {
        const std::vector<double> values = random_matrix(rng, 1, n, -2.0, 2.0).data();
        target = guide(dx, values);
      } else {
        target = normalize(dx);
      }

      LocalLossSpec spec;
      spec.variant = variant.loss;
      spec.in_dim = in;
      spec.out_dim = out;
      spec.error_fp = variant.error_scaled;
      if (variant.mask != MaskPolicy::KeepAll) spec.mask = neighborhood_mask(dx, variant.mask);

      const LayerGradient analytic = layer_gradient(input, w, bias, target, spec);

      auto probe = [&](double* param, double analytic_grad) {
        const double keep = *param;
        *param = keep + kFdStep;
        const double fp = eval_local_loss(input, w, bias, target, spec);
        *param = keep - kFdStep;
        const double fm = eval_local_loss(input, w, bias, target, spec);
        *param = keep;
        const double fd = (fp - fm) / (2.0 * kFdStep);
        const double err = rel_err(analytic_grad, fd);
        if (err > result.worst_rel_err) {
          result.worst_rel_err = err;
          result.worst_seed = case_seed;
          result.worst_case = variant.name;
        }
      };
      for (std::size_t i = 0; i < w.size(); ++i)
        probe(&w.data()[i], analytic.weight_grad.data()[i]);
      for (std::size_t k = 0; k < bias.size(); ++k) probe(&bias[k], analytic.bias_grad[k]);
      ++result.trials;
    }
  }
  return result;
}

GradCheckResult gradcheck_backprop(std::size_t trials, std::uint64_t seed) {
  GradCheckResult result;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::uint64_t case_seed = mix(seed ^ 0x62700000ULL, trial);
    std::mt19937_64 rng(case_seed);
    std::uniform_int_distribution<std::size_t> pick_n(2, 6), pick_h(2, 8), pick_k(1, 4);

    NetConfig nc;
    nc.input_dim = pick_h(rng);
    nc.hidden_sizes = {pick_h(rng), pick_h(rng)};
    nc.head_sizes = {pick_k(rng), 1};
    nc.mode = TrainingMode::BpFull;
    LayeredNetwork net = init(nc, case_seed);

    const std::size_t n = pick_n(rng);
    const RealMatrix batch = random_matrix(rng, n, nc.input_dim, -1.0, 1.0);
    const RealMatrix target_p = random_matrix(rng, n, nc.head_sizes[0], -1.0, 1.0);
    const RealMatrix target_v = random_matrix(rng, n, 1, -1.0, 1.0);
    const double w_val = 0.5;

    // composite loss: 0.5 |P - Tp|^2 + w_val * 0.5 |V - Tv|^2
    auto eval = [&]() {
      const std::vector<RealMatrix> acts = forward(net, batch);
      const RealMatrix p = layer_forward(net.heads[0], acts.back());
      const RealMatrix v = layer_forward(net.heads[1], acts.back());
      double l = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p.data()[i] - target_p.data()[i];
        l += 0.5 * d * d;
      }
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v.data()[i] - target_v.data()[i];
        l += w_val * 0.5 * d * d;
      }
      return l;
    };

    const std::vector<RealMatrix> acts = forward(net, batch);
    RealMatrix gp = layer_forward(net.heads[0], acts.back());
    for (std::size_t i = 0; i < gp.size(); ++i) gp.data()[i] -= target_p.data()[i];
    RealMatrix gv = layer_forward(net.heads[1], acts.back());
    for (std::size_t i = 0; i < gv.size(); ++i) gv.data()[i] -= target_v.data()[i];
    const NetworkGradients analytic = backprop_full(net, batch, {gp, gv}, {1.0, w_val});

    auto probe = [&](double* param, double analytic_grad) {
      const double keep = *param;
      *param = keep + kFdStep;
      const double fp = eval();
      *param = keep - kFdStep;
      const double fm = eval();
      *param = keep;
      const double err = rel_err(analytic_grad, (fp - fm) / (2.0 * kFdStep));
      if (err > result.worst_rel_err) {
        result.worst_rel_err = err;
        result.worst_seed = case_seed;
        result.worst_case = "backprop_full";
      }
    };
    for (std::size_t l = 0; l < net.hidden.size(); ++l) {
      DenseLayer& layer = net.hidden[l];
      for (std::size_t i = 0; i < layer.weights.size(); ++i)
        probe(&layer.weights.data()[i], analytic.hidden[l].weight_grad.data()[i]);
      for (std::size_t k = 0; k < layer.bias.size(); ++k)
        probe(&layer.bias[k], analytic.hidden[l].bias_grad[k]);
    }
    for (std::size_t h = 0; h < net.heads.size(); ++h) {
      DenseLayer& layer = net.heads[h];
      for (std::size_t i = 0; i < layer.weights.size(); ++i)
        probe(&layer.weights.data()[i], analytic.heads[h].weight_grad.data()[i]);
      for (std::size_t k = 0; k < layer.bias.size(); ++k)
        probe(&layer.bias[k], analytic.heads[h].bias_grad[k]);
    }
    ++result.trials;
  }
  return result;
}

GradCheckResult gradcheck_all(std::size_t trials_per_variant, std::uint64_t seed) {
  return merge(gradcheck_local_losses(trials_per_variant, seed),
               gradcheck_backprop(trials_per_variant, seed));
}

}  // namespace pdm
