#include "pdm/locloss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pdm {

namespace {

double masked_frobenius(const TargetMatrix& target, const TargetMatrix& output_dist,
                        const LocalLossSpec& spec) {
  if (target.n != output_dist.n) throw std::invalid_argument("loss: dimension mismatch");
  if (spec.in_dim == 0 || spec.out_dim == 0) throw std::invalid_argument("loss: zero dims");
  if (spec.mask && spec.mask->n != target.n)
    throw std::invalid_argument("loss: mask size mismatch");

  const std::size_t n = target.n;
  const double inv_out = 1.0 / static_cast<double>(spec.out_dim);
  const double inv_in = 1.0 / static_cast<double>(spec.in_dim);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (spec.mask && !spec.mask->at(i, j)) continue;
      const double a = target.entries(i, j) * inv_in - output_dist.entries(i, j) * inv_out;
      sq += a * a;
    }
  return std::sqrt(sq);
}

}  // namespace

double loss_u(const TargetMatrix& target, const TargetMatrix& output_dist,
              const LocalLossSpec& spec) {
  return masked_frobenius(target, output_dist, spec);
}

double loss_g(const TargetMatrix& guided_target, const TargetMatrix& output_dist,
              const LocalLossSpec& spec) {
  if (!guided_target.guided) throw std::invalid_argument("loss_g: target not guided");
  return masked_frobenius(guided_target, output_dist, spec);
}

LayerGradient layer_gradient(const RealMatrix& layer_input, const RealMatrix& weights,
                             std::span<const double> bias, const TargetMatrix& target,
                             const LocalLossSpec& spec) {
  const std::size_t n = layer_input.rows();
  const std::size_t in = layer_input.cols();
  const std::size_t out = weights.cols();
  if (n < 2) throw std::invalid_argument("layer_gradient: need at least two points");
  if (weights.rows() != in) throw std::invalid_argument("layer_gradient: weight shape mismatch");
  if (bias.size() != out) throw std::invalid_argument("layer_gradient: bias length mismatch");
  if (target.n != n) throw std::invalid_argument("layer_gradient: target size mismatch");
  if (spec.mask && spec.mask->n != n)
    throw std::invalid_argument("layer_gradient: mask size mismatch");

  // forward: Y = tanh(H W + b)
  RealMatrix y = matmul(layer_input, weights);
  for (std::size_t i = 0; i < n; ++i) {
    double* yi = y.row(i);
    for (std::size_t k = 0; k < out; ++k) yi[k] = std::tanh(yi[k] + bias[k]);
  }

  const DistanceMatrix dy = pairwise_l1(y);
  double m = 0.0;
  std::size_t max_i = 0, max_j = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (dy.entries(i, j) > m) {
        m = dy.entries(i, j);
        max_i = i;
        max_j = j;
      }

  const double inv_out = 1.0 / static_cast<double>(spec.out_dim);
  const double inv_in = 1.0 / static_cast<double>(spec.in_dim);

  // scaled masked difference and its Frobenius norm
  RealMatrix a(n, n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (spec.mask && !spec.mask->at(i, j)) continue;
      const double dbar = m > 0.0 ? dy.entries(i, j) / m : 0.0;
      const double v = target.entries(i, j) * inv_in - dbar * inv_out;
      a(i, j) = v;
      sq += v * v;
    }
  const double loss = std::sqrt(sq);

  LayerGradient g;
  g.weight_grad = RealMatrix(in, out);
  g.bias_grad.assign(out, 0.0);
  g.loss = loss;
  // degenerate branches: identical outputs or exact match
  if (m <= 0.0 || loss <= 0.0) return g;

  // dL/dD, folding in normalization by the maximizing entry
  RealMatrix gd(n, n);
  double s = 0.0;
  const double c = -1.0 / (static_cast<double>(spec.out_dim) * loss);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dldbar = c * a(i, j);
      gd(i, j) = dldbar / m;
      s += dldbar * dy.entries(i, j);
    }
  gd(max_i, max_j) -= s / (m * m);

  // fold (i,j) and (j,i) contributions, then chain through |.| into Y
  RealMatrix b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = gd(i, j) + gd(j, i);

  RealMatrix gz(n, out);
  for (std::size_t i = 0; i < n; ++i) {
    const double* yi = y.row(i);
    const double* bi = b.row(i);
    double* gzi = gz.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double w = bi[j];
      if (w == 0.0 || j == i) continue;
      const double* yj = y.row(j);
      for (std::size_t k = 0; k < out; ++k) {
        const double diff = yi[k] - yj[k];
        if (diff > 0.0)
          gzi[k] += w;
        else if (diff < 0.0)
          gzi[k] -= w;
        // d|x|/dx at 0 := 0
      }
    }
    for (std::size_t k = 0; k < out; ++k) gzi[k] *= 1.0 - yi[k] * yi[k];
  }

  g.weight_grad = matmul(transpose(layer_input), gz);
  for (std::size_t i = 0; i < n; ++i) {
    const double* gzi = gz.row(i);
    for (std::size_t k = 0; k < out; ++k) g.bias_grad[k] += gzi[k];
  }
  return g;
}

ForwardError forward_error(const TargetMatrix& target, const TargetMatrix& output_dist) {
  if (target.n != output_dist.n) throw std::invalid_argument("forward_error: dimension mismatch");
  const std::size_t n = target.n;
  std::vector<double> e(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      e[i] += std::abs(target.entries(i, j) - output_dist.entries(i, j));
  const double m = n ? *std::max_element(e.begin(), e.end()) : 0.0;
  if (m > 0.0) {
    for (double& v : e) v = v / m + 1.0;
  } else {
    std::fill(e.begin(), e.end(), 1.0);
  }
  return ForwardError{std::move(e)};
}

}  // namespace pdm
