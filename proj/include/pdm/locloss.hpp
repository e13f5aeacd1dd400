#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pdm/distance.hpp"
#include "pdm/matrix.hpp"

namespace pdm {

enum class LossVariant { Unsupervised, Guided };

// Per-layer loss configuration. in_dim / out_dim are the dimensionality
// scalars dividing the target and output distance matrices respectively.
struct LocalLossSpec {
  LossVariant variant = LossVariant::Unsupervised;
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  std::optional<NeighborhoodMask> mask;
  bool error_fp = false;
};

// Per-point error factors forwarded to the next layer, normalized into [1,2].
struct ForwardError {
  std::vector<double> factors;
};

// Frobenius norm of target/in - output_dist/out; masked-out entries
// contribute zero.
double loss_u(const TargetMatrix& target, const TargetMatrix& output_dist,
              const LocalLossSpec& spec);

// Same form with a guided target.
double loss_g(const TargetMatrix& guided_target, const TargetMatrix& output_dist,
              const LocalLossSpec& spec);

struct LayerGradient {
  RealMatrix weight_grad;         // in x out
  std::vector<double> bias_grad;  // out
  double loss = 0.0;
};

// Analytic gradient of input -> tanh(input W + b) -> pairwise l1 -> normalize
// -> loss with respect to W and b. The target is a constant. Subgradient
// conventions: d|x|/dx at 0 is 0; the normalization max differentiates through
// its first maximizing entry in row-major order.
LayerGradient layer_gradient(const RealMatrix& layer_input, const RealMatrix& weights,
                             std::span<const double> bias, const TargetMatrix& target,
                             const LocalLossSpec& spec);

// Per-point error of the distance match: row sums of absolute entries of the
// difference matrix, normalized as |e|/max|e| + 1. Zero error maps to all-ones.
ForwardError forward_error(const TargetMatrix& target, const TargetMatrix& output_dist);

}  // namespace pdm
