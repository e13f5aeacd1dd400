#pragma once

#include <cstdint>
#include <string>

namespace pdm {

struct GradCheckResult {
  std::size_t trials = 0;
  double worst_rel_err = 0.0;
  std::uint64_t worst_seed = 0;
  std::string worst_case;

  bool pass(double tolerance) const { return worst_rel_err < tolerance; }
};

GradCheckResult merge(const GradCheckResult& a, const GradCheckResult& b);

// Analytic local-loss layer gradients vs central finite differences
// (step 1e-6) over random instances of every variant: unsupervised, guided,
// masked, error-scaled targets.
GradCheckResult gradcheck_local_losses(std::size_t trials_per_variant, std::uint64_t seed);

// Full-backprop gradients of two-head networks vs finite differences.
GradCheckResult gradcheck_backprop(std::size_t trials, std::uint64_t seed);

GradCheckResult gradcheck_all(std::size_t trials_per_variant, std::uint64_t seed);

}  // namespace pdm
