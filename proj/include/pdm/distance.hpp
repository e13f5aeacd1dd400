#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pdm/matrix.hpp"

namespace pdm {

// N x N pairwise distance matrix: symmetric, nonnegative, zero diagonal.
struct DistanceMatrix {
  std::size_t n = 0;
  RealMatrix entries;  // n x n
};

// Normalized (or guided) target distance matrix, entries in [0,1].
// A guided target may carry a nonzero diagonal (the guidance values are added
// twice on the diagonal).
struct TargetMatrix {
  std::size_t n = 0;
  RealMatrix entries;  // n x n
  bool guided = false;
};

enum class MaskPolicy {
  KeepAll,
  ClosestHalf,
  FurthestHalf,
  ClosestAndFurthestQuarter,
};

// Per-row neighborhood selection for sparse distance matrices. The diagonal is
// always kept; ClosestHalf/FurthestHalf keep ceil((n-1)/2) off-diagonal
// entries per row, ClosestAndFurthestQuarter keeps ceil((n-1)/4) closest plus
// ceil((n-1)/4) furthest.
struct NeighborhoodMask {
  std::size_t n = 0;
  std::vector<std::uint8_t> keep;  // n x n, row-major
  MaskPolicy policy = MaskPolicy::KeepAll;

  bool at(std::size_t i, std::size_t j) const { return keep[i * n + j] != 0; }
};

// d[i][j] = sum_k |batch[i][k] - batch[j][k]|
DistanceMatrix pairwise_l1(const RealMatrix& batch);

// D / max(D); the all-zero matrix maps to the all-zero target.
TargetMatrix normalize(const DistanceMatrix& d);

// Reward-guided target: values are min-shifted, max-normalized, reversed and
// halved, then added to rows and columns of D before normalization. When all
// raw values are equal the transformed values are uniformly 0.5.
TargetMatrix guide(const DistanceMatrix& d, std::span<const double> values);

NeighborhoodMask neighborhood_mask(const DistanceMatrix& d, MaskPolicy policy);

// Elementwise scaling by per-point error factors in [1,2]; a length-n vector
// broadcasts as outer maximum, entry (i,j) scaled by max(e_i, e_j). Result is
// re-symmetrized and keeps a zero diagonal.
DistanceMatrix scale_by_error(const DistanceMatrix& d, std::span<const double> factors);
DistanceMatrix scale_by_error(const DistanceMatrix& d, const RealMatrix& factors);

}  // namespace pdm
