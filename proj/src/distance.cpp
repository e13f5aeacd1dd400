#include "pdm/distance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pdm {

DistanceMatrix pairwise_l1(const RealMatrix& batch) {
  const std::size_t n = batch.rows();
  const std::size_t d = batch.cols();
  if (n == 0 || d == 0) throw std::invalid_argument("pairwise_l1: empty batch");

  DistanceMatrix out;
  out.n = n;
  out.entries = RealMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = batch.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* xj = batch.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += std::abs(xi[k] - xj[k]);
      out.entries(i, j) = s;
      out.entries(j, i) = s;
    }
  }
  return out;
}

TargetMatrix normalize(const DistanceMatrix& d) {
  TargetMatrix t;
  t.n = d.n;
  t.entries = d.entries;
  t.guided = false;
  double m = 0.0;
  for (double v : d.entries.data()) m = std::max(m, v);
  if (m > 0.0) {
    for (double& v : t.entries.data()) v /= m;
  }
  // m == 0: identical points, target stays all-zero
  return t;
}

TargetMatrix guide(const DistanceMatrix& d, std::span<const double> values) {
  const std::size_t n = d.n;
  if (values.size() != n) throw std::invalid_argument("guide: values length != n");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("guide: non-finite value");

  std::vector<double> v(values.begin(), values.end());
  const double lo = *std::min_element(v.begin(), v.end());
  for (double& x : v) x -= lo;
  const double hi = *std::max_element(v.begin(), v.end());
  if (hi > 0.0) {
    for (double& x : v) x /= hi;
  }  // all raw values equal: keep v = 0, transformed below to 0.5
  for (double& x : v) x = (1.0 - x) / 2.0;

  TargetMatrix t;
  t.n = n;
  t.entries = RealMatrix(n, n);
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double e = d.entries(i, j) + (v[i] + v[j]);
      t.entries(i, j) = e;
      m = std::max(m, e);
    }
  if (m > 0.0) {
    for (double& e : t.entries.data()) e /= m;
  }
  t.guided = true;
  return t;
}

NeighborhoodMask neighborhood_mask(const DistanceMatrix& d, MaskPolicy policy) {
  const std::size_t n = d.n;
  if (n < 2) throw std::invalid_argument("neighborhood_mask: need n >= 2");

  NeighborhoodMask mask;
  mask.n = n;
  mask.policy = policy;
  mask.keep.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) mask.keep[i * n + i] = 1;
  if (policy == MaskPolicy::KeepAll) {
    std::fill(mask.keep.begin(), mask.keep.end(), 1);
    return mask;
  }

  const std::size_t half = (n - 1 + 1) / 2;     // ceil((n-1)/2)
  const std::size_t quarter = (n - 1 + 3) / 4;  // ceil((n-1)/4)

  std::vector<std::size_t> cols(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cols[c++] = j;

    // ascending distance, ties broken by lower column index
    auto closer = [&](std::size_t a, std::size_t b) {
      const double da = d.entries(i, a), db = d.entries(i, b);
      return da != db ? da < db : a < b;
    };
    std::sort(cols.begin(), cols.end(), closer);

    auto keep_front = [&](std::size_t k) {
      for (std::size_t r = 0; r < k && r < cols.size(); ++r) mask.keep[i * n + cols[r]] = 1;
    };
    auto keep_back = [&](std::size_t k) {
      for (std::size_t r = 0; r < k && r < cols.size(); ++r)
        mask.keep[i * n + cols[cols.size() - 1 - r]] = 1;
    };
    switch (policy) {
      case MaskPolicy::ClosestHalf:
        keep_front(half);
        break;
      case MaskPolicy::FurthestHalf:
        keep_back(half);
        break;
      case MaskPolicy::ClosestAndFurthestQuarter:
        keep_front(quarter);
        keep_back(quarter);
        break;
      case MaskPolicy::KeepAll:
        break;
    }
  }
  return mask;
}

namespace {

void check_factors(std::span<const double> f) {
  for (double e : f)
    if (!(e >= 1.0 && e <= 2.0)) throw std::invalid_argument("scale_by_error: factor outside [1,2]");
}

}  // namespace

DistanceMatrix scale_by_error(const DistanceMatrix& d, std::span<const double> factors) {
  if (factors.size() != d.n) throw std::invalid_argument("scale_by_error: factor length != n");
  check_factors(factors);
  DistanceMatrix out;
  out.n = d.n;
  out.entries = RealMatrix(d.n, d.n);
  for (std::size_t i = 0; i < d.n; ++i)
    for (std::size_t j = 0; j < d.n; ++j)
      out.entries(i, j) = d.entries(i, j) * std::max(factors[i], factors[j]);
  for (std::size_t i = 0; i < d.n; ++i) out.entries(i, i) = 0.0;
  return out;
}

DistanceMatrix scale_by_error(const DistanceMatrix& d, const RealMatrix& factors) {
  if (factors.rows() != d.n || factors.cols() != d.n)
    throw std::invalid_argument("scale_by_error: factor matrix shape mismatch");
  check_factors(factors.data());
  DistanceMatrix out;
  out.n = d.n;
  out.entries = RealMatrix(d.n, d.n);
  for (std::size_t i = 0; i < d.n; ++i)
    for (std::size_t j = 0; j < d.n; ++j) {
      const double m = 0.5 * (d.entries(i, j) * factors(i, j) + d.entries(j, i) * factors(j, i));
      out.entries(i, j) = m;
    }
  for (std::size_t i = 0; i < d.n; ++i) out.entries(i, i) = 0.0;
  return out;
}

}  // namespace pdm
