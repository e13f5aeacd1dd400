#include "pdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

namespace pdm {

std::vector<double> smooth(std::span<const double> scores, std::size_t window) {
  if (window == 0) throw std::invalid_argument("smooth: window must be >= 1");
  std::vector<double> out(scores.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    acc += scores[i];
    if (i >= window) acc -= scores[i - window];
    const std::size_t count = std::min(i + 1, window);
    out[i] = acc / static_cast<double>(count);
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("percentile: p outside [0,1]");
  std::sort(values.begin(), values.end());
  const double rank = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

NormalizedScores normalized_scores(const std::vector<std::vector<double>>& smoothed_runs) {
  if (smoothed_runs.empty()) throw std::invalid_argument("normalized_scores: no runs");
  std::vector<double> pool;
  for (const auto& r : smoothed_runs) pool.insert(pool.end(), r.begin(), r.end());

  NormalizedScores out;
  out.p5 = percentile(pool, 0.05);
  out.p95 = percentile(pool, 0.95);
  out.degenerate = out.p95 == out.p5;
  out.runs.reserve(smoothed_runs.size());
  for (const auto& r : smoothed_runs) {
    std::vector<double> n(r.size(), 0.0);
    if (!out.degenerate)
      for (std::size_t i = 0; i < r.size(); ++i) n[i] = (r[i] - out.p5) / (out.p95 - out.p5);
    out.runs.push_back(std::move(n));
  }
  return out;
}

std::vector<ProfilePoint> performance_profile(const std::vector<ScoredRun>& runs,
                                              std::span<const double> taus,
                                              std::size_t resamples,
                                              std::uint64_t metrics_seed) {
  if (runs.empty()) throw std::invalid_argument("performance_profile: no runs");

  // strata: run indices grouped by environment
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < runs.size(); ++i) strata[runs[i].env_id].push_back(i);

  auto fraction_above = [&](std::span<const double> scores, double tau) {
    std::size_t c = 0;
    for (double s : scores)
      if (s > tau) ++c;
    return static_cast<double>(c) / static_cast<double>(scores.size());
  };

  std::vector<double> all_scores;
  all_scores.reserve(runs.size());
  for (const ScoredRun& r : runs) all_scores.push_back(r.score);

  std::mt19937_64 rng(metrics_seed);
  // resample_scores[b] holds the pooled scores of bootstrap replicate b
  std::vector<std::vector<double>> replicates(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    replicates[b].reserve(runs.size());
    for (const auto& [env, members] : strata) {
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      for (std::size_t k = 0; k < members.size(); ++k)
        replicates[b].push_back(runs[members[pick(rng)]].score);
    }
  }

  std::vector<ProfilePoint> curve;
  curve.reserve(taus.size());
  std::vector<double> fracs(resamples);
  for (double tau : taus) {
    ProfilePoint p;
    p.tau = tau;
    p.fraction = fraction_above(all_scores, tau);
    if (resamples > 0) {
      for (std::size_t b = 0; b < resamples; ++b) fracs[b] = fraction_above(replicates[b], tau);
      p.ci_lo = percentile(fracs, 0.025);
      p.ci_hi = percentile(fracs, 0.975);
    } else {
      p.ci_lo = p.ci_hi = p.fraction;
    }
    curve.push_back(p);
  }
  return curve;
}

double t_quantile_975(std::size_t dof) {
  static constexpr double table[] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof == 0) return 0.0;
  if (dof <= 30) return table[dof - 1];
  if (dof <= 40) return 2.021;
  if (dof <= 60) return 2.000;
  if (dof <= 120) return 1.980;
  return 1.960;
}

SummaryRow summarize_runs(const std::vector<std::vector<double>>& raw_run_scores,
                          std::size_t window) {
  if (raw_run_scores.empty()) throw std::invalid_argument("summarize_runs: no runs");
  const std::size_t iters = raw_run_scores.front().size();
  for (const auto& r : raw_run_scores)
    if (r.size() != iters) throw std::invalid_argument("summarize_runs: uneven run lengths");
  if (iters == 0) throw std::invalid_argument("summarize_runs: empty runs");

  std::vector<std::vector<double>> smoothed;
  smoothed.reserve(raw_run_scores.size());
  for (const auto& r : raw_run_scores) smoothed.push_back(smooth(r, window));

  const double n = static_cast<double>(smoothed.size());
  SummaryRow row;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < iters; ++i) {
    double mean = 0.0;
    for (const auto& r : smoothed) mean += r[i];
    mean /= n;
    if (mean > best) {
      best = mean;
      row.max_iter = i + 1;
    }
  }
  row.max_score = best;

  const std::size_t at = row.max_iter - 1;
  double var = 0.0;
  for (const auto& r : smoothed) var += (r[at] - best) * (r[at] - best);
  if (smoothed.size() > 1) {
    var /= n - 1.0;
    const double half = t_quantile_975(smoothed.size() - 1) * std::sqrt(var / n);
    const double width = 2.0 * half;
    row.rel_spread_pct = row.max_score != 0.0 ? 100.0 * width / std::abs(row.max_score) : 0.0;
  }
  return row;
}

Comparison summary_table(const std::vector<std::vector<double>>& baseline_runs,
                         const std::vector<std::vector<double>>& candidate_runs,
                         std::size_t window) {
  Comparison c;
  c.baseline = summarize_runs(baseline_runs, window);
  c.candidate = summarize_runs(candidate_runs, window);

  // first iteration where the candidate's averaged mean matches the
  // baseline's max; its own best iteration when it never does
  std::vector<std::vector<double>> smoothed;
  for (const auto& r : candidate_runs) smoothed.push_back(smooth(r, window));
  const std::size_t iters = smoothed.front().size();
  const double n = static_cast<double>(smoothed.size());
  c.rel_iter = c.candidate.max_iter;
  for (std::size_t i = 0; i < iters; ++i) {
    double mean = 0.0;
    for (const auto& r : smoothed) mean += r[i];
    mean /= n;
    if (mean >= c.baseline.max_score) {
      c.rel_iter = i + 1;
      break;
    }
  }

  auto ratio = [](double a, double b) { return b != 0.0 ? a / b : 0.0; };
  c.score_mult = ratio(c.candidate.max_score, c.baseline.max_score);
  c.spread_mult = ratio(c.candidate.rel_spread_pct, c.baseline.rel_spread_pct);
  c.iter_mult = ratio(static_cast<double>(c.rel_iter), static_cast<double>(c.baseline.max_iter));
  return c;
}

}  // namespace pdm
