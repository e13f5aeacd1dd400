#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pdm {

// Trailing moving average; head windows use the mean of the available prefix.
std::vector<double> smooth(std::span<const double> scores, std::size_t window = 100);

// Linear interpolation between order statistics, p in [0,1].
double percentile(std::vector<double> values, double p);

struct NormalizedScores {
  std::vector<std::vector<double>> runs;
  double p5 = 0.0, p95 = 0.0;
  bool degenerate = false;  // p95 == p5, scores mapped to 0
};

// Min-max normalization of smoothed scores using the 5%/95% percentiles
// pooled over all given runs (all algorithms of one environment), unclamped.
NormalizedScores normalized_scores(const std::vector<std::vector<double>>& smoothed_runs);

struct ProfilePoint {
  double tau = 0.0;
  double fraction = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct ScoredRun {
  int env_id = 0;  // stratification label
  double score = 0.0;
};

// Fraction of runs with score > tau, with pointwise 95% stratified bootstrap
// intervals. Deterministic given the metrics seed.
std::vector<ProfilePoint> performance_profile(const std::vector<ScoredRun>& runs,
                                              std::span<const double> taus,
                                              std::size_t resamples = 2000,
                                              std::uint64_t metrics_seed = 0);

struct SummaryRow {
  double max_score = 0.0;       // max over iterations of the across-run mean of
                                // window-averaged scores
  double rel_spread_pct = 0.0;  // 95% CI width at that iteration / |max_score|, in %
  std::size_t max_iter = 0;     // 1-based iteration of the maximum
};

SummaryRow summarize_runs(const std::vector<std::vector<double>>& raw_run_scores,
                          std::size_t window = 100);

struct Comparison {
  SummaryRow baseline;
  SummaryRow candidate;
  std::size_t rel_iter = 0;  // first iteration the candidate matched the
                             // baseline's max (its own best iteration otherwise)
  double score_mult = 0.0;
  double spread_mult = 0.0;
  double iter_mult = 0.0;
};

Comparison summary_table(const std::vector<std::vector<double>>& baseline_runs,
                         const std::vector<std::vector<double>>& candidate_runs,
                         std::size_t window = 100);

// two-sided 95% Student-t quantile
double t_quantile_975(std::size_t dof);

}  // namespace pdm
