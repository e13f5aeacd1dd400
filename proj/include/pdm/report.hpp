#pragma once

#include <string>
#include <vector>

#include "pdm/harness.hpp"
#include "pdm/metrics.hpp"

namespace pdm {

struct ChartSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> lo;  // CI band, may be empty
  std::vector<double> hi;
};

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<ChartSeries>& series);

// Emits summary.csv, profile.csv, profile.svg and per-directory score charts
// (with the raw CSV behind each figure) into out_dir. Every candidate is
// compared against the baseline directory with matching env + algorithm.
void write_report(const std::string& baseline_dir, const std::vector<std::string>& candidate_dirs,
                  const std::string& out_dir);

}  // namespace pdm
