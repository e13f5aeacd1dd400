#include "pdm/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace pdm {

namespace fs = std::filesystem;

namespace {

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

// successful runs only
std::vector<std::vector<double>> raw_scores(const RunDir& rd) {
  std::vector<std::vector<double>> out;
  for (const RunRecord& r : rd.records)
    if (!r.failed) out.push_back(scores_of(r));
  return out;
}

std::size_t failed_count(const RunDir& rd) {
  std::size_t c = 0;
  for (const RunRecord& r : rd.records) c += r.failed ? 1 : 0;
  return c;
}

// per-run final score: max over iterations of the window-averaged raw score
double run_peak(std::span<const double> scores, std::size_t window) {
  const std::vector<double> s = smooth(scores, window);
  return *std::max_element(s.begin(), s.end());
}

}  // namespace

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<ChartSeries>& series) {
  constexpr double kW = 860, kH = 520, kL = 70, kR = 20, kT = 40, kB = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const ChartSeries& s : series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.mean) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
    for (double v : s.lo) ymin = std::min(ymin, v);
    for (double v : s.hi) ymax = std::max(ymax, v);
  }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;

  auto px = [&](double x) { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); };
  auto py = [&](double y) { return kH - kB - (y - ymin) / (ymax - ymin) * (kH - kT - kB); };

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_line_chart_svg: cannot open " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
     << kH - kB << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kL << "\" y=\"" << kH - kB + 18 << "\" text-anchor=\"middle\">" << fmt(xmin)
     << "</text>\n<text x=\"" << kW - kR << "\" y=\"" << kH - kB + 18
     << "\" text-anchor=\"end\">" << fmt(xmax) << "</text>\n";
  os << "<text x=\"" << kL - 6 << "\" y=\"" << kH - kB << "\" text-anchor=\"end\">" << fmt(ymin)
     << "</text>\n<text x=\"" << kL - 6 << "\" y=\"" << kT + 4 << "\" text-anchor=\"end\">"
     << fmt(ymax) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const ChartSeries& s = series[si];
    const char* color = kColors[si % std::size(kColors)];
    if (!s.lo.empty() && s.lo.size() == s.x.size() && s.hi.size() == s.x.size()) {
      os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.hi[i]) << ' ';
      for (std::size_t i = s.x.size(); i-- > 0;) os << px(s.x[i]) << ',' << py(s.lo[i]) << ' ';
      os << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.mean[i]) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << kW - kR - 8 << "\" y=\"" << kT + 16 + 18 * static_cast<double>(si)
       << "\" text-anchor=\"end\" fill=\"" << color << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
}

void write_report(const std::string& baseline_dir, const std::vector<std::string>& candidate_dirs,
                  const std::string& out_dir) {
  fs::create_directories(out_dir);
  const RunDir baseline = load_run_dir(baseline_dir);
  std::vector<RunDir> candidates;
  for (const std::string& dir : candidate_dirs) candidates.push_back(load_run_dir(dir));

  const std::size_t window = baseline.config.smooth_window;

  // ------------------------------------------------------------- summary
  std::ofstream sum(out_dir + "/summary.csv", std::ios::trunc);
  sum << "env,algorithm,mode,max_score,rel_spread_pct,rel_iter,score_mult,spread_mult,iter_mult,"
         "failed_runs\n";
  const std::vector<std::vector<double>> base_scores = raw_scores(baseline);
  const SummaryRow base_row = summarize_runs(base_scores, window);
  sum << baseline.config.env << ',' << to_string(baseline.config.algorithm) << ','
      << to_string(baseline.config.mode) << ',' << base_row.max_score << ','
      << base_row.rel_spread_pct << ',' << base_row.max_iter << ",1,1,1,"
      << failed_count(baseline) << '\n';
  for (const RunDir& cand : candidates) {
    const std::vector<std::vector<double>> cand_scores = raw_scores(cand);
    if (cand.config.env == baseline.config.env &&
        cand.config.algorithm == baseline.config.algorithm) {
      const Comparison cmp = summary_table(base_scores, cand_scores, window);
      sum << cand.config.env << ',' << to_string(cand.config.algorithm) << ','
          << to_string(cand.config.mode) << ',' << cmp.candidate.max_score << ','
          << cmp.candidate.rel_spread_pct << ',' << cmp.rel_iter << ',' << cmp.score_mult << ','
          << cmp.spread_mult << ',' << cmp.iter_mult << ',' << failed_count(cand) << '\n';
    } else {
      const SummaryRow row = summarize_runs(cand_scores, window);
      sum << cand.config.env << ',' << to_string(cand.config.algorithm) << ','
          << to_string(cand.config.mode) << ',' << row.max_score << ',' << row.rel_spread_pct
          << ',' << row.max_iter << ",,,," << failed_count(cand) << '\n';
    }
  }
  sum.close();

  // ---------------------------------------------------- performance profile
  // normalized peak scores per environment across every directory
  std::vector<const RunDir*> all_dirs{&baseline};
  for (const RunDir& c : candidates) all_dirs.push_back(&c);

  std::map<std::string, std::pair<double, double>> env_range;  // env -> (min,max) of peaks
  std::map<std::string, int> env_ids;
  for (const RunDir* rd : all_dirs) {
    env_ids.emplace(rd->config.env, static_cast<int>(env_ids.size()));
    for (const auto& s : raw_scores(*rd)) {
      const double peak = run_peak(s, window);
      auto [it, fresh] = env_range.try_emplace(rd->config.env, peak, peak);
      if (!fresh) {
        it->second.first = std::min(it->second.first, peak);
        it->second.second = std::max(it->second.second, peak);
      }
    }
  }

  std::map<std::string, std::vector<ScoredRun>> groups;  // "algorithm/mode" -> runs
  for (const RunDir* rd : all_dirs) {
    const std::string key = to_string(rd->config.algorithm) + "/" + to_string(rd->config.mode);
    const auto [lo, hi] = env_range.at(rd->config.env);
    for (const auto& s : raw_scores(*rd)) {
      const double peak = run_peak(s, window);
      const double norm = hi > lo ? (peak - lo) / (hi - lo) : 0.0;
      groups[key].push_back({env_ids.at(rd->config.env), norm});
    }
  }

  std::vector<double> taus;
  for (double t = 0.0; t <= 1.0001; t += 0.02) taus.push_back(t);

  std::ofstream prof(out_dir + "/profile.csv", std::ios::trunc);
  prof << "group,tau,fraction,ci_lo,ci_hi\n";
  std::vector<ChartSeries> prof_series;
  for (const auto& [key, runs] : groups) {
    const std::vector<ProfilePoint> curve = performance_profile(runs, taus, 2000, 0);
    ChartSeries cs;
    cs.label = key;
    for (const ProfilePoint& p : curve) {
      prof << key << ',' << p.tau << ',' << p.fraction << ',' << p.ci_lo << ',' << p.ci_hi << '\n';
      cs.x.push_back(p.tau);
      cs.mean.push_back(p.fraction);
      cs.lo.push_back(p.ci_lo);
      cs.hi.push_back(p.ci_hi);
    }
    prof_series.push_back(std::move(cs));
  }
  prof.close();
  write_line_chart_svg(out_dir + "/profile.svg", "fraction of runs with normalized score > tau",
                       prof_series);

  // ------------------------------------------------- per-directory curves
  for (const RunDir* rd : all_dirs) {
    const std::string name =
        rd->config.env + "_" + to_string(rd->config.algorithm) + "_" + to_string(rd->config.mode);
    const std::vector<std::vector<double>> runs = raw_scores(*rd);
    if (runs.empty()) continue;
    std::vector<std::vector<double>> smoothed;
    for (const auto& r : runs) smoothed.push_back(smooth(r, window));
    const std::size_t iters = smoothed.front().size();
    const double n = static_cast<double>(smoothed.size());
    const double tq = t_quantile_975(smoothed.size() - 1);

    ChartSeries cs;
    cs.label = name;
    std::ofstream csv(out_dir + "/scores_" + name + ".csv", std::ios::trunc);
    csv << "iteration,mean,ci_lo,ci_hi\n";
    for (std::size_t i = 0; i < iters; ++i) {
      double mean = 0.0;
      for (const auto& r : smoothed) mean += r[i];
      mean /= n;
      double var = 0.0;
      for (const auto& r : smoothed) var += (r[i] - mean) * (r[i] - mean);
      const double half = smoothed.size() > 1
                              ? tq * std::sqrt(var / (n - 1.0) / n)
                              : 0.0;
      csv << i + 1 << ',' << mean << ',' << mean - half << ',' << mean + half << '\n';
      cs.x.push_back(static_cast<double>(i + 1));
      cs.mean.push_back(mean);
      cs.lo.push_back(mean - half);
      cs.hi.push_back(mean + half);
    }
    write_line_chart_svg(out_dir + "/scores_" + name + ".svg", name, {cs});
  }
}

}  // namespace pdm
