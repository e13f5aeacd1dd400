#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdm/config.hpp"
#include "pdm/rl.hpp"

namespace pdm {

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based
  double score = 0.0;
  double smoothed_score = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  std::vector<double> local_losses;
  double wall_ms = 0.0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<IterationRecord> iterations;
  bool failed = false;
  std::string error;
};

// Builds the network + policy head a config describes.
LayeredNetwork build_network(const TrainConfig& config, const Env& env, std::uint64_t seed);
PolicyHead build_policy_head(const TrainConfig& config, const Env& env);

// Runs one seed to completion (or failure). If out_dir is nonempty, appends
// one JSONL line per iteration as it goes and saves a final checkpoint.
RunRecord run_single(const TrainConfig& config, std::uint64_t seed, const std::string& out_dir);

// Runs every seed, up to config.workers in parallel; failed runs are recorded
// as failed and do not disturb their siblings. Records are ordered by the
// seeds list. Writes config.json into out_dir when given.
std::vector<RunRecord> run(const TrainConfig& config, const std::string& out_dir = "");

// JSONL persistence
void write_run_jsonl(const RunRecord& record, const std::string& path);
RunRecord load_run_jsonl(const std::string& path);

struct RunDir {
  TrainConfig config;
  std::vector<RunRecord> records;
};
RunDir load_run_dir(const std::string& dir);

std::vector<double> scores_of(const RunRecord& record);

}  // namespace pdm
