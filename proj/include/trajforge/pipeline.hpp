#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "trajforge/image.hpp"

namespace trajforge {

// Everything the end-to-end run needs, loaded from one JSON file so each
// tunable lives in exactly one place.
struct PipelineConfig {
  std::vector<std::string> templates = {"maze"};
  int tasks = 10;
  uint32_t task_seed_base = 0;
  int group_size = 8;        // rollouts per task
  int faults_per_group = 4;  // how many of those get one wrong action
  int history_window = 30;

  MatchConfig match;              // theta, prefilter, hash, ssim window
  PreprocessConfig preprocess;    // crop + thumbnail size
  int frame_width = 256;
  int frame_height = 512;
  int max_turns = 30;
  double eps_low = 0.2;   // recorded for the advantage tooling; the data
  double eps_high = 0.28; // pipeline itself never clips

  std::filesystem::path out_dir = "out";
  int jobs = 1;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& file);

struct PerTaskForkStats {
  std::string teacher_trajectory_id;
  int successes = 0;
  int failures = 0;
  int fork_points = 0;
  std::map<std::string, int> forks_by_failed_trajectory;
};

struct PipelineReport {
  int tasks_run = 0;
  int groups = 0;
  int successes = 0;
  int failures = 0;
  int fork_points_found = 0;
  int samples_emitted = 0;
  size_t rft_trajectories = 0;
  std::map<std::string, PerTaskForkStats> per_task;
};

std::string report_json(const PipelineReport& report, int indent = 2);

// Simulate -> filter -> detect -> forge -> emit. Writes, under out_dir:
// trajectories/<task>/<rollout>/..., rft.jsonl, grsd.jsonl, report.json.
// Fully deterministic for a given config, including across --jobs settings;
// corpus files appear only via write-to-temp + rename, so a failed run never
// leaves partial ones.
PipelineReport run_pipeline(const PipelineConfig& cfg);

}  // namespace trajforge
