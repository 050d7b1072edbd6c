#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "trajforge/image.hpp"
#include "trajforge/trajectory.hpp"

namespace trajforge {

// One detected fork: failed step j should have done what the teacher did at
// step i*. ssim_score is SSIM between the two step observations, which by
// construction is >= theta.
struct ForkMatch {
  int failed_step = 0;
  int teacher_step = 0;
  double ssim_score = 0.0;

  bool operator==(const ForkMatch&) const = default;
};

struct MatchSet {
  std::string teacher_trajectory_id;
  std::string failed_trajectory_id;
  std::vector<ForkMatch> matches;  // ordered by failed_step, teacher_step
                                   // non-decreasing

  bool operator==(const MatchSet&) const = default;
};

struct DetectConfig {
  MatchConfig match;
  PreprocessConfig preprocess;
};

// Thumbnails for every step observation of a trajectory, in step order.
std::vector<Thumbnail> preprocess_trajectory(const Trajectory& traj,
                                             const PreprocessConfig& cfg);

// True when success step i and failed step j part ways: either side is at
// its terminal step, or the next observations no longer match.
bool diverge(int i, int j, const Trajectory& succ, const Trajectory& fail,
             const DetectConfig& cfg);

// Core detection over preprocessed observation sequences. Walks failed steps
// in order; steps whose (state, next state) transition aligns with the
// teacher are skipped, the rest are matched to the best diverging teacher
// step at or after the running minimum index.
MatchSet detect_fork_points(const std::vector<Thumbnail>& succ,
                            const std::vector<Thumbnail>& fail,
                            const MatchConfig& cfg);

MatchSet detect_fork_points(const Trajectory& succ, const Trajectory& fail,
                            const DetectConfig& cfg);

// Pairs every failed trajectory in the group against the group's teacher:
// the shortest successful trajectory (ties broken by smallest trajectory_id).
// Groups with no success or no failure yield an empty map.
std::map<std::string, std::pair<std::string, MatchSet>> pair_group(
    const GroupRollout& group, const DetectConfig& cfg);

// {teacher_trajectory_id, failed_trajectory_id, matches:[{failed_step,
// teacher_step, ssim}]} rendered with the given indent.
std::string match_set_json(const MatchSet& ms, int indent = 2);

}  // namespace trajforge
