#include "trajforge/fork.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

#include "json.hpp"

namespace trajforge {

namespace {

// Memoizes the equivalence test over a (success, failed) pair so the
// alignment scan and the candidate scan never re-run SSIM for the same
// index pair.
class SameCache {
 public:
  SameCache(const std::vector<Thumbnail>& succ,
            const std::vector<Thumbnail>& fail, const MatchConfig& cfg)
      : succ_(succ), fail_(fail), cfg_(cfg),
        cells_(succ.size() * fail.size()) {}

  const SameOutcome& at(int i, int j) {
    auto& cell = cells_[static_cast<size_t>(i) * fail_.size() + j];
    if (!cell) cell = same(succ_[i], fail_[j], cfg_);
    return *cell;
  }

 private:
  const std::vector<Thumbnail>& succ_;
  const std::vector<Thumbnail>& fail_;
  const MatchConfig& cfg_;
  std::vector<std::optional<SameOutcome>> cells_;
};

}  // namespace

std::vector<Thumbnail> preprocess_trajectory(const Trajectory& traj,
                                             const PreprocessConfig& cfg) {
  std::vector<Thumbnail> thumbs;
  thumbs.reserve(traj.steps.size());
  for (const Step& step : traj.steps) thumbs.push_back(preprocess(step.frame, cfg));
  return thumbs;
}

bool diverge(int i, int j, const Trajectory& succ, const Trajectory& fail,
             const DetectConfig& cfg) {
  int t_succ = succ.final_step_index();
  int t_fail = fail.final_step_index();
  if (i < 0 || i > t_succ)
    throw std::out_of_range("diverge: success step " + std::to_string(i) +
                            " out of range");
  if (j < 0 || j > t_fail)
    throw std::out_of_range("diverge: failed step " + std::to_string(j) +
                            " out of range");
  if (i == t_succ || j == t_fail) return true;

  PreprocessConfig pp = cfg.preprocess;
  Thumbnail a = preprocess(succ.steps[i + 1].frame, pp);
  Thumbnail b = preprocess(fail.steps[j + 1].frame, pp);
  return !same(a, b, cfg.match).same;
}

MatchSet detect_fork_points(const std::vector<Thumbnail>& succ,
                            const std::vector<Thumbnail>& fail,
                            const MatchConfig& cfg) {
  MatchSet out;
  if (succ.empty() || fail.empty())
    throw std::invalid_argument("detect_fork_points: empty trajectory");

  int t_succ = static_cast<int>(succ.size()) - 1;
  int t_fail = static_cast<int>(fail.size()) - 1;
  SameCache cache(succ, fail, cfg);

  // Divergence of (i, j): terminal on either side, or next observations
  // fail the equivalence test.
  auto diverges = [&](int i, int j) {
    if (i == t_succ || j == t_fail) return true;
    return !cache.at(i + 1, j + 1).same;
  };

  int i_min = 0;
  for (int j = 0; j <= t_fail; ++j) {
    // Transition alignment: both trajectories make the same state move, so
    // this failed step needs no correction. Smallest qualifying i wins;
    // requires successors on both sides.
    if (j + 1 <= t_fail) {
      bool aligned = false;
      for (int i = i_min; i + 1 <= t_succ; ++i) {
        if (cache.at(i, j).same && cache.at(i + 1, j + 1).same) {
          i_min = i + 1;
          aligned = true;
          break;
        }
      }
      if (aligned) continue;
    }

    // Teacher candidates: same state, about to diverge. Highest SSIM wins;
    // on exact ties the smallest i (scan order) is kept.
    bool found = false;
    int best_i = -1;
    double best_ssim = 0.0;
    for (int i = i_min; i <= t_succ; ++i) {
      const SameOutcome& so = cache.at(i, j);
      if (!so.same || !diverges(i, j)) continue;
      double score = *so.ssim;  // present whenever same holds
      if (!found || score > best_ssim) {
        found = true;
        best_i = i;
        best_ssim = score;
      }
    }
    if (found) {
      out.matches.push_back({j, best_i, best_ssim});
      i_min = best_i;
    }
  }
  return out;
}

MatchSet detect_fork_points(const Trajectory& succ, const Trajectory& fail,
                            const DetectConfig& cfg) {
  if (succ.task_id != fail.task_id)
    throw std::invalid_argument("detect_fork_points: task_id mismatch (" +
                                succ.task_id + " vs " + fail.task_id + ")");
  for (const Trajectory* t : {&succ, &fail}) {
    auto violations = validate_trajectory(*t);
    if (!violations.empty())
      throw std::invalid_argument("detect_fork_points: invalid trajectory " +
                                  t->trajectory_id + ": " + violations.front());
  }

  std::vector<Thumbnail> st = preprocess_trajectory(succ, cfg.preprocess);
  std::vector<Thumbnail> ft = preprocess_trajectory(fail, cfg.preprocess);
  MatchSet ms = detect_fork_points(st, ft, cfg.match);
  ms.teacher_trajectory_id = succ.trajectory_id;
  ms.failed_trajectory_id = fail.trajectory_id;
  return ms;
}

std::map<std::string, std::pair<std::string, MatchSet>> pair_group(
    const GroupRollout& group, const DetectConfig& cfg) {
  std::map<std::string, std::pair<std::string, MatchSet>> out;

  const Trajectory* teacher = nullptr;
  for (const Trajectory& t : group.trajectories) {
    if (t.verdict != Verdict::success) continue;
    if (!teacher || t.steps.size() < teacher->steps.size() ||
        (t.steps.size() == teacher->steps.size() &&
         t.trajectory_id < teacher->trajectory_id))
      teacher = &t;
  }
  if (!teacher) return out;

  std::vector<Thumbnail> teacher_thumbs =
      preprocess_trajectory(*teacher, cfg.preprocess);
  for (const Trajectory& t : group.trajectories) {
    if (t.verdict != Verdict::failure) continue;
    std::vector<Thumbnail> ft = preprocess_trajectory(t, cfg.preprocess);
    MatchSet ms = detect_fork_points(teacher_thumbs, ft, cfg.match);
    ms.teacher_trajectory_id = teacher->trajectory_id;
    ms.failed_trajectory_id = t.trajectory_id;
    out.emplace(t.trajectory_id,
                std::make_pair(teacher->trajectory_id, std::move(ms)));
  }
  return out;
}

std::string match_set_json(const MatchSet& ms, int indent) {
  nlohmann::json j;
  j["teacher_trajectory_id"] = ms.teacher_trajectory_id;
  j["failed_trajectory_id"] = ms.failed_trajectory_id;
  nlohmann::json arr = nlohmann::json::array();
  for (const ForkMatch& m : ms.matches) {
    arr.push_back({{"failed_step", m.failed_step},
                   {"teacher_step", m.teacher_step},
                   {"ssim", m.ssim_score}});
  }
  j["matches"] = std::move(arr);
  return j.dump(indent);
}

}  // namespace trajforge
