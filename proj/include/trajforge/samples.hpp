#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trajforge/fork.hpp"
#include "trajforge/trajectory.hpp"

namespace trajforge {

// The structured prompt of a corrective sample: what the failed agent saw at
// the fork step. Observation fields are archive-relative path references,
// never inline pixels.
struct PromptRecord {
  std::string instruction;
  std::vector<HistoryEntry> history;  // failed trajectory, steps j-h .. j-1
  std::string current_observation;

  bool operator==(const PromptRecord&) const = default;
};

// Failed-context prompt paired with the teacher's response at the matched
// step: the unit of the self-distillation dataset.
struct CorrectiveSample {
  std::string task_id;
  std::string failed_trajectory_id;
  std::string teacher_trajectory_id;
  int fork_failed_step = 0;
  int fork_teacher_step = 0;
  double ssim_score = 0.0;
  PromptRecord prompt;
  std::string response;

  bool operator==(const CorrectiveSample&) const = default;
};

// Token-position mask for the response-only loss: of P+T positions, exactly
// the trailing T (response) positions count.
struct LossMask {
  int prompt_token_count = 0;
  int response_token_count = 0;

  std::vector<bool> mask() const;
};

// A concrete task drawn from a template's perturbation ranges; fully
// reconstructible from (template_id, rng_seed).
struct TaskInstance {
  std::string task_id;
  std::string template_id;
  std::map<std::string, std::string> parameters;
  uint32_t rng_seed = 0;

  bool operator==(const TaskInstance&) const = default;
};

// One sample per fork match, skipping matches whose failed and teacher
// responses are byte-identical (nothing to correct). History comes from the
// FAILED trajectory via history_window(fail, j, h); observation references
// are "<task_id>/<trajectory_id>/<path>" relative to the archive root.
std::vector<CorrectiveSample> build_samples(
    const std::map<std::string, std::pair<std::string, MatchSet>>& pairing,
    const GroupRollout& group, int history_window_size);

// -(1/T) * sum of the response-position log-probabilities. Prompt positions
// never contribute.
double grsd_loss(const std::vector<double>& per_token_logprobs,
                 const LossMask& mask);

// Keeps the verifier-passing trajectories, order preserved.
std::vector<Trajectory> reject_filter(const std::vector<Trajectory>& trajs);

// Draws a task from the template's declared ranges with a PCG32 stream
// seeded by `seed`; same inputs always produce the identical instance.
TaskInstance perturb_task(const std::string& template_id, uint32_t seed);

// One JSON object per line in input order; when archive_root is given, a
// {"format_version":1,"archive_root":...} header precedes them as line 1.
// Returns the number of sample lines written.
size_t emit_dataset(const std::vector<CorrectiveSample>& samples,
                    const std::filesystem::path& out,
                    const std::optional<std::string>& archive_root =
                        std::nullopt);

struct DatasetFile {
  std::optional<std::string> archive_root;
  std::vector<CorrectiveSample> samples;
};

DatasetFile parse_dataset(const std::filesystem::path& file);

// The canonical single-line JSON form used by emit_dataset.
nlohmann::json sample_json(const CorrectiveSample& s);

}  // namespace trajforge
