#include "trajforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "trajforge/fork.hpp"
#include "trajforge/pcg32.hpp"
#include "trajforge/samples.hpp"
#include "trajforge/sim.hpp"

namespace trajforge {

using nlohmann::json;
namespace fs = std::filesystem;

PipelineConfig load_pipeline_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in)
    throw std::runtime_error("config: cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + file.string() + ": " + e.what());
  }

  PipelineConfig cfg;
  auto get = [&](const char* key, auto& field) {
    auto it = j.find(key);
    if (it != j.end()) field = it->get<std::decay_t<decltype(field)>>();
  };
  if (j.contains("templates"))
    cfg.templates = j.at("templates").get<std::vector<std::string>>();
  get("tasks", cfg.tasks);
  get("task_seed_base", cfg.task_seed_base);
  get("group_size", cfg.group_size);
  get("faults_per_group", cfg.faults_per_group);
  get("history_window", cfg.history_window);
  get("theta", cfg.match.theta);
  get("hash_prefilter_threshold", cfg.match.hash_prefilter_threshold);
  get("hash_size", cfg.match.hash_size);
  get("ssim_window", cfg.match.ssim_window);
  get("statusbar_crop_px", cfg.preprocess.statusbar_crop_px);
  get("thumb_width", cfg.preprocess.thumb_width);
  get("thumb_height", cfg.preprocess.thumb_height);
  get("frame_width", cfg.frame_width);
  get("frame_height", cfg.frame_height);
  get("max_turns", cfg.max_turns);
  get("eps_low", cfg.eps_low);
  get("eps_high", cfg.eps_high);
  get("jobs", cfg.jobs);
  if (j.contains("out_dir"))
    cfg.out_dir = j.at("out_dir").get<std::string>();

  const std::string where = "config " + file.string();
  if (cfg.templates.empty())
    throw std::runtime_error(where + ": templates must be non-empty");
  if (cfg.tasks < 0) throw std::runtime_error(where + ": tasks must be >= 0");
  if (cfg.group_size < 1)
    throw std::runtime_error(where + ": group_size must be >= 1");
  if (cfg.faults_per_group < 0 || cfg.faults_per_group > cfg.group_size)
    throw std::runtime_error(where +
                             ": faults_per_group must lie in [0, group_size]");
  if (cfg.history_window < 0)
    throw std::runtime_error(where + ": history_window must be >= 0");
  if (cfg.jobs < 1) throw std::runtime_error(where + ": jobs must be >= 1");
  return cfg;
}

namespace {

// Everything produced for one task; slots are merged in task order so the
// outputs never depend on scheduling.
struct TaskResult {
  std::string task_id;
  std::vector<json> rft_lines;
  std::vector<CorrectiveSample> samples;
  PerTaskForkStats stats;
};

json rft_line(const Trajectory& t) {
  json steps = json::array();
  for (const Step& s : t.steps)
    steps.push_back({{"action", action_to_json(s.action)},
                     {"observation", t.task_id + "/" + t.trajectory_id + "/" +
                                         s.observation_path},
                     {"response_text", s.response_text}});
  return json{{"task_id", t.task_id},
              {"trajectory_id", t.trajectory_id},
              {"verdict", std::string(to_string(t.verdict))},
              {"instruction", t.instruction},
              {"steps", std::move(steps)}};
}

TaskResult run_task(const PipelineConfig& cfg, int index) {
  const std::string& tmpl = cfg.templates[index % cfg.templates.size()];
  TaskInstance task =
      perturb_task(tmpl, cfg.task_seed_base + static_cast<uint32_t>(index));
  task.parameters["frame_w"] = std::to_string(cfg.frame_width);
  task.parameters["frame_h"] = std::to_string(cfg.frame_height);
  task.parameters["max_turns"] = std::to_string(cfg.max_turns);

  GroupRollout group;
  group.task_id = task.task_id;

  for (int g = 0; g < cfg.group_size; ++g) {
    std::string traj_id = task.task_id + "-g" + std::to_string(g);
    ScriptedPolicy policy;
    if (g >= cfg.group_size - cfg.faults_per_group) {
      Pcg32 fr(task.rng_seed, 0xf417u + static_cast<uint32_t>(g));
      policy = inject_fault(task, fr.next_u32());
    } else {
      policy.base = optimal_policy(task);
    }
    Trajectory traj = scripted_rollout(task, policy, traj_id);
    if (group.trajectories.empty()) group.instruction = traj.instruction;
    group.trajectories.push_back(std::move(traj));
  }

  // Archives for this task live in their own subtree, so parallel tasks
  // never contend on paths.
  fs::path task_dir = cfg.out_dir / "trajectories" / task.task_id;
  for (const Trajectory& t : group.trajectories)
    save_trajectory(t, task_dir / t.trajectory_id);

  TaskResult result;
  result.task_id = task.task_id;

  for (const Trajectory& t : reject_filter(group.trajectories))
    result.rft_lines.push_back(rft_line(t));

  DetectConfig dcfg{cfg.match, cfg.preprocess};
  auto pairing = pair_group(group, dcfg);
  result.samples = build_samples(pairing, group, cfg.history_window);

  for (const Trajectory& t : group.trajectories)
    (t.verdict == Verdict::success ? result.stats.successes
                                   : result.stats.failures)++;
  for (const auto& [failed_id, entry] : pairing) {
    result.stats.teacher_trajectory_id = entry.first;
    int n = static_cast<int>(entry.second.matches.size());
    result.stats.fork_points += n;
    result.stats.forks_by_failed_trajectory[failed_id] = n;
  }
  return result;
}

void write_atomic(const fs::path& target, const std::string& content) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("pipeline: cannot write " + tmp.string());
    out << content;
    if (!out)
      throw std::runtime_error("pipeline: write failed on " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace

std::string report_json(const PipelineReport& report, int indent) {
  json per_task = json::object();
  for (const auto& [task_id, stats] : report.per_task) {
    per_task[task_id] = {
        {"teacher_trajectory_id", stats.teacher_trajectory_id},
        {"successes", stats.successes},
        {"failures", stats.failures},
        {"fork_points", stats.fork_points},
        {"forks_by_failed_trajectory", stats.forks_by_failed_trajectory},
    };
  }
  json j{{"tasks_run", report.tasks_run},
         {"groups", report.groups},
         {"successes", report.successes},
         {"failures", report.failures},
         {"fork_points_found", report.fork_points_found},
         {"samples_emitted", report.samples_emitted},
         {"rft_trajectories", report.rft_trajectories},
         {"per_task", std::move(per_task)}};
  return j.dump(indent);
}

PipelineReport run_pipeline(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir / "trajectories");

  std::vector<TaskResult> results(static_cast<size_t>(cfg.tasks));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= cfg.tasks || failed.load()) return;
      try {
        results[static_cast<size_t>(i)] = run_task(cfg, i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true))
          first_error = "task index " + std::to_string(i) + ": " + e.what();
        return;
      }
    }
  };

  int jobs = std::max(1, std::min(cfg.jobs, cfg.tasks));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw std::runtime_error("pipeline: " + first_error);

  // Deterministic merge in task order, then the dataset's fixed ordering.
  std::vector<json> rft_lines;
  std::vector<CorrectiveSample> samples;
  PipelineReport report;
  report.tasks_run = cfg.tasks;
  report.groups = cfg.tasks;
  for (TaskResult& r : results) {
    for (json& line : r.rft_lines) rft_lines.push_back(std::move(line));
    for (CorrectiveSample& s : r.samples) samples.push_back(std::move(s));
    report.successes += r.stats.successes;
    report.failures += r.stats.failures;
    report.fork_points_found += r.stats.fork_points;
    report.per_task.emplace(r.task_id, std::move(r.stats));
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const CorrectiveSample& a, const CorrectiveSample& b) {
                     return std::tie(a.task_id, a.failed_trajectory_id,
                                     a.fork_failed_step) <
                            std::tie(b.task_id, b.failed_trajectory_id,
                                     b.fork_failed_step);
                   });

  std::string rft;
  for (const json& line : rft_lines) rft += line.dump() + "\n";
  write_atomic(cfg.out_dir / "rft.jsonl", rft);
  report.rft_trajectories = rft_lines.size();

  report.samples_emitted = static_cast<int>(
      emit_dataset(samples, cfg.out_dir / "grsd.jsonl", "trajectories"));

  write_atomic(cfg.out_dir / "report.json", report_json(report) + "\n");
  return report;
}

}  // namespace trajforge
