#include "trajforge/samples.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "trajforge/pcg32.hpp"
#include "trajforge/sim.hpp"

namespace trajforge {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<bool> LossMask::mask() const {
  std::vector<bool> m(static_cast<size_t>(prompt_token_count) +
                      response_token_count);
  for (int i = 0; i < response_token_count; ++i)
    m[prompt_token_count + i] = true;
  return m;
}

namespace {

const Trajectory& find_trajectory(const GroupRollout& group,
                                  const std::string& id) {
  for (const Trajectory& t : group.trajectories)
    if (t.trajectory_id == id) return t;
  throw std::invalid_argument("build_samples: trajectory " + id +
                              " not present in group");
}

std::string observation_ref(const Trajectory& traj, const std::string& path) {
  return traj.task_id + "/" + traj.trajectory_id + "/" + path;
}

}  // namespace

std::vector<CorrectiveSample> build_samples(
    const std::map<std::string, std::pair<std::string, MatchSet>>& pairing,
    const GroupRollout& group, int history_window_size) {
  std::vector<CorrectiveSample> out;

  for (const auto& [failed_id, entry] : pairing) {
    const auto& [teacher_id, match_set] = entry;
    const Trajectory& fail = find_trajectory(group, failed_id);
    const Trajectory& teacher = find_trajectory(group, teacher_id);

    for (const ForkMatch& m : match_set.matches) {
      const Step& failed_step = fail.steps.at(m.failed_step);
      const Step& teacher_step = teacher.steps.at(m.teacher_step);
      // A match whose correction is the response the agent already gave
      // teaches nothing; drop it.
      if (failed_step.response_text == teacher_step.response_text) continue;

      CorrectiveSample s;
      s.task_id = group.task_id;
      s.failed_trajectory_id = failed_id;
      s.teacher_trajectory_id = teacher_id;
      s.fork_failed_step = m.failed_step;
      s.fork_teacher_step = m.teacher_step;
      s.ssim_score = m.ssim_score;
      s.prompt.instruction = fail.instruction;
      HistoryContext ctx =
          history_window(fail, m.failed_step, history_window_size);
      for (HistoryEntry& e : ctx.entries) {
        e.observation_path = observation_ref(fail, e.observation_path);
        s.prompt.history.push_back(std::move(e));
      }
      s.prompt.current_observation =
          observation_ref(fail, failed_step.observation_path);
      s.response = teacher_step.response_text;
      out.push_back(std::move(s));
    }
  }
  return out;
}

double grsd_loss(const std::vector<double>& per_token_logprobs,
                 const LossMask& mask) {
  if (mask.prompt_token_count < 0 || mask.response_token_count < 0)
    throw std::invalid_argument("grsd_loss: negative token count");
  if (mask.response_token_count == 0)
    throw std::invalid_argument("grsd_loss: empty response mask");
  size_t expect = static_cast<size_t>(mask.prompt_token_count) +
                  mask.response_token_count;
  if (per_token_logprobs.size() != expect)
    throw std::invalid_argument(
        "grsd_loss: got " + std::to_string(per_token_logprobs.size()) +
        " logprobs for " + std::to_string(expect) + " positions");

  double total = 0.0;
  for (int i = 0; i < mask.response_token_count; ++i)
    total += per_token_logprobs[mask.prompt_token_count + i];
  return -total / mask.response_token_count;
}

std::vector<Trajectory> reject_filter(const std::vector<Trajectory>& trajs) {
  std::vector<Trajectory> out;
  for (const Trajectory& t : trajs)
    if (t.verdict == Verdict::success) out.push_back(t);
  return out;
}

TaskInstance perturb_task(const std::string& template_id, uint32_t seed) {
  TaskInstance task;
  task.template_id = template_id;
  task.rng_seed = seed;
  task.task_id = template_id + "-" + std::to_string(seed);

  if (template_id == "maze") {
    Pcg32 rng(seed, 0x5eed0001u);
    constexpr int kRooms = 5;
    uint32_t maze_seed = rng.next_u32();
    MazeState maze = carve_maze(kRooms, kRooms, maze_seed);

    // Room cells sit at odd grid coordinates. Redraw until the unique path
    // is long enough to be interesting but fits the turn budget with the
    // terminating status action to spare.
    int sr, sc, gr, gc;
    while (true) {
      sr = 2 * static_cast<int>(rng.next_below(kRooms)) + 1;
      sc = 2 * static_cast<int>(rng.next_below(kRooms)) + 1;
      gr = 2 * static_cast<int>(rng.next_below(kRooms)) + 1;
      gc = 2 * static_cast<int>(rng.next_below(kRooms)) + 1;
      int dist = maze_distance(maze, sr, sc, gr, gc);
      if (dist >= 4 && dist <= 24) break;
    }
    task.parameters["maze_seed"] = std::to_string(maze_seed);
    task.parameters["rooms_w"] = std::to_string(kRooms);
    task.parameters["rooms_h"] = std::to_string(kRooms);
    task.parameters["start"] = std::to_string(sr) + "," + std::to_string(sc);
    task.parameters["goal"] = std::to_string(gr) + "," + std::to_string(gc);
  } else if (template_id == "toggle") {
    Pcg32 rng(seed, 0x5eed0002u);
    task.parameters["tile_index"] = std::to_string(rng.next_below(4));
    task.parameters["target_state"] = rng.next_below(2) ? "on" : "off";
  } else {
    throw std::invalid_argument("perturb_task: unknown template \"" +
                                template_id + "\"");
  }
  return task;
}

// ---------------------------------------------------------------------------
// Dataset emission / parsing
// ---------------------------------------------------------------------------

json sample_json(const CorrectiveSample& s) {
  json history = json::array();
  for (const HistoryEntry& e : s.prompt.history)
    history.push_back({{"action", action_to_json(e.action)},
                       {"observation", e.observation_path}});
  return json{
      {"task_id", s.task_id},
      {"failed_trajectory_id", s.failed_trajectory_id},
      {"teacher_trajectory_id", s.teacher_trajectory_id},
      {"fork_failed_step", s.fork_failed_step},
      {"fork_teacher_step", s.fork_teacher_step},
      {"ssim", s.ssim_score},
      {"prompt",
       {{"instruction", s.prompt.instruction},
        {"history", std::move(history)},
        {"current_observation", s.prompt.current_observation}}},
      {"response", s.response},
  };
}

namespace {

CorrectiveSample sample_from_json(const json& j, const std::string& where) {
  auto need = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end())
      throw std::runtime_error(where + ": missing key \"" + key + "\"");
    return *it;
  };
  CorrectiveSample s;
  s.task_id = need("task_id").get<std::string>();
  s.failed_trajectory_id = need("failed_trajectory_id").get<std::string>();
  s.teacher_trajectory_id = need("teacher_trajectory_id").get<std::string>();
  s.fork_failed_step = need("fork_failed_step").get<int>();
  s.fork_teacher_step = need("fork_teacher_step").get<int>();
  s.ssim_score = need("ssim").get<double>();
  const json& prompt = need("prompt");
  s.prompt.instruction = prompt.at("instruction").get<std::string>();
  s.prompt.current_observation =
      prompt.at("current_observation").get<std::string>();
  for (const json& e : prompt.at("history")) {
    HistoryEntry entry;
    entry.action = action_from_json(e.at("action"), where);
    entry.observation_path = e.at("observation").get<std::string>();
    s.prompt.history.push_back(std::move(entry));
  }
  s.response = need("response").get<std::string>();
  return s;
}

}  // namespace

size_t emit_dataset(const std::vector<CorrectiveSample>& samples,
                    const fs::path& out,
                    const std::optional<std::string>& archive_root) {
  fs::path tmp = out;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f)
      throw std::runtime_error("emit_dataset: cannot write " + tmp.string());
    if (archive_root)
      f << json{{"format_version", 1}, {"archive_root", *archive_root}}.dump()
        << "\n";
    for (const CorrectiveSample& s : samples) f << sample_json(s).dump() << "\n";
    if (!f)
      throw std::runtime_error("emit_dataset: write failed on " +
                               tmp.string());
  }
  fs::rename(tmp, out);
  return samples.size();
}

DatasetFile parse_dataset(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in)
    throw std::runtime_error("parse_dataset: cannot open " + file.string());

  DatasetFile out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where =
        "parse_dataset: " + file.string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    if (lineno == 1 && j.contains("archive_root")) {
      if (j.value("format_version", 0) != 1)
        throw std::runtime_error(where + ": unsupported dataset header");
      out.archive_root = j.at("archive_root").get<std::string>();
      continue;
    }
    out.samples.push_back(sample_from_json(j, where));
  }
  return out;
}

}  // namespace trajforge
