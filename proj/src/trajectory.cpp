#include "trajforge/trajectory.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace trajforge {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Action kinds
// ---------------------------------------------------------------------------

namespace {

constexpr std::pair<ActionKind, std::string_view> kActionNames[] = {
    {ActionKind::click, "click"},
    {ActionKind::long_press, "long_press"},
    {ActionKind::swipe, "swipe"},
    {ActionKind::open_app, "open_app"},
    {ActionKind::input_text, "input_text"},
    {ActionKind::keyboard_enter, "keyboard_enter"},
    {ActionKind::navigate_back, "navigate_back"},
    {ActionKind::navigate_home, "navigate_home"},
    {ActionKind::wait, "wait"},
    {ActionKind::status, "status"},
    {ActionKind::answer, "answer"},
};

}  // namespace

std::string_view to_string(ActionKind kind) {
  for (auto [k, name] : kActionNames)
    if (k == kind) return name;
  return "?";
}

std::optional<ActionKind> action_kind_from_string(std::string_view name) {
  for (auto [k, n] : kActionNames)
    if (n == name) return k;
  return std::nullopt;
}

ActionRecord ActionRecord::click(int x, int y) {
  ActionRecord a;
  a.kind = ActionKind::click;
  a.x = x;
  a.y = y;
  return a;
}

ActionRecord ActionRecord::long_press(int x, int y) {
  ActionRecord a;
  a.kind = ActionKind::long_press;
  a.x = x;
  a.y = y;
  return a;
}

ActionRecord ActionRecord::swipe(int x, int y, int x2, int y2) {
  ActionRecord a;
  a.kind = ActionKind::swipe;
  a.x = x;
  a.y = y;
  a.x2 = x2;
  a.y2 = y2;
  return a;
}

ActionRecord ActionRecord::open_app(std::string app_name) {
  ActionRecord a;
  a.kind = ActionKind::open_app;
  a.text = std::move(app_name);
  return a;
}

ActionRecord ActionRecord::input_text(std::string text) {
  ActionRecord a;
  a.kind = ActionKind::input_text;
  a.text = std::move(text);
  return a;
}

ActionRecord ActionRecord::keyboard_enter() {
  ActionRecord a;
  a.kind = ActionKind::keyboard_enter;
  return a;
}

ActionRecord ActionRecord::navigate_back() {
  ActionRecord a;
  a.kind = ActionKind::navigate_back;
  return a;
}

ActionRecord ActionRecord::navigate_home() {
  ActionRecord a;
  a.kind = ActionKind::navigate_home;
  return a;
}

ActionRecord ActionRecord::wait() {
  ActionRecord a;
  a.kind = ActionKind::wait;
  return a;
}

ActionRecord ActionRecord::status(std::string goal_status) {
  ActionRecord a;
  a.kind = ActionKind::status;
  a.text = std::move(goal_status);
  return a;
}

ActionRecord ActionRecord::answer(std::string text) {
  ActionRecord a;
  a.kind = ActionKind::answer;
  a.text = std::move(text);
  return a;
}

std::string_view to_string(Verdict verdict) {
  return verdict == Verdict::success ? "success" : "failure";
}

std::optional<Verdict> verdict_from_string(std::string_view name) {
  if (name == "success") return Verdict::success;
  if (name == "failure") return Verdict::failure;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// PNM (PGM P5 / PPM P6) I/O
// ---------------------------------------------------------------------------

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) continue;
    break;
  }
  if (c == EOF) return tok;
  tok.push_back(static_cast<char>(c));
  while ((c = in.get()) != EOF && !std::isspace(c) && c != '#')
    tok.push_back(static_cast<char>(c));
  if (c == '#') in.unget();
  return tok;
}

int parse_pnm_int(std::istream& in, const fs::path& file, const char* what) {
  std::string tok = next_pnm_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char ch) {
        return std::isdigit(ch);
      })) {
    throw std::runtime_error("corrupt frame: " + file.string() + ": bad " +
                             what + " field");
  }
  long v = std::stol(tok);
  if (v <= 0 || v > 1 << 20)
    throw std::runtime_error("corrupt frame: " + file.string() + ": " + what +
                             " out of range");
  return static_cast<int>(v);
}

}  // namespace

Frame load_pnm(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("missing frame: " + file.string());

  std::string magic = next_pnm_token(in);
  int channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw std::runtime_error("corrupt frame: " + file.string() +
                             ": expected P5 or P6 magic");

  Frame frame;
  frame.channels = channels;
  frame.width = parse_pnm_int(in, file, "width");
  frame.height = parse_pnm_int(in, file, "height");
  int maxval = parse_pnm_int(in, file, "maxval");
  if (maxval != 255)
    throw std::runtime_error("corrupt frame: " + file.string() +
                             ": maxval must be 255, got " +
                             std::to_string(maxval));
  // Exactly one whitespace byte separates the header from the raster; the
  // token reader above already consumed it.

  size_t count = static_cast<size_t>(frame.width) * frame.height * channels;
  frame.pixels.resize(count);
  in.read(reinterpret_cast<char*>(frame.pixels.data()),
          static_cast<std::streamsize>(count));
  if (static_cast<size_t>(in.gcount()) != count)
    throw std::runtime_error("corrupt frame: " + file.string() +
                             ": truncated raster (" +
                             std::to_string(in.gcount()) + " of " +
                             std::to_string(count) + " bytes)");
  if (in.get() != EOF)
    throw std::runtime_error("corrupt frame: " + file.string() +
                             ": trailing bytes after raster");
  return frame;
}

void save_pnm(const Frame& frame, const fs::path& file) {
  if (frame.channels != 1 && frame.channels != 3)
    throw std::invalid_argument("save_pnm: channels must be 1 or 3");
  if (frame.width <= 0 || frame.height <= 0)
    throw std::invalid_argument("save_pnm: empty frame");
  size_t count =
      static_cast<size_t>(frame.width) * frame.height * frame.channels;
  if (frame.pixels.size() != count)
    throw std::invalid_argument("save_pnm: pixel buffer size mismatch");

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write frame: " + file.string());
  out << (frame.channels == 1 ? "P5" : "P6") << "\n"
      << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(count));
  if (!out)
    throw std::runtime_error("cannot write frame: " + file.string());
}

// ---------------------------------------------------------------------------
// Manifest JSON
// ---------------------------------------------------------------------------

namespace {

constexpr int kFormatVersion = 1;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::runtime_error(where + ": unknown key \"" + it.key() + "\"");
}

const json& require_key(const json& obj, const char* key,
                        const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw std::runtime_error(where + ": missing key \"" + key + "\"");
  return *it;
}

std::string require_string(const json& obj, const char* key,
                           const std::string& where) {
  const json& v = require_key(obj, key, where);
  if (!v.is_string())
    throw std::runtime_error(where + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

int require_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require_key(obj, key, where);
  if (!v.is_number_integer())
    throw std::runtime_error(where + ": \"" + key + "\" must be an integer");
  return v.get<int>();
}

}  // namespace

json action_to_json(const ActionRecord& a) {
  json j;
  j["kind"] = std::string(to_string(a.kind));
  switch (a.kind) {
    case ActionKind::click:
    case ActionKind::long_press:
      j["x"] = a.x.value();
      j["y"] = a.y.value();
      break;
    case ActionKind::swipe:
      j["x"] = a.x.value();
      j["y"] = a.y.value();
      j["x2"] = a.x2.value();
      j["y2"] = a.y2.value();
      break;
    case ActionKind::open_app:
      j["app_name"] = a.text.value();
      break;
    case ActionKind::input_text:
    case ActionKind::answer:
      j["text"] = a.text.value();
      break;
    case ActionKind::status:
      j["goal_status"] = a.text.value();
      break;
    case ActionKind::keyboard_enter:
    case ActionKind::navigate_back:
    case ActionKind::navigate_home:
    case ActionKind::wait:
      break;
  }
  return j;
}

ActionRecord action_from_json(const json& j, const std::string& where) {
  if (!j.is_object())
    throw std::runtime_error(where + ": action must be an object");
  std::string kind_name = require_string(j, "kind", where);
  auto kind = action_kind_from_string(kind_name);
  if (!kind)
    throw std::runtime_error(where + ": unknown action kind \"" + kind_name +
                             "\"");

  ActionRecord a;
  a.kind = *kind;
  std::set<std::string> allowed = {"kind"};
  switch (*kind) {
    case ActionKind::click:
    case ActionKind::long_press:
      allowed.insert({"x", "y"});
      a.x = require_int(j, "x", where);
      a.y = require_int(j, "y", where);
      break;
    case ActionKind::swipe:
      allowed.insert({"x", "y", "x2", "y2"});
      a.x = require_int(j, "x", where);
      a.y = require_int(j, "y", where);
      a.x2 = require_int(j, "x2", where);
      a.y2 = require_int(j, "y2", where);
      break;
    case ActionKind::open_app:
      allowed.insert("app_name");
      a.text = require_string(j, "app_name", where);
      break;
    case ActionKind::input_text:
    case ActionKind::answer:
      allowed.insert("text");
      a.text = require_string(j, "text", where);
      break;
    case ActionKind::status:
      allowed.insert("goal_status");
      a.text = require_string(j, "goal_status", where);
      break;
    case ActionKind::keyboard_enter:
    case ActionKind::navigate_back:
    case ActionKind::navigate_home:
    case ActionKind::wait:
      break;
  }
  check_keys(j, allowed, where);
  return a;
}

Trajectory load_trajectory(const fs::path& dir) {
  fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in)
    throw std::runtime_error("missing manifest: " + manifest_path.string());

  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("manifest " + manifest_path.string() + ": " +
                             e.what());
  }

  const std::string where = "manifest " + manifest_path.string();
  if (!j.is_object())
    throw std::runtime_error(where + ": top level must be an object");
  check_keys(j,
             {"format_version", "trajectory_id", "task_id", "instruction",
              "verdict", "frame_width", "frame_height", "steps"},
             where);

  int version = require_int(j, "format_version", where);
  if (version != kFormatVersion)
    throw std::runtime_error(where + ": unsupported format_version " +
                             std::to_string(version));

  Trajectory traj;
  traj.archive_dir = dir;
  traj.trajectory_id = require_string(j, "trajectory_id", where);
  traj.task_id = require_string(j, "task_id", where);
  traj.instruction = require_string(j, "instruction", where);
  std::string verdict_name = require_string(j, "verdict", where);
  auto verdict = verdict_from_string(verdict_name);
  if (!verdict)
    throw std::runtime_error(where + ": bad verdict \"" + verdict_name + "\"");
  traj.verdict = *verdict;
  traj.frame_width = require_int(j, "frame_width", where);
  traj.frame_height = require_int(j, "frame_height", where);

  const json& steps = require_key(j, "steps", where);
  if (!steps.is_array())
    throw std::runtime_error(where + ": \"steps\" must be an array");

  for (size_t k = 0; k < steps.size(); ++k) {
    std::string step_where = where + ": steps[" + std::to_string(k) + "]";
    const json& sj = steps[k];
    if (!sj.is_object())
      throw std::runtime_error(step_where + ": must be an object");
    check_keys(sj, {"index", "observation", "action", "response_text"},
               step_where);

    Step step;
    step.index = require_int(sj, "index", step_where);
    step.observation_path = require_string(sj, "observation", step_where);
    step.response_text = require_string(sj, "response_text", step_where);
    step.action =
        action_from_json(require_key(sj, "action", step_where), step_where);
    step.frame = load_pnm(dir / step.observation_path);
    traj.steps.push_back(std::move(step));
  }

  auto violations = validate_trajectory(traj);
  if (!violations.empty()) {
    std::string msg = where + ": invalid trajectory:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw std::runtime_error(msg);
  }
  return traj;
}

void save_trajectory(const Trajectory& traj, const fs::path& dir) {
  auto violations = validate_trajectory(traj);
  if (!violations.empty()) {
    std::string msg = "save_trajectory: invalid trajectory:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw std::runtime_error(msg);
  }

  fs::create_directories(dir);

  json steps = json::array();
  for (const Step& step : traj.steps) {
    if (step.frame.pixels.empty())
      throw std::runtime_error("save_trajectory: step " +
                               std::to_string(step.index) +
                               " has no frame data");
    json sj;
    sj["index"] = step.index;
    sj["observation"] = step.observation_path;
    sj["action"] = action_to_json(step.action);
    sj["response_text"] = step.response_text;
    steps.push_back(std::move(sj));

    fs::path frame_path = dir / step.observation_path;
    fs::create_directories(frame_path.parent_path());
    save_pnm(step.frame, frame_path);
  }

  json j;
  j["format_version"] = kFormatVersion;
  j["trajectory_id"] = traj.trajectory_id;
  j["task_id"] = traj.task_id;
  j["instruction"] = traj.instruction;
  j["verdict"] = std::string(to_string(traj.verdict));
  j["frame_width"] = traj.frame_width;
  j["frame_height"] = traj.frame_height;
  j["steps"] = std::move(steps);

  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write manifest: " +
                             (dir / "manifest.json").string());
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void validate_action_params(const Step& step, const Trajectory& traj,
                            std::vector<std::string>& out) {
  const ActionRecord& a = step.action;
  auto complain = [&](const std::string& what) {
    out.push_back("step " + std::to_string(step.index) + ": " +
                  std::string(to_string(a.kind)) + " " + what);
  };

  bool wants_xy = a.kind == ActionKind::click ||
                  a.kind == ActionKind::long_press ||
                  a.kind == ActionKind::swipe;
  bool wants_xy2 = a.kind == ActionKind::swipe;
  bool wants_text =
      a.kind == ActionKind::open_app || a.kind == ActionKind::input_text ||
      a.kind == ActionKind::answer || a.kind == ActionKind::status;

  if (wants_xy && (!a.x || !a.y)) complain("requires x and y");
  if (!wants_xy && (a.x || a.y)) complain("takes no coordinates");
  if (wants_xy2 && (!a.x2 || !a.y2)) complain("requires x2 and y2");
  if (!wants_xy2 && (a.x2 || a.y2)) complain("takes no end coordinates");
  if (wants_text && (!a.text || a.text->empty()))
    complain("requires a non-empty string parameter");
  if (!wants_text && a.text) complain("takes no string parameter");
  // goal_status itself is free-form ("success", "infeasible", ...); only
  // presence is enforced above.

  auto check_coord = [&](const std::optional<int>& v, int limit,
                         const char* name) {
    if (v && (*v < 0 || *v >= limit))
      out.push_back("step " + std::to_string(step.index) + ": " + name + "=" +
                    std::to_string(*v) + " outside frame (0.." +
                    std::to_string(limit - 1) + ")");
  };
  if (wants_xy) {
    check_coord(a.x, traj.frame_width, "x");
    check_coord(a.y, traj.frame_height, "y");
  }
  if (wants_xy2) {
    check_coord(a.x2, traj.frame_width, "x2");
    check_coord(a.y2, traj.frame_height, "y2");
  }

}

}  // namespace

std::vector<std::string> validate_trajectory(const Trajectory& traj) {
  std::vector<std::string> out;

  if (traj.steps.empty()) {
    out.push_back("trajectory has no steps");
    return out;
  }
  if (traj.frame_width <= 0 || traj.frame_height <= 0)
    out.push_back("frame dimensions must be positive");

  for (size_t k = 0; k < traj.steps.size(); ++k) {
    const Step& step = traj.steps[k];
    if (step.index != static_cast<int>(k))
      out.push_back("step at position " + std::to_string(k) +
                    ": index is " + std::to_string(step.index) +
                    ", expected " + std::to_string(k));

    if (step.observation_path.empty())
      out.push_back("step " + std::to_string(step.index) +
                    ": empty observation path");

    if (step.action.kind == ActionKind::status &&
        static_cast<int>(k) != traj.final_step_index())
      out.push_back("step " + std::to_string(step.index) +
                    ": status action before the final step");

    validate_action_params(step, traj, out);

    if (!step.frame.pixels.empty()) {
      if (step.frame.width != traj.frame_width ||
          step.frame.height != traj.frame_height)
        out.push_back("step " + std::to_string(step.index) + ": frame is " +
                      std::to_string(step.frame.width) + "x" +
                      std::to_string(step.frame.height) + ", expected " +
                      std::to_string(traj.frame_width) + "x" +
                      std::to_string(traj.frame_height));
    } else if (!traj.archive_dir.empty()) {
      fs::path frame_path = traj.archive_dir / step.observation_path;
      try {
        Frame f = load_pnm(frame_path);
        if (f.width != traj.frame_width || f.height != traj.frame_height)
          out.push_back("step " + std::to_string(step.index) +
                        ": frame size mismatch in " + frame_path.string());
      } catch (const std::exception& e) {
        out.push_back("step " + std::to_string(step.index) + ": " + e.what());
      }
    } else {
      out.push_back("step " + std::to_string(step.index) +
                    ": no frame data and no archive directory to load from");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// History windows and groups
// ---------------------------------------------------------------------------

HistoryContext history_window(const Trajectory& traj, int t, int h) {
  if (h < 0) throw std::invalid_argument("history_window: h must be >= 0");
  if (t < 0 || t >= static_cast<int>(traj.steps.size()))
    throw std::out_of_range("history_window: step " + std::to_string(t) +
                            " out of range (trajectory has " +
                            std::to_string(traj.steps.size()) + " steps)");

  HistoryContext ctx;
  ctx.window_size = h;
  int first = std::max(0, t - h);
  for (int i = first; i < t; ++i)
    ctx.entries.push_back(
        {traj.steps[i].action, traj.steps[i].observation_path});
  return ctx;
}

GroupRollout load_group(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw std::runtime_error("load_group: not a directory: " + dir.string());

  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());

  GroupRollout group;
  for (const fs::path& sub : subdirs) {
    if (!fs::exists(sub / "manifest.json")) continue;
    Trajectory traj = load_trajectory(sub);
    if (group.trajectories.empty()) {
      group.task_id = traj.task_id;
      group.instruction = traj.instruction;
    } else if (traj.task_id != group.task_id) {
      throw std::runtime_error("load_group: " + sub.string() + " has task_id " +
                               traj.task_id + ", group is " + group.task_id);
    } else if (traj.instruction != group.instruction) {
      throw std::runtime_error("load_group: " + sub.string() +
                               " instruction differs from group");
    }
    group.trajectories.push_back(std::move(traj));
  }
  if (group.trajectories.empty())
    throw std::runtime_error("load_group: no trajectory archives under " +
                             dir.string());
  return group;
}

}  // namespace trajforge
