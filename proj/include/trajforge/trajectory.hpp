#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace trajforge {

// ---------------------------------------------------------------------------
// Action model: the eleven predefined mobile-UI actions.
// ---------------------------------------------------------------------------

enum class ActionKind {
  click,
  long_press,
  swipe,
  open_app,
  input_text,
  keyboard_enter,
  navigate_back,
  navigate_home,
  wait,
  status,
  answer,
};

std::string_view to_string(ActionKind kind);
std::optional<ActionKind> action_kind_from_string(std::string_view name);

// One recorded action. Parameter fields are populated only for the kinds
// that take them: click/long_press use (x, y), swipe uses (x, y) -> (x2, y2),
// and open_app/input_text/answer/status carry a single string (app name,
// typed text, answer text, or goal status respectively).
struct ActionRecord {
  ActionKind kind = ActionKind::wait;
  std::optional<int> x;
  std::optional<int> y;
  std::optional<int> x2;
  std::optional<int> y2;
  std::optional<std::string> text;

  static ActionRecord click(int x, int y);
  static ActionRecord long_press(int x, int y);
  static ActionRecord swipe(int x, int y, int x2, int y2);
  static ActionRecord open_app(std::string app_name);
  static ActionRecord input_text(std::string text);
  static ActionRecord keyboard_enter();
  static ActionRecord navigate_back();
  static ActionRecord navigate_home();
  static ActionRecord wait();
  static ActionRecord status(std::string goal_status);
  static ActionRecord answer(std::string text);

  bool operator==(const ActionRecord&) const = default;
};

// JSON form {"kind": ..., <kind-specific params>}; from_json rejects missing,
// mistyped, and unknown keys, reporting them under the given context string.
nlohmann::json action_to_json(const ActionRecord& a);
ActionRecord action_from_json(const nlohmann::json& j,
                              const std::string& where);

// ---------------------------------------------------------------------------
// Frames: 8-bit grayscale (PGM P5) or RGB (PPM P6), maxval 255, row-major.
// ---------------------------------------------------------------------------

struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 = grayscale, 3 = RGB
  std::vector<uint8_t> pixels;

  bool operator==(const Frame&) const = default;
};

Frame load_pnm(const std::filesystem::path& file);
void save_pnm(const Frame& frame, const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Trajectories.
// ---------------------------------------------------------------------------

enum class Verdict { success, failure };

std::string_view to_string(Verdict verdict);
std::optional<Verdict> verdict_from_string(std::string_view name);

struct Step {
  int index = 0;
  std::string observation_path;  // relative to the archive directory
  ActionRecord action;
  std::string response_text;  // verbatim model response: reasoning + tool call
  Frame frame;                // materialized observation

  bool operator==(const Step&) const = default;
};

struct Trajectory {
  std::string trajectory_id;
  std::string task_id;
  std::string instruction;
  Verdict verdict = Verdict::failure;
  int frame_width = 0;
  int frame_height = 0;
  std::vector<Step> steps;

  // Directory the trajectory was loaded from; empty for in-memory values.
  // Not part of value identity.
  std::filesystem::path archive_dir;

  int final_step_index() const { return static_cast<int>(steps.size()) - 1; }

  bool operator==(const Trajectory& other) const {
    return trajectory_id == other.trajectory_id && task_id == other.task_id &&
           instruction == other.instruction && verdict == other.verdict &&
           frame_width == other.frame_width &&
           frame_height == other.frame_height && steps == other.steps;
  }
};

struct HistoryEntry {
  ActionRecord action;
  std::string observation_path;

  bool operator==(const HistoryEntry&) const = default;
};

// Sliding context of the h steps preceding some step t.
struct HistoryContext {
  std::vector<HistoryEntry> entries;
  int window_size = 0;
};

// G rollouts of the same task instance.
struct GroupRollout {
  std::string task_id;
  std::string instruction;
  std::vector<Trajectory> trajectories;
};

// ---------------------------------------------------------------------------
// Archive I/O and validation.
// ---------------------------------------------------------------------------

// Loads <dir>/manifest.json plus every referenced frame. Throws
// std::runtime_error naming the offending path or field on missing
// manifests, missing or corrupt frames, and schema violations.
Trajectory load_trajectory(const std::filesystem::path& dir);

// Writes manifest.json and all frame files under dir. Inverse of
// load_trajectory: saving and reloading yields a value-identical trajectory
// and byte-identical files.
void save_trajectory(const Trajectory& traj, const std::filesystem::path& dir);

// Returns one human-readable description per violated invariant; empty means
// the trajectory is well formed. Violations name the step index and rule.
std::vector<std::string> validate_trajectory(const Trajectory& traj);

// Entries for steps max(0, t-h) .. t-1, in order. Throws std::out_of_range
// when t is not a valid step index and std::invalid_argument when h < 0.
HistoryContext history_window(const Trajectory& traj, int t, int h);

// Loads every trajectory archive found in the immediate subdirectories of
// dir (sorted by name) and checks they share task_id and instruction.
GroupRollout load_group(const std::filesystem::path& dir);

}  // namespace trajforge
