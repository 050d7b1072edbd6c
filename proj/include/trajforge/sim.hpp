#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trajforge/samples.hpp"
#include "trajforge/trajectory.hpp"

namespace trajforge {

enum class TaskKind { maze, toggle };
enum class ToggleScreen { home, quick_settings, settings_page };

// Maze on a cell grid of (2*rooms+1) per side: rooms sit at odd coordinates,
// walls at even ones, and carving knocks out the wall cells between rooms.
// The open cells always form a tree, so paths are unique.
struct MazeState {
  int cell_w = 0;
  int cell_h = 0;
  std::vector<uint8_t> walls;  // cell_w*cell_h, 1 = wall
  int agent_r = 0, agent_c = 0;
  int goal_r = 0, goal_c = 0;

  bool wall(int r, int c) const {
    if (r < 0 || c < 0 || r >= cell_h || c >= cell_w) return true;
    return walls[static_cast<size_t>(r) * cell_w + c] != 0;
  }

  bool operator==(const MazeState&) const = default;
};

struct ToggleState {
  ToggleScreen screen = ToggleScreen::home;
  bool bluetooth_on = false;
  bool bluetooth_ever_on = false;
  int bluetooth_tile = 0;  // which quick-settings tile is the bluetooth one

  bool operator==(const ToggleState&) const = default;
};

struct EnvState {
  TaskKind kind = TaskKind::maze;
  MazeState maze;
  ToggleState toggle;
  int step_count = 0;
  int max_turns = 30;
  int frame_width = 256;
  int frame_height = 512;
  bool status_taken = false;
  std::string goal_status;

  bool terminal() const { return status_taken || step_count >= max_turns; }

  bool operator==(const EnvState&) const = default;
};

// Optimal action sequence with an optional single wrong action spliced in.
struct ScriptedPolicy {
  std::vector<ActionRecord> base;
  std::optional<int> fault_step;
  ActionRecord fault_action;
};

struct SimVerdict {
  Verdict verdict = Verdict::failure;
  double reward = 0.0;
};

// ---------------------------------------------------------------------------
// Screen geometry. All rectangles are derived from the frame size by integer
// fractions (see docs/sim.md for the fixed 256x512 values).
// ---------------------------------------------------------------------------

struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)
  bool contains(int x, int y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  int cx() const { return (x0 + x1) / 2; }
  int cy() const { return (y0 + y1) / 2; }
};

struct SimLayout {
  int width = 0, height = 0;
  Rect statusbar;   // solid band the preprocessing crop removes
  Rect title;       // screen-identifying band
  Rect viewport;    // maze playfield, square of side `width`
  Rect btn_up, btn_down, btn_left, btn_right;
  Rect panel;       // toggle quick-settings panel
  int maze_cell_px = 0;

  Rect tile(int index) const;  // quick-settings tiles, 2x2 grid, index 0..3

  static SimLayout make(int width, int height);
};

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

std::vector<std::string> sim_templates();

// Deterministic initial state for a task instance; honors the optional
// parameters frame_w/frame_h/max_turns so tests can run tiny screens.
EnvState build_env(const TaskInstance& task);

// Pure function of the state; equal states render byte-identical frames.
Frame render(const EnvState& env);

// Applies one action: arrow-button clicks move the maze agent (blocked moves
// burn the turn), swipes/tile clicks drive the toggle screens, status ends
// the episode, and anything unsupported degrades to wait. Throws on terminal
// states and on coordinates outside the frame.
std::pair<EnvState, Frame> step(const EnvState& env,
                                const ActionRecord& action);

SimVerdict verify(const EnvState& env, const TaskInstance& task);

// Shortest action sequence solving the task, ending in status("success").
std::vector<ActionRecord> optimal_policy(const TaskInstance& task);

// Optimal base plus one wrong action at a seeded-uniform step; the wrong
// action provably makes the episode fail (off the unique maze path there is
// no slack to recover; wrong toggle actions break the on-then-off order).
ScriptedPolicy inject_fault(const TaskInstance& task, uint32_t fault_seed);

// Executes the policy, recording one step per action with the observation
// rendered BEFORE the action, synthesized response text, and the verifier's
// verdict.
Trajectory scripted_rollout(const TaskInstance& task,
                            const ScriptedPolicy& policy,
                            const std::string& trajectory_id);

// Maze internals, exposed for task perturbation and tests.
MazeState carve_maze(int rooms_w, int rooms_h, uint32_t maze_seed);
// BFS distance in cells between two open cells; -1 if unreachable.
int maze_distance(const MazeState& m, int r0, int c0, int r1, int c1);
// The unique open-cell path between two cells (inclusive); empty if none.
std::vector<std::pair<int, int>> maze_path(const MazeState& m, int r0, int c0,
                                           int r1, int c1);

}  // namespace trajforge
