#include "trajforge/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <stdexcept>

#include "json.hpp"
#include "trajforge/pcg32.hpp"

namespace trajforge {

// ---------------------------------------------------------------------------
// Maze carving and pathfinding
// ---------------------------------------------------------------------------

MazeState carve_maze(int rooms_w, int rooms_h, uint32_t maze_seed) {
  if (rooms_w < 2 || rooms_h < 2)
    throw std::invalid_argument("carve_maze: need at least 2x2 rooms");

  MazeState m;
  m.cell_w = 2 * rooms_w + 1;
  m.cell_h = 2 * rooms_h + 1;
  m.walls.assign(static_cast<size_t>(m.cell_w) * m.cell_h, 1);

  auto open = [&](int r, int c) {
    m.walls[static_cast<size_t>(r) * m.cell_w + c] = 0;
  };

  // Recursive-backtracker over the room lattice. Carving only ever removes
  // the wall between a visited and an unvisited room, so the open cells form
  // a spanning tree: every pair of open cells has exactly one path.
  Pcg32 rng(maze_seed, 0xca57e11eu);
  std::vector<uint8_t> visited(static_cast<size_t>(rooms_w) * rooms_h, 0);
  std::vector<std::pair<int, int>> stack;

  visited[0] = 1;
  open(1, 1);
  stack.push_back({0, 0});
  constexpr int dr[] = {-1, 1, 0, 0};
  constexpr int dc[] = {0, 0, -1, 1};
  while (!stack.empty()) {
    auto [rr, rc] = stack.back();
    int options[4];
    int n = 0;
    for (int d = 0; d < 4; ++d) {
      int nr = rr + dr[d], nc = rc + dc[d];
      if (nr < 0 || nc < 0 || nr >= rooms_h || nc >= rooms_w) continue;
      if (!visited[static_cast<size_t>(nr) * rooms_w + nc]) options[n++] = d;
    }
    if (n == 0) {
      stack.pop_back();
      continue;
    }
    int d = options[rng.next_below(static_cast<uint32_t>(n))];
    int nr = rr + dr[d], nc = rc + dc[d];
    visited[static_cast<size_t>(nr) * rooms_w + nc] = 1;
    open(2 * nr + 1, 2 * nc + 1);
    open(2 * rr + 1 + dr[d], 2 * rc + 1 + dc[d]);  // the wall between
    stack.push_back({nr, nc});
  }
  return m;
}

namespace {

// BFS predecessor grid from (r0,c0); -2 marks unreached.
std::vector<int> maze_bfs(const MazeState& m, int r0, int c0) {
  std::vector<int> pred(static_cast<size_t>(m.cell_w) * m.cell_h, -2);
  if (m.wall(r0, c0)) return pred;
  pred[static_cast<size_t>(r0) * m.cell_w + c0] = -1;  // root
  std::deque<std::pair<int, int>> queue{{r0, c0}};
  constexpr int dr[] = {-1, 1, 0, 0};
  constexpr int dc[] = {0, 0, -1, 1};
  while (!queue.empty()) {
    auto [r, c] = queue.front();
    queue.pop_front();
    for (int d = 0; d < 4; ++d) {
      int nr = r + dr[d], nc = c + dc[d];
      if (m.wall(nr, nc)) continue;
      size_t idx = static_cast<size_t>(nr) * m.cell_w + nc;
      if (pred[idx] != -2) continue;
      pred[idx] = r * m.cell_w + c;
      queue.push_back({nr, nc});
    }
  }
  return pred;
}

}  // namespace

std::vector<std::pair<int, int>> maze_path(const MazeState& m, int r0, int c0,
                                           int r1, int c1) {
  std::vector<std::pair<int, int>> path;
  if (m.wall(r0, c0) || m.wall(r1, c1)) return path;
  std::vector<int> pred = maze_bfs(m, r0, c0);
  int idx = r1 * m.cell_w + c1;
  if (pred[static_cast<size_t>(idx)] == -2) return path;
  while (idx != -1) {
    path.push_back({idx / m.cell_w, idx % m.cell_w});
    idx = pred[static_cast<size_t>(idx)];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

int maze_distance(const MazeState& m, int r0, int c0, int r1, int c1) {
  auto path = maze_path(m, r0, c0, r1, c1);
  return path.empty() ? -1 : static_cast<int>(path.size()) - 1;
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

SimLayout SimLayout::make(int width, int height) {
  if (width < 16 || height * 9 < width * 16)
    throw std::invalid_argument(
        "SimLayout: frame must be at least 16 wide and taller than 16w/9");

  SimLayout l;
  l.width = width;
  l.height = height;
  int w = width, h = height;

  l.statusbar = {0, 0, w, 3 * h / 32};
  l.title = {0, 3 * h / 32, w, h / 8};
  l.viewport = {0, h / 8, w, h / 8 + w};
  l.maze_cell_px = w / 8;

  int bh = 5 * h / 64;
  l.btn_up = {3 * w / 8, 11 * h / 16, 5 * w / 8, 11 * h / 16 + bh};
  l.btn_left = {w / 16, 25 * h / 32, 5 * w / 16, 25 * h / 32 + bh};
  l.btn_right = {11 * w / 16, 25 * h / 32, 15 * w / 16, 25 * h / 32 + bh};
  l.btn_down = {3 * w / 8, 7 * h / 8, 5 * w / 8, 7 * h / 8 + bh};

  l.panel = {w / 16, 3 * h / 16, 15 * w / 16, 13 * h / 16};
  return l;
}

Rect SimLayout::tile(int index) const {
  if (index < 0 || index > 3)
    throw std::out_of_range("SimLayout::tile: index 0..3");
  int pitch = (panel.x1 - panel.x0) / 2;
  int side = pitch * 11 / 14;
  int off = (pitch - side) / 2;
  int col = index % 2, row = index / 2;
  int x0 = panel.x0 + col * pitch + off;
  int y0 = panel.y0 + row * pitch + off;
  return {x0, y0, x0 + side, y0 + side};
}

// ---------------------------------------------------------------------------
// Environment construction
// ---------------------------------------------------------------------------

std::vector<std::string> sim_templates() { return {"maze", "toggle"}; }

namespace {

int param_int(const TaskInstance& task, const std::string& key, int fallback) {
  auto it = task.parameters.find(key);
  if (it == task.parameters.end()) return fallback;
  return std::stoi(it->second);
}

std::pair<int, int> param_cell(const TaskInstance& task,
                               const std::string& key) {
  auto it = task.parameters.find(key);
  if (it == task.parameters.end())
    throw std::invalid_argument("build_env: task " + task.task_id +
                                " missing parameter \"" + key + "\"");
  size_t comma = it->second.find(',');
  if (comma == std::string::npos)
    throw std::invalid_argument("build_env: parameter \"" + key +
                                "\" must be \"row,col\"");
  return {std::stoi(it->second.substr(0, comma)),
          std::stoi(it->second.substr(comma + 1))};
}

std::string instruction_for(const TaskInstance& task) {
  if (task.template_id == "maze")
    return "Navigate the maze to the checkered goal cell using the arrow "
           "buttons, then report success.";
  return "Open quick settings, turn bluetooth on and then off again, then "
         "report success.";
}

}  // namespace

EnvState build_env(const TaskInstance& task) {
  EnvState env;
  env.frame_width = param_int(task, "frame_w", 256);
  env.frame_height = param_int(task, "frame_h", 512);
  env.max_turns = param_int(task, "max_turns", 30);
  SimLayout::make(env.frame_width, env.frame_height);  // validates dims

  if (task.template_id == "maze") {
    env.kind = TaskKind::maze;
    auto it = task.parameters.find("maze_seed");
    if (it == task.parameters.end())
      throw std::invalid_argument("build_env: task " + task.task_id +
                                  " missing parameter \"maze_seed\"");
    uint32_t maze_seed =
        static_cast<uint32_t>(std::stoul(it->second));
    env.maze = carve_maze(param_int(task, "rooms_w", 5),
                          param_int(task, "rooms_h", 5), maze_seed);
    std::tie(env.maze.agent_r, env.maze.agent_c) = param_cell(task, "start");
    std::tie(env.maze.goal_r, env.maze.goal_c) = param_cell(task, "goal");
    if (env.maze.wall(env.maze.agent_r, env.maze.agent_c) ||
        env.maze.wall(env.maze.goal_r, env.maze.goal_c))
      throw std::invalid_argument("build_env: start/goal on a wall cell");
  } else if (task.template_id == "toggle") {
    env.kind = TaskKind::toggle;
    env.toggle.bluetooth_tile = param_int(task, "tile_index", 0);
    if (env.toggle.bluetooth_tile < 0 || env.toggle.bluetooth_tile > 3)
      throw std::invalid_argument("build_env: tile_index must be 0..3");
  } else {
    throw std::invalid_argument("build_env: unknown template \"" +
                                task.template_id + "\"");
  }
  return env;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

constexpr uint8_t kStatusbar = 32;
constexpr uint8_t kBackground = 235;
constexpr uint8_t kWall = 24;
constexpr uint8_t kCorridor = 245;
constexpr uint8_t kAgent = 8;
constexpr uint8_t kButtonFace = 180;
constexpr uint8_t kButtonGlyph = 60;

inline int floordiv(int a, int b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

void fill_rect(Frame& f, const Rect& r, uint8_t v) {
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x)
      f.pixels[static_cast<size_t>(y) * f.width + x] = v;
}

// Filled triangle pointing along (dx,dy) inside the button rect.
void draw_arrow(Frame& f, const Rect& r, int dx, int dy) {
  int w = r.x1 - r.x0, h = r.y1 - r.y0;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      int lx = x - r.x0, ly = y - r.y0;
      bool in;
      if (dy < 0)        // up: apex on the top edge
        in = std::abs(2 * lx - w) * h <= 2 * ly * (w / 2);
      else if (dy > 0)   // down
        in = std::abs(2 * lx - w) * h <= 2 * (h - 1 - ly) * (w / 2);
      else if (dx < 0)   // left
        in = std::abs(2 * ly - h) * w <= 2 * lx * (h / 2);
      else               // right
        in = std::abs(2 * ly - h) * w <= 2 * (w - 1 - lx) * (h / 2);
      if (in) f.pixels[static_cast<size_t>(y) * f.width + x] = kButtonGlyph;
    }
  }
}

void render_maze(Frame& f, const EnvState& env, const SimLayout& l) {
  const MazeState& m = env.maze;
  int cell = l.maze_cell_px;
  int side = l.viewport.x1 - l.viewport.x0;

  // The viewport is agent-centered: the agent cell is pinned at the middle
  // and the world translates under it, so any move shifts every surrounding
  // pixel by a full cell.
  int origin_x = m.agent_c * cell + cell / 2 - side / 2;
  int origin_y = m.agent_r * cell + cell / 2 - side / 2;

  for (int vy = l.viewport.y0; vy < l.viewport.y1; ++vy) {
    for (int vx = l.viewport.x0; vx < l.viewport.x1; ++vx) {
      int wx = origin_x + (vx - l.viewport.x0);
      int wy = origin_y + (vy - l.viewport.y0);
      int c = floordiv(wx, cell), r = floordiv(wy, cell);
      uint8_t v;
      if (r < 0 || c < 0 || r >= m.cell_h || c >= m.cell_w) {
        v = static_cast<uint8_t>(96 + (((wx >> 4) ^ (wy >> 4)) & 1) * 48);
      } else if (r == m.agent_r && c == m.agent_c) {
        v = kAgent;
      } else if (r == m.goal_r && c == m.goal_c) {
        v = static_cast<uint8_t>((((wx >> 2) ^ (wy >> 2)) & 1) ? 200 : 120);
      } else {
        v = m.wall(r, c) ? kWall : kCorridor;
      }
      f.pixels[static_cast<size_t>(vy) * f.width + vx] = v;
    }
  }

  for (auto [btn, dx, dy] :
       {std::tuple{&l.btn_up, 0, -1}, std::tuple{&l.btn_down, 0, 1},
        std::tuple{&l.btn_left, -1, 0}, std::tuple{&l.btn_right, 1, 0}}) {
    fill_rect(f, *btn, kButtonFace);
    draw_arrow(f, *btn, dx, dy);
  }
}

void render_toggle(Frame& f, const EnvState& env, const SimLayout& l) {
  const ToggleState& t = env.toggle;
  int w = f.width;

  if (t.screen == ToggleScreen::home) {
    // Launcher look: a lattice of app-icon squares.
    int icon = std::max(1, w / 8);
    for (int y = l.panel.y0; y < l.panel.y1; ++y)
      for (int x = l.panel.x0; x < l.panel.x1; ++x)
        if ((x / icon) % 2 == 1 && (y / icon) % 2 == 1)
          f.pixels[static_cast<size_t>(y) * w + x] = 140;
    return;
  }

  if (t.screen == ToggleScreen::settings_page) {
    // Dead-end settings list: horizontal row separators.
    int pitch = std::max(2, f.height / 16);
    for (int y = l.panel.y0; y < l.panel.y1; ++y)
      for (int x = l.panel.x0; x < l.panel.x1; ++x)
        if ((y - l.panel.y0) % pitch < std::max(1, pitch / 4))
          f.pixels[static_cast<size_t>(y) * w + x] = 150;
    return;
  }

  // Quick settings: 2x2 tile grid; the whole panel inverts when bluetooth
  // is on, which is what makes the on/off states visually far apart.
  fill_rect(f, l.panel, 210);
  for (int i = 0; i < 4; ++i) {
    Rect tr = l.tile(i);
    fill_rect(f, tr, 160);
    int side = tr.x1 - tr.x0;
    // i+1 stripes across the upper half identify the tile.
    for (int y = tr.y0; y < tr.y1; ++y) {
      int band = (y - tr.y0) * 8 / side;
      if (band < 2 * (i + 1) && band % 2 == 0)
        for (int x = tr.x0; x < tr.x1; ++x)
          f.pixels[static_cast<size_t>(y) * w + x] = 80;
    }
    if (i == t.bluetooth_tile) {
      // Corner badge marking the bluetooth tile.
      Rect badge{tr.x1 - side / 4, tr.y0, tr.x1, tr.y0 + side / 4};
      fill_rect(f, badge, 40);
    }
  }
  if (t.bluetooth_on)
    for (int y = l.panel.y0; y < l.panel.y1; ++y)
      for (int x = l.panel.x0; x < l.panel.x1; ++x) {
        uint8_t& p = f.pixels[static_cast<size_t>(y) * w + x];
        p = static_cast<uint8_t>(255 - p);
      }
}

}  // namespace

Frame render(const EnvState& env) {
  SimLayout l = SimLayout::make(env.frame_width, env.frame_height);
  Frame f;
  f.width = env.frame_width;
  f.height = env.frame_height;
  f.channels = 1;
  f.pixels.assign(static_cast<size_t>(f.width) * f.height, kBackground);

  fill_rect(f, l.statusbar, kStatusbar);
  uint8_t title_v = 200;
  if (env.kind == TaskKind::toggle)
    title_v = env.toggle.screen == ToggleScreen::home           ? 210
              : env.toggle.screen == ToggleScreen::quick_settings ? 190
                                                                  : 170;
  fill_rect(f, l.title, title_v);

  if (env.kind == TaskKind::maze)
    render_maze(f, env, l);
  else
    render_toggle(f, env, l);
  return f;
}

// ---------------------------------------------------------------------------
// Transition
// ---------------------------------------------------------------------------

std::pair<EnvState, Frame> step(const EnvState& env,
                                const ActionRecord& action) {
  if (env.terminal())
    throw std::logic_error("step: episode already terminal");

  auto check_coord = [&](const std::optional<int>& x,
                         const std::optional<int>& y) {
    if (!x || !y)
      throw std::invalid_argument("step: action missing coordinates");
    if (*x < 0 || *x >= env.frame_width || *y < 0 || *y >= env.frame_height)
      throw std::invalid_argument(
          "step: coordinates (" + std::to_string(*x) + "," +
          std::to_string(*y) + ") outside " + std::to_string(env.frame_width) +
          "x" + std::to_string(env.frame_height) + " frame");
  };

  EnvState next = env;
  next.step_count += 1;
  SimLayout l = SimLayout::make(env.frame_width, env.frame_height);

  switch (action.kind) {
    case ActionKind::status:
      next.status_taken = true;
      next.goal_status = action.text.value_or("");
      break;

    case ActionKind::click: {
      check_coord(action.x, action.y);
      int x = *action.x, y = *action.y;
      if (env.kind == TaskKind::maze) {
        int dr = 0, dc = 0;
        if (l.btn_up.contains(x, y)) dr = -1;
        else if (l.btn_down.contains(x, y)) dr = 1;
        else if (l.btn_left.contains(x, y)) dc = -1;
        else if (l.btn_right.contains(x, y)) dc = 1;
        if (dr != 0 || dc != 0) {
          int nr = env.maze.agent_r + dr, nc = env.maze.agent_c + dc;
          if (!env.maze.wall(nr, nc)) {  // blocked moves burn the turn
            next.maze.agent_r = nr;
            next.maze.agent_c = nc;
          }
        }
      } else if (env.toggle.screen == ToggleScreen::quick_settings) {
        for (int i = 0; i < 4; ++i) {
          if (!l.tile(i).contains(x, y)) continue;
          if (i == env.toggle.bluetooth_tile) {
            next.toggle.bluetooth_on = !env.toggle.bluetooth_on;
            next.toggle.bluetooth_ever_on |= next.toggle.bluetooth_on;
          }
          break;  // other tiles are inert
        }
      }
      break;
    }

    case ActionKind::swipe: {
      check_coord(action.x, action.y);
      check_coord(action.x2, action.y2);
      if (env.kind == TaskKind::toggle) {
        int dy = *action.y2 - *action.y;
        ToggleScreen s = env.toggle.screen;
        if (s == ToggleScreen::home && dy > 0)
          next.toggle.screen = ToggleScreen::quick_settings;
        else if (s == ToggleScreen::home && dy < 0)
          next.toggle.screen = ToggleScreen::settings_page;
        else if (s != ToggleScreen::home && dy < 0)
          next.toggle.screen = ToggleScreen::home;
      }
      break;
    }

    case ActionKind::long_press:
      check_coord(action.x, action.y);
      break;  // recognized but inert: wait semantics

    case ActionKind::navigate_back:
      if (env.kind == TaskKind::toggle)
        next.toggle.screen = ToggleScreen::home;
      break;

    case ActionKind::navigate_home:
      if (env.kind == TaskKind::toggle)
        next.toggle.screen = ToggleScreen::home;
      break;

    case ActionKind::open_app:
    case ActionKind::input_text:
    case ActionKind::keyboard_enter:
    case ActionKind::wait:
    case ActionKind::answer:
      break;  // unsupported here: wait semantics
  }

  Frame f = render(next);
  return {std::move(next), std::move(f)};
}

SimVerdict verify(const EnvState& env, const TaskInstance& task) {
  bool ok;
  if (task.template_id == "maze" || env.kind == TaskKind::maze)
    ok = env.maze.agent_r == env.maze.goal_r &&
         env.maze.agent_c == env.maze.goal_c;
  else
    ok = env.toggle.bluetooth_ever_on && !env.toggle.bluetooth_on;
  return {ok ? Verdict::success : Verdict::failure, ok ? 1.0 : 0.0};
}

// ---------------------------------------------------------------------------
// Policies and rollouts
// ---------------------------------------------------------------------------

namespace {

ActionRecord click_center(const Rect& r) {
  return ActionRecord::click(r.cx(), r.cy());
}

ActionRecord swipe_vertical(const SimLayout& l, bool downward) {
  int x = l.width / 2;
  int y_hi = l.panel.y0, y_lo = l.panel.y1 - 1;
  return downward ? ActionRecord::swipe(x, y_hi, x, y_lo)
                  : ActionRecord::swipe(x, y_lo, x, y_hi);
}

const Rect& button_for(const SimLayout& l, int dr, int dc) {
  if (dr == -1) return l.btn_up;
  if (dr == 1) return l.btn_down;
  if (dc == -1) return l.btn_left;
  return l.btn_right;
}

const char* direction_name(const SimLayout& l, int x, int y) {
  if (l.btn_up.contains(x, y)) return "up";
  if (l.btn_down.contains(x, y)) return "down";
  if (l.btn_left.contains(x, y)) return "left";
  if (l.btn_right.contains(x, y)) return "right";
  return nullptr;
}

std::string response_for(const EnvState& env, const SimLayout& l,
                         const ActionRecord& action, bool fault) {
  std::string reasoning;
  if (action.kind == ActionKind::status) {
    reasoning = "The goal condition is met; ending the episode.";
  } else if (env.kind == TaskKind::maze) {
    const char* dir = action.x && action.y
                          ? direction_name(l, *action.x, *action.y)
                          : nullptr;
    if (dir)
      reasoning = fault ? std::string("This way looks open; heading ") + dir +
                              " one cell."
                        : std::string("The corridor continues ") + dir +
                              "; moving one cell " + dir + ".";
    else
      reasoning = "Nothing useful to press here; waiting.";
  } else {
    switch (action.kind) {
      case ActionKind::swipe:
        reasoning = fault ? "Swiping to look for the control here."
                          : (action.y2.value_or(0) > action.y.value_or(0)
                                 ? "Swiping down to open quick settings."
                                 : "Swiping up from the home screen.");
        break;
      case ActionKind::click:
        reasoning = fault ? "Tapping this tile to change the setting."
                          : "Tapping the bluetooth tile to flip it.";
        break;
      default:
        reasoning = "No suitable control; waiting.";
        break;
    }
  }
  return reasoning + "\nAction: " + action_to_json(action).dump();
}

}  // namespace

std::vector<ActionRecord> optimal_policy(const TaskInstance& task) {
  EnvState env = build_env(task);
  SimLayout l = SimLayout::make(env.frame_width, env.frame_height);
  std::vector<ActionRecord> base;

  if (env.kind == TaskKind::maze) {
    auto path = maze_path(env.maze, env.maze.agent_r, env.maze.agent_c,
                          env.maze.goal_r, env.maze.goal_c);
    if (path.size() < 2)
      throw std::invalid_argument("optimal_policy: no path to goal");
    for (size_t i = 1; i < path.size(); ++i) {
      int dr = path[i].first - path[i - 1].first;
      int dc = path[i].second - path[i - 1].second;
      base.push_back(click_center(button_for(l, dr, dc)));
    }
  } else {
    Rect bt = l.tile(env.toggle.bluetooth_tile);
    base.push_back(swipe_vertical(l, /*downward=*/true));
    base.push_back(click_center(bt));  // on
    base.push_back(click_center(bt));  // off
  }
  base.push_back(ActionRecord::status("success"));
  return base;
}

ScriptedPolicy inject_fault(const TaskInstance& task, uint32_t fault_seed) {
  ScriptedPolicy policy;
  policy.base = optimal_policy(task);

  EnvState env = build_env(task);
  SimLayout l = SimLayout::make(env.frame_width, env.frame_height);
  Pcg32 rng(fault_seed, 0x000fa017u);

  // Only the action steps are eligible; faulting the terminal status report
  // would not change what the agent did.
  int moves = static_cast<int>(policy.base.size()) - 1;
  int k = static_cast<int>(rng.next_below(static_cast<uint32_t>(moves)));
  policy.fault_step = k;

  if (env.kind == TaskKind::maze) {
    // Any non-optimal direction fails by construction: the base sequence has
    // no spare moves, and in a tree one wrong (or blocked) step costs at
    // least one move it can never win back.
    const Rect* buttons[] = {&l.btn_up, &l.btn_down, &l.btn_left,
                             &l.btn_right};
    const ActionRecord& right_move = policy.base[k];
    std::vector<const Rect*> wrong;
    for (const Rect* b : buttons)
      if (!b->contains(*right_move.x, *right_move.y)) wrong.push_back(b);
    policy.fault_action =
        click_center(*wrong[rng.next_below(static_cast<uint32_t>(wrong.size()))]);
  } else {
    if (k == 0) {
      // Instead of opening quick settings: swipe the wrong way (dead-end
      // settings page) or tap a dead area of the home screen.
      policy.fault_action = rng.next_below(2) == 0
                                ? swipe_vertical(l, /*downward=*/false)
                                : click_center(l.title);
    } else {
      // Instead of the bluetooth tile: one of the three inert tiles.
      int pick = static_cast<int>(rng.next_below(3));
      int tile = 0;
      for (int i = 0; i < 4; ++i) {
        if (i == env.toggle.bluetooth_tile) continue;
        if (pick-- == 0) {
          tile = i;
          break;
        }
      }
      policy.fault_action = click_center(l.tile(tile));
    }
  }
  return policy;
}

Trajectory scripted_rollout(const TaskInstance& task,
                            const ScriptedPolicy& policy,
                            const std::string& trajectory_id) {
  if (policy.base.empty())
    throw std::invalid_argument("scripted_rollout: empty policy");
  if (policy.fault_step &&
      (*policy.fault_step < 0 ||
       *policy.fault_step >= static_cast<int>(policy.base.size())))
    throw std::invalid_argument("scripted_rollout: fault step out of range");

  EnvState env = build_env(task);
  SimLayout l = SimLayout::make(env.frame_width, env.frame_height);

  Trajectory traj;
  traj.trajectory_id = trajectory_id;
  traj.task_id = task.task_id;
  traj.instruction = instruction_for(task);
  traj.frame_width = env.frame_width;
  traj.frame_height = env.frame_height;

  Frame current = render(env);
  for (size_t t = 0; t < policy.base.size(); ++t) {
    bool fault = policy.fault_step && *policy.fault_step == static_cast<int>(t);
    const ActionRecord& action = fault ? policy.fault_action : policy.base[t];

    Step s;
    s.index = static_cast<int>(t);
    char name[32];
    std::snprintf(name, sizeof name, "frames/%03zu.pgm", t);
    s.observation_path = name;
    s.action = action;
    s.response_text = response_for(env, l, action, fault);
    s.frame = current;
    traj.steps.push_back(std::move(s));

    std::tie(env, current) = step(env, action);
  }
  traj.verdict = verify(env, task).verdict;
  return traj;
}

}  // namespace trajforge
