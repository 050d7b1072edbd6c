#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "trajforge/trajectory.hpp"

using namespace trajforge;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("trajforge_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Frame solid_frame(int w, int h, uint8_t v, int channels = 1) {
  Frame f;
  f.width = w;
  f.height = h;
  f.channels = channels;
  f.pixels.assign(static_cast<size_t>(w) * h * channels, v);
  return f;
}

// A small, fully in-range trajectory for round-trip and mutation tests.
Trajectory make_trajectory() {
  Trajectory t;
  t.trajectory_id = "t0";
  t.task_id = "task0";
  t.instruction = "do the thing";
  t.verdict = Verdict::success;
  t.frame_width = 16;
  t.frame_height = 16;
  for (int i = 0; i < 3; ++i) {
    Step s;
    s.index = i;
    char buf[32];
    std::snprintf(buf, sizeof buf, "frames/%03d.pgm", i);
    s.observation_path = buf;
    s.response_text = "step " + std::to_string(i);
    s.frame = solid_frame(16, 16, static_cast<uint8_t>(10 * i + 5));
    s.action = i == 2 ? ActionRecord::status("success")
                      : ActionRecord::click(4 + i, 7);
    t.steps.push_back(std::move(s));
  }
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

bool mentions(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("action kind names round-trip") {
  for (ActionKind k :
       {ActionKind::click, ActionKind::long_press, ActionKind::swipe,
        ActionKind::open_app, ActionKind::input_text, ActionKind::keyboard_enter,
        ActionKind::navigate_back, ActionKind::navigate_home, ActionKind::wait,
        ActionKind::status, ActionKind::answer}) {
    auto back = action_kind_from_string(to_string(k));
    REQUIRE(back.has_value());
    CHECK(*back == k);
  }
  CHECK(!action_kind_from_string("tap").has_value());
}

TEST_CASE("action json rejects wrong and unknown keys") {
  ActionRecord a = ActionRecord::swipe(1, 2, 3, 4);
  nlohmann::json j = action_to_json(a);
  CHECK(action_from_json(j, "t") == a);

  j.erase("x2");
  CHECK_THROWS_WITH_AS(action_from_json(j, "t"),
                       doctest::Contains("x2"), std::runtime_error);

  nlohmann::json wait = action_to_json(ActionRecord::wait());
  wait["x"] = 3;
  CHECK_THROWS_WITH_AS(action_from_json(wait, "t"),
                       doctest::Contains("unknown key"), std::runtime_error);

  nlohmann::json bad = {{"kind", "fly"}};
  CHECK_THROWS_AS(action_from_json(bad, "t"), std::runtime_error);
}

TEST_CASE("pnm round-trips grayscale and rgb") {
  fs::path dir = temp_dir("pnm");
  Frame g = solid_frame(5, 3, 200);
  g.pixels[7] = 13;
  save_pnm(g, dir / "g.pgm");
  CHECK(load_pnm(dir / "g.pgm") == g);

  Frame c = solid_frame(4, 2, 90, 3);
  c.pixels[5] = 250;
  save_pnm(c, dir / "c.ppm");
  Frame c2 = load_pnm(dir / "c.ppm");
  CHECK(c2.channels == 3);
  CHECK(c2 == c);
}

TEST_CASE("pnm header comments are tolerated") {
  fs::path dir = temp_dir("pnm_comment");
  std::ofstream out(dir / "c.pgm", std::ios::binary);
  out << "P5\n# made by hand\n2 # width\n1\n255\n";
  out.put(static_cast<char>(7));
  out.put(static_cast<char>(9));
  out.close();
  Frame f = load_pnm(dir / "c.pgm");
  CHECK(f.width == 2);
  CHECK(f.height == 1);
  CHECK(f.pixels == std::vector<uint8_t>{7, 9});
}

TEST_CASE("pnm rejects bad maxval, truncation, and trailing bytes") {
  fs::path dir = temp_dir("pnm_bad");

  std::ofstream(dir / "max.pgm", std::ios::binary) << "P5\n1 1\n65535\n\0\0";
  CHECK_THROWS_WITH_AS(load_pnm(dir / "max.pgm"),
                       doctest::Contains("maxval"), std::runtime_error);

  std::ofstream(dir / "short.pgm", std::ios::binary) << "P5\n4 4\n255\nab";
  CHECK_THROWS_WITH_AS(load_pnm(dir / "short.pgm"),
                       doctest::Contains("truncated"), std::runtime_error);

  std::ofstream(dir / "long.pgm", std::ios::binary) << "P5\n1 1\n255\nabc";
  CHECK_THROWS_WITH_AS(load_pnm(dir / "long.pgm"),
                       doctest::Contains("trailing"), std::runtime_error);

  CHECK_THROWS_WITH_AS(load_pnm(dir / "absent.pgm"),
                       doctest::Contains("missing frame"), std::runtime_error);
}

TEST_CASE("trajectory save/load is the identity") {
  fs::path dir = temp_dir("roundtrip");
  Trajectory t = make_trajectory();
  save_trajectory(t, dir / "a");
  Trajectory back = load_trajectory(dir / "a");
  CHECK(back == t);
  CHECK(back.archive_dir == dir / "a");

  // Saving the loaded value again must reproduce every byte.
  save_trajectory(back, dir / "b");
  CHECK(slurp(dir / "a/manifest.json") == slurp(dir / "b/manifest.json"));
  for (const Step& s : t.steps)
    CHECK(slurp(dir / "a" / s.observation_path) ==
          slurp(dir / "b" / s.observation_path));
}

TEST_CASE("load_trajectory reports the offending path or field") {
  fs::path dir = temp_dir("load_errors");

  CHECK_THROWS_WITH_AS(load_trajectory(dir / "nope"),
                       doctest::Contains("missing manifest"),
                       std::runtime_error);

  Trajectory t = make_trajectory();
  save_trajectory(t, dir / "missing_frame");
  fs::remove(dir / "missing_frame/frames/001.pgm");
  CHECK_THROWS_WITH_AS(load_trajectory(dir / "missing_frame"),
                       doctest::Contains("001.pgm"), std::runtime_error);

  save_trajectory(t, dir / "corrupt_frame");
  std::ofstream(dir / "corrupt_frame/frames/000.pgm", std::ios::binary)
      << "P5\n16 16\n255\nxx";
  CHECK_THROWS_WITH_AS(load_trajectory(dir / "corrupt_frame"),
                       doctest::Contains("000.pgm"), std::runtime_error);

  save_trajectory(t, dir / "schema");
  {
    std::string m = slurp(dir / "schema/manifest.json");
    m.replace(m.find("\"task_id\""), 9, "\"task_yd\"");
    std::ofstream(dir / "schema/manifest.json", std::ios::binary) << m;
  }
  CHECK_THROWS_WITH_AS(load_trajectory(dir / "schema"),
                       doctest::Contains("task_yd"), std::runtime_error);
}

TEST_CASE("validate_trajectory flags exactly the planted violation") {
  Trajectory good = make_trajectory();
  REQUIRE(validate_trajectory(good).empty());

  SUBCASE("empty trajectory") {
    Trajectory t = good;
    t.steps.clear();
    auto v = validate_trajectory(t);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v[0], "no steps"));
  }
  SUBCASE("non-contiguous index") {
    Trajectory t = good;
    t.steps[1].index = 5;
    auto v = validate_trajectory(t);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v[0], "expected 1"));
  }
  SUBCASE("status before the final step") {
    Trajectory t = good;
    t.steps[0].action = ActionRecord::status("success");
    auto v = validate_trajectory(t);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v[0], "before the final step"));
  }
  SUBCASE("missing required parameters") {
    Trajectory t = good;
    t.steps[0].action = ActionRecord::click(3, 3);
    t.steps[0].action.y.reset();
    auto v = validate_trajectory(t);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v[0], "requires x and y"));
  }
  SUBCASE("parameters on a parameterless kind") {
    Trajectory t = good;
    t.steps[0].action = ActionRecord::wait();
    t.steps[0].action.text = "hm";
    auto v = validate_trajectory(t);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v[0], "no string parameter"));
  }
  SUBCASE("coordinates out of frame") {
    Trajectory t = good;
    t.steps[0].action = ActionRecord::click(16, 3);  // width is 16
    auto v = validate_trajectory(t);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v[0], "outside frame"));
  }
  SUBCASE("frame size mismatch") {
    Trajectory t = good;
    t.steps[1].frame = solid_frame(8, 8, 1);
    auto v = validate_trajectory(t);
    REQUIRE(v.size() == 1);
    CHECK(mentions(v[0], "expected 16x16"));
  }
}

TEST_CASE("history_window clamps at the start and validates inputs") {
  Trajectory t = make_trajectory();

  CHECK(history_window(t, 0, 5).entries.empty());
  CHECK(history_window(t, 2, 0).entries.empty());

  HistoryContext ctx = history_window(t, 2, 1);
  REQUIRE(ctx.entries.size() == 1);
  CHECK(ctx.entries[0].observation_path == "frames/001.pgm");
  CHECK(ctx.entries[0].action == t.steps[1].action);

  ctx = history_window(t, 2, 30);
  REQUIRE(ctx.entries.size() == 2);
  CHECK(ctx.entries[0].observation_path == "frames/000.pgm");
  CHECK(ctx.window_size == 30);

  CHECK_THROWS_AS(history_window(t, 3, 1), std::out_of_range);
  CHECK_THROWS_AS(history_window(t, -1, 1), std::out_of_range);
  CHECK_THROWS_AS(history_window(t, 1, -1), std::invalid_argument);
}

TEST_CASE("load_group gathers archives and rejects mixed tasks") {
  fs::path dir = temp_dir("group");
  Trajectory a = make_trajectory();
  a.trajectory_id = "a";
  Trajectory b = make_trajectory();
  b.trajectory_id = "b";
  b.verdict = Verdict::failure;
  save_trajectory(a, dir / "a");
  save_trajectory(b, dir / "b");

  GroupRollout g = load_group(dir);
  REQUIRE(g.trajectories.size() == 2);
  CHECK(g.task_id == "task0");
  CHECK(g.trajectories[0].trajectory_id == "a");  // sorted by directory name
  CHECK(g.trajectories[1].trajectory_id == "b");

  Trajectory c = make_trajectory();
  c.trajectory_id = "c";
  c.task_id = "other";
  save_trajectory(c, dir / "c");
  CHECK_THROWS_WITH_AS(load_group(dir), doctest::Contains("task_id"),
                       std::runtime_error);

  CHECK_THROWS_AS(load_group(temp_dir("group_empty")), std::runtime_error);
}
