#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "trajforge/pcg32.hpp"
#include "trajforge/rl.hpp"

using namespace trajforge;
using doctest::Approx;

namespace {

std::vector<double> random_vec(Pcg32& rng, size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.next_double();
  return v;
}

}  // namespace

TEST_CASE("group advantages: one success among four") {
  AdvantageResult a = grpo_advantages({1.0, 0.0, 0.0, 0.0});
  CHECK(!a.degenerate);
  REQUIRE(a.values.size() == 4);
  CHECK(a.values[0] == Approx(1.7321).epsilon(1e-4));
  CHECK(a.values[1] == Approx(-0.5774).epsilon(1e-4));
  CHECK(a.values[2] == a.values[1]);
  CHECK(a.values[3] == a.values[1]);
}

TEST_CASE("group advantages: binary rewards match the closed form") {
  // k successes in a group of g: success (1-p)/sqrt(p(1-p)), failure
  // -p/sqrt(p(1-p)) with p = k/g.
  Pcg32 rng(21);
  for (int it = 0; it < 50; ++it) {
    size_t g = 2 + rng.next_below(14);
    uint32_t k = 1 + rng.next_below(static_cast<uint32_t>(g) - 1);
    std::vector<double> rewards(g, 0.0);
    for (uint32_t i = 0; i < k; ++i) rewards[i] = 1.0;

    double p = static_cast<double>(k) / static_cast<double>(g);
    double s = std::sqrt(p * (1.0 - p));
    AdvantageResult a = grpo_advantages(rewards);
    CHECK(!a.degenerate);
    for (size_t i = 0; i < g; ++i) {
      double want = rewards[i] == 1.0 ? (1.0 - p) / s : -p / s;
      CHECK(a.values[i] == Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("group advantages are zero-mean and unit-spread") {
  Pcg32 rng(22);
  for (int it = 0; it < 200; ++it) {
    size_t g = 2 + rng.next_below(15);
    std::vector<double> rewards = random_vec(rng, g, -2.0, 2.0);
    AdvantageResult a = grpo_advantages(rewards);
    if (a.degenerate) continue;  // astronomically unlikely, but well-defined

    double mean = 0.0, var = 0.0;
    for (double v : a.values) mean += v;
    mean /= static_cast<double>(g);
    for (double v : a.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(g);
    CHECK(mean == Approx(0.0).epsilon(1e-12));
    CHECK(var == Approx(1.0).epsilon(1e-9));

    // Monotone in the reward: ordering is preserved.
    for (size_t i = 0; i + 1 < g; ++i)
      if (rewards[i] < rewards[i + 1])
        CHECK(a.values[i] < a.values[i + 1]);
  }
}

TEST_CASE("group advantages: all-equal groups flag degenerate, emit zeros") {
  for (auto rewards : {std::vector<double>{0.0, 0.0},
                       std::vector<double>{1.0, 1.0, 1.0},
                       std::vector<double>(8, 0.5)}) {
    AdvantageResult a = grpo_advantages(rewards);
    CHECK(a.degenerate);
    REQUIRE(a.values.size() == rewards.size());
    for (double v : a.values) CHECK(v == 0.0);
  }
}

TEST_CASE("group advantages reject undersized or non-finite input") {
  CHECK_THROWS_AS(grpo_advantages({}), std::invalid_argument);
  CHECK_THROWS_AS(grpo_advantages({1.0}), std::invalid_argument);
  CHECK_THROWS_AS(grpo_advantages({1.0, std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(
      grpo_advantages({1.0, std::numeric_limits<double>::infinity()}),
      std::invalid_argument);
}

TEST_CASE("gae: worked example") {
  AdvantageResult a = gae({1.0, 0.0, 1.0}, {0.5, 0.2, 0.1, 0.0}, 0.9, 0.95);
  REQUIRE(a.values.size() == 3);
  CHECK(a.values[2] == Approx(0.9).epsilon(1e-12));
  CHECK(a.values[1] == Approx(-0.11 + 0.855 * 0.9).epsilon(1e-12));
  CHECK(a.values[0] == Approx(0.68 + 0.855 * (-0.11 + 0.855 * 0.9))
                           .epsilon(1e-12));
}

TEST_CASE("gae matches the term-by-term forward sum") {
  Pcg32 rng(23);
  for (int it = 0; it < 300; ++it) {
    size_t n = 1 + rng.next_below(64);
    std::vector<double> rewards = random_vec(rng, n, -2.0, 2.0);
    std::vector<double> values = random_vec(rng, n + 1, -2.0, 2.0);
    double gamma = rng.next_double();
    double lam = rng.next_double();

    AdvantageResult got = gae(rewards, values, gamma, lam);
    std::vector<double> want = oracle::gae_brute(rewards, values, gamma, lam);
    REQUIRE(got.values.size() == want.size());
    for (size_t t = 0; t < n; ++t)
      CHECK(got.values[t] == Approx(want[t]).epsilon(1e-10));
  }
}

TEST_CASE("gae: lambda zero reduces to one-step temporal differences") {
  Pcg32 rng(24);
  std::vector<double> rewards = random_vec(rng, 16, -1.0, 1.0);
  std::vector<double> values = random_vec(rng, 17, -1.0, 1.0);
  double gamma = 0.97;
  AdvantageResult a = gae(rewards, values, gamma, 0.0);
  for (size_t t = 0; t < rewards.size(); ++t)
    CHECK(a.values[t] == rewards[t] + gamma * values[t + 1] - values[t]);
}

TEST_CASE("gae: gamma=lambda=1 telescopes to suffix returns") {
  Pcg32 rng(25);
  std::vector<double> rewards = random_vec(rng, 12, -1.0, 1.0);
  std::vector<double> values = random_vec(rng, 13, -1.0, 1.0);
  AdvantageResult a = gae(rewards, values, 1.0, 1.0);
  for (size_t t = 0; t < rewards.size(); ++t) {
    double want = values.back() - values[t];
    for (size_t l = t; l < rewards.size(); ++l) want += rewards[l];
    CHECK(a.values[t] == Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("gae validates shapes and parameter ranges") {
  CHECK_THROWS_AS(gae({1.0}, {0.0}, 0.9, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(gae({1.0}, {0.0, 0.0, 0.0}, 0.9, 0.9),
                  std::invalid_argument);
  CHECK_THROWS_AS(gae({1.0}, {0.0, 0.0}, -0.1, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(gae({1.0}, {0.0, 0.0}, 0.9, 1.1), std::invalid_argument);
  AdvantageResult a = gae({}, {0.3}, 0.9, 0.9);  // zero-length is well-formed
  CHECK(a.values.empty());
}

TEST_CASE("clipped surrogate: canonical single-position values") {
  ClipConfig cfg;  // 0.2 low, 0.28 high
  CHECK(clipped_surrogate({1.0}, {1.0}, cfg) == 1.0);
  CHECK(clipped_surrogate({2.0}, {1.0}, cfg) == 1.0 + cfg.eps_high);
  CHECK(clipped_surrogate({0.5}, {-1.0}, cfg) == -(1.0 - cfg.eps_low));
  CHECK(clipped_surrogate({0.5}, {1.0}, cfg) == 0.5);    // no upside clipping
  CHECK(clipped_surrogate({1.5}, {-2.0}, cfg) == -3.0);  // keeps the worse arm
}

TEST_CASE("clipped surrogate: the high and low ranges act independently") {
  CHECK(clipped_surrogate({1.25}, {1.0}, ClipConfig{0.2, 0.28}) == 1.25);
  CHECK(clipped_surrogate({1.25}, {1.0}, ClipConfig{0.2, 0.2}) == 1.2);
  CHECK(clipped_surrogate({0.85}, {-1.0}, ClipConfig{0.2, 0.28}) == -0.85);
  CHECK(clipped_surrogate({0.85}, {-1.0}, ClipConfig{0.1, 0.28}) == -0.9);
}

TEST_CASE("clipped surrogate averages positions and is pessimistic") {
  ClipConfig cfg;
  std::vector<double> r = {1.0, 2.0, 0.5, 0.5, 1.5};
  std::vector<double> adv = {1.0, 1.0, -1.0, 1.0, -2.0};
  double want = (1.0 + 1.28 + -0.8 + 0.5 + -3.0) / 5.0;
  CHECK(clipped_surrogate(r, adv, cfg) == Approx(want).epsilon(1e-12));

  Pcg32 rng(26);
  for (int it = 0; it < 100; ++it) {
    size_t n = 1 + rng.next_below(32);
    std::vector<double> ratios(n), advs(n);
    for (size_t i = 0; i < n; ++i) {
      ratios[i] = 0.05 + 2.5 * rng.next_double();
      advs[i] = -2.0 + 4.0 * rng.next_double();
    }
    double unclipped = 0.0;
    for (size_t i = 0; i < n; ++i) unclipped += ratios[i] * advs[i];
    unclipped /= static_cast<double>(n);
    CHECK(clipped_surrogate(ratios, advs, cfg) <= unclipped + 1e-12);

    // Ratios already inside the trust region are passed through untouched.
    std::vector<double> inside(n);
    for (size_t i = 0; i < n; ++i)
      inside[i] = 1.0 - cfg.eps_low + (cfg.eps_low + cfg.eps_high) * 0.5;
    double plain = 0.0;
    for (size_t i = 0; i < n; ++i) plain += std::min(inside[i] * advs[i],
                                                     inside[i] * advs[i]);
    plain /= static_cast<double>(n);
    CHECK(clipped_surrogate(inside, advs, cfg) == plain);
  }
}

TEST_CASE("clipped surrogate validates inputs") {
  ClipConfig cfg;
  CHECK_THROWS_AS(clipped_surrogate({1.0}, {1.0, 2.0}, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(clipped_surrogate({}, {}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(clipped_surrogate({0.0}, {1.0}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(clipped_surrogate({-0.5}, {1.0}, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(clipped_surrogate({1.0}, {1.0}, ClipConfig{1.0, 0.28}),
                  std::invalid_argument);
  CHECK_THROWS_AS(clipped_surrogate({1.0}, {1.0}, ClipConfig{-0.1, 0.28}),
                  std::invalid_argument);
}
