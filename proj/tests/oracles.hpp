#pragma once

// Independent reference implementations used as test oracles. These are
// deliberately written as straight-line scalar code, structured differently
// from the library (per-pixel scatter instead of per-cell gather, naive
// window loops instead of integral images, no shared helpers) so that
// agreement is evidence, not tautology. Window sums are exact integers on
// both sides, which is what makes bit-level comparison of the final doubles
// meaningful.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "trajforge/image.hpp"

namespace oracle {

using trajforge::MatchConfig;
using trajforge::Thumbnail;

// Box-filter cell sums over a k x k grid, accumulated pixel by pixel: each
// pixel scatters its value times the exact overlap of its footprint with
// each cell, in units of (1/k)x(1/k) pixels. Common denominator w*h.
inline std::vector<int64_t> hash_cell_sums(const Thumbnail& t, int k) {
  std::vector<int64_t> sums(static_cast<size_t>(k) * k, 0);
  for (int py = 0; py < t.height; ++py) {
    for (int px = 0; px < t.width; ++px) {
      int64_t v = t.pixels[static_cast<size_t>(py) * t.width + px];
      for (int cy = 0; cy < k; ++cy) {
        int64_t oy = std::min<int64_t>(static_cast<int64_t>(py + 1) * k,
                                       static_cast<int64_t>(cy + 1) * t.height) -
                     std::max<int64_t>(static_cast<int64_t>(py) * k,
                                       static_cast<int64_t>(cy) * t.height);
        if (oy <= 0) continue;
        for (int cx = 0; cx < k; ++cx) {
          int64_t ox = std::min<int64_t>(static_cast<int64_t>(px + 1) * k,
                                         static_cast<int64_t>(cx + 1) * t.width) -
                       std::max<int64_t>(static_cast<int64_t>(px) * k,
                                         static_cast<int64_t>(cx) * t.width);
          if (ox <= 0) continue;
          sums[static_cast<size_t>(cy) * k + cx] += v * ox * oy;
        }
      }
    }
  }
  return sums;
}

inline std::vector<bool> mean_hash_bits(const Thumbnail& t, int k) {
  std::vector<int64_t> sums = hash_cell_sums(t, k);
  int64_t total = 0;
  for (int64_t s : sums) total += s;
  std::vector<bool> bits(sums.size());
  for (size_t i = 0; i < sums.size(); ++i)
    bits[i] = static_cast<int64_t>(sums.size()) * sums[i] > total;
  return bits;
}

// True when any cell sits exactly on the grid mean; such cells make the
// "complement flips every bit" property fail, so fuzz inputs reroll on them.
inline bool has_mean_tie(const Thumbnail& t, int k) {
  std::vector<int64_t> sums = hash_cell_sums(t, k);
  int64_t total = 0;
  for (int64_t s : sums) total += s;
  for (int64_t s : sums)
    if (static_cast<int64_t>(sums.size()) * s == total) return true;
  return false;
}

inline double hash_similarity(const Thumbnail& a, const Thumbnail& b,
                              const MatchConfig& cfg) {
  std::vector<bool> ha = mean_hash_bits(a, cfg.hash_size);
  std::vector<bool> hb = mean_hash_bits(b, cfg.hash_size);
  size_t agree = 0;
  for (size_t i = 0; i < ha.size(); ++i)
    if (ha[i] == hb[i]) ++agree;
  return static_cast<double>(agree) / static_cast<double>(ha.size());
}

// Naive SSIM: for every window position, sum the five moments with plain
// loops, then apply the standard index with population variances.
inline double ssim(const Thumbnail& a, const Thumbnail& b,
                   const MatchConfig& cfg) {
  int win = cfg.ssim_window;
  double n = static_cast<double>(win) * win;
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + win <= a.height; ++y0) {
    for (int x0 = 0; x0 + win <= a.width; ++x0) {
      int64_t sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int dy = 0; dy < win; ++dy) {
        for (int dx = 0; dx < win; ++dx) {
          int64_t va =
              a.pixels[static_cast<size_t>(y0 + dy) * a.width + (x0 + dx)];
          int64_t vb =
              b.pixels[static_cast<size_t>(y0 + dy) * b.width + (x0 + dx)];
          sx += va;
          sy += vb;
          sxx += va * va;
          syy += vb * vb;
          sxy += va * vb;
        }
      }
      double mx = static_cast<double>(sx) / n;
      double my = static_cast<double>(sy) / n;
      double vx = static_cast<double>(sxx) / n - mx * mx;
      double vy = static_cast<double>(syy) / n - my * my;
      double cov = static_cast<double>(sxy) / n - mx * my;
      double num = (2.0 * mx * my + cfg.c1) * (2.0 * cov + cfg.c2);
      double den = (mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

struct SameResult {
  bool same = false;
  std::optional<double> ssim;
};

// The library's equivalence predicate, re-derived: hash prefilter, then the
// SSIM threshold. use_prefilter=false gives the exhaustive-SSIM variant.
inline SameResult same(const Thumbnail& a, const Thumbnail& b,
                       const MatchConfig& cfg, bool use_prefilter) {
  if (use_prefilter &&
      oracle::hash_similarity(a, b, cfg) < cfg.hash_prefilter_threshold)
    return {};
  SameResult r;
  r.ssim = oracle::ssim(a, b, cfg);
  r.same = *r.ssim >= cfg.theta;
  return r;
}

struct Alg1Match {
  int failed_step;
  int teacher_step;
  double ssim;
  bool operator==(const Alg1Match&) const = default;
};

// Literal transcription of the fork-point detection algorithm over a
// (success, failed) pair of thumbnail sequences. The Same predicate is
// memoized (it is a pure function of the index pair) but evaluated exactly
// as written everywhere it appears.
inline std::vector<Alg1Match> alg1(const std::vector<Thumbnail>& succ,
                                   const std::vector<Thumbnail>& fail,
                                   const MatchConfig& cfg, bool use_prefilter) {
  int t_plus = static_cast<int>(succ.size()) - 1;
  int t_minus = static_cast<int>(fail.size()) - 1;

  std::map<std::pair<int, int>, SameResult> memo;
  auto same_at = [&](int i, int j) -> const SameResult& {
    auto it = memo.find({i, j});
    if (it == memo.end())
      it = memo.emplace(std::make_pair(i, j),
                        same(succ[i], fail[j], cfg, use_prefilter))
               .first;
    return it->second;
  };
  auto diverge_at = [&](int i, int j) {
    if (i == t_plus || j == t_minus) return true;
    return !same_at(i + 1, j + 1).same;
  };

  std::vector<Alg1Match> matches;
  int i_min = 0;
  for (int j = 0; j <= t_minus; ++j) {
    bool aligned = false;
    if (j + 1 <= t_minus) {
      for (int i = i_min; i + 1 <= t_plus; ++i) {
        if (same_at(i, j).same && same_at(i + 1, j + 1).same) {
          i_min = i + 1;
          aligned = true;
          break;
        }
      }
    }
    if (aligned) continue;

    int best_i = -1;
    double best_ssim = -2.0;
    for (int i = i_min; i <= t_plus; ++i) {
      const SameResult& s = same_at(i, j);
      if (!s.same || !diverge_at(i, j)) continue;
      if (best_i == -1 || *s.ssim > best_ssim) {
        best_i = i;
        best_ssim = *s.ssim;
      }
    }
    if (best_i != -1) {
      matches.push_back({j, best_i, best_ssim});
      i_min = best_i;
    }
  }
  return matches;
}

// Forward-sum generalized advantage estimate: A_t = sum_l (gamma*lam)^l *
// delta_{t+l}, evaluated term by term.
inline std::vector<double> gae_brute(const std::vector<double>& rewards,
                                     const std::vector<double>& values,
                                     double gamma, double lam) {
  size_t n = rewards.size();
  std::vector<double> out(n);
  for (size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (size_t l = 0; t + l < n; ++l) {
      double delta =
          rewards[t + l] + gamma * values[t + l + 1] - values[t + l];
      acc += std::pow(gamma * lam, static_cast<double>(l)) * delta;
    }
    out[t] = acc;
  }
  return out;
}

}  // namespace oracle
