#include "trajforge/rl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace trajforge {

AdvantageResult grpo_advantages(const std::vector<double>& rewards) {
  size_t g = rewards.size();
  if (g < 2)
    throw std::invalid_argument("grpo_advantages: need a group of >= 2, got " +
                                std::to_string(g));
  for (double r : rewards)
    if (!std::isfinite(r))
      throw std::invalid_argument("grpo_advantages: non-finite reward");

  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);

  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);  // population variance

  AdvantageResult out;
  out.values.resize(g);
  if (var == 0.0) {
    out.degenerate = true;  // all rewards equal; zeros instead of 0/0
    return out;
  }
  double std_dev = std::sqrt(var);
  for (size_t i = 0; i < g; ++i) out.values[i] = (rewards[i] - mean) / std_dev;
  return out;
}

AdvantageResult gae(const std::vector<double>& rewards,
                    const std::vector<double>& values, double gamma,
                    double lam) {
  if (values.size() != rewards.size() + 1)
    throw std::invalid_argument(
        "gae: values must have len(rewards)+1 entries, got " +
        std::to_string(values.size()) + " for " +
        std::to_string(rewards.size()) + " rewards");
  if (gamma < 0.0 || gamma > 1.0 || lam < 0.0 || lam > 1.0)
    throw std::invalid_argument("gae: gamma and lam must lie in [0, 1]");

  AdvantageResult out;
  out.values.resize(rewards.size());
  double running = 0.0;
  for (size_t t = rewards.size(); t-- > 0;) {
    double delta = rewards[t] + gamma * values[t + 1] - values[t];
    running = delta + gamma * lam * running;
    out.values[t] = running;
  }
  return out;
}

double clipped_surrogate(const std::vector<double>& ratios,
                         const std::vector<double>& advantages,
                         const ClipConfig& cfg) {
  if (ratios.size() != advantages.size())
    throw std::invalid_argument("clipped_surrogate: length mismatch");
  if (ratios.empty())
    throw std::invalid_argument("clipped_surrogate: empty input");
  if (cfg.eps_low < 0.0 || cfg.eps_high < 0.0 || 1.0 - cfg.eps_low <= 0.0)
    throw std::invalid_argument("clipped_surrogate: bad clip range");

  double total = 0.0;
  for (size_t i = 0; i < ratios.size(); ++i) {
    double r = ratios[i];
    if (!(r > 0.0))
      throw std::invalid_argument("clipped_surrogate: ratio must be > 0");
    double clipped = std::clamp(r, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
    total += std::min(r * advantages[i], clipped * advantages[i]);
  }
  return total / static_cast<double>(ratios.size());
}

}  // namespace trajforge
