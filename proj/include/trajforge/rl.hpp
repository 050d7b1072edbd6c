#pragma once

#include <vector>

namespace trajforge {

// Per-trajectory (group-normalized) or per-step advantages. degenerate is
// set when every reward in the group was equal, in which case values are
// all zero rather than 0/0.
struct AdvantageResult {
  std::vector<double> values;
  bool degenerate = false;
};

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;
};

// (R_i - mean) / population std over a group of G >= 2 episode rewards.
// The per-trajectory value is broadcast to every token by the caller.
AdvantageResult grpo_advantages(const std::vector<double>& rewards);

// Reverse-recursion generalized advantage estimation:
//   delta_t = r_t + gamma*V_{t+1} - V_t,  A_t = delta_t + gamma*lam*A_{t+1}.
// values must carry one terminal bootstrap entry beyond rewards.
AdvantageResult gae(const std::vector<double>& rewards,
                    const std::vector<double>& values, double gamma,
                    double lam);

// Mean over positions of min(r*A, clip(r, 1-eps_low, 1+eps_high)*A).
double clipped_surrogate(const std::vector<double>& ratios,
                         const std::vector<double>& advantages,
                         const ClipConfig& cfg);

}  // namespace trajforge
