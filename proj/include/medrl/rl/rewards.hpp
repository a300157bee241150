#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "medrl/data/episode.hpp"

namespace medrl {

/// Weights of the task-specific intermittent rewards, the terminal reward
/// magnitude, the discount, and which features carry the clinical proxies
/// (SOFA/lactate for sepsis, SpO2/MBP for ventilation). The weight values
/// are configuration defaults, not published constants.
struct RewardConfig {
  double a_sep = -0.025;
  double b_sep = -0.125;
  double c_sep = -2.0;
  double a_vent = 0.5;
  double b_vent = 0.5;
  double terminal_reward = 15.0;
  double gamma = 0.99;
  int severity_index = 0;   // SOFA (sepsis) or SpO2 (vent)
  int secondary_index = 1;  // lactate (sepsis) or MBP (vent)
};

/// Sepsis intermittent reward from consecutive SOFA scores and lactate
/// levels. SOFA values are rounded to integers so the no-improvement
/// indicator is meaningful on continuous proxies.
double sepsis_reward(double sofa_prev, double sofa_next, double lactate_prev, double lactate_next,
                     const RewardConfig& cfg);

/// Ventilation intermittent reward: in-range bonus minus half-penalty for
/// SpO2 in [94, 98] and MBP in [70, 80] (closed intervals).
double vent_reward(double spo2_next, double mbp_next, const RewardConfig& cfg);

/// Replaces the final reward with +/- the terminal magnitude for completed
/// episodes; censored episodes keep the final step unlabeled. Sequence
/// length is preserved.
void apply_terminal(std::vector<std::optional<double>>& rewards, Outcome outcome, const RewardConfig& cfg);

/// Labels every step of an episode from an explicit per-step proxy series
/// (rows = steps; col 0 = SOFA or SpO2, col 1 = lactate or MBP), e.g. the
/// simulator's ground truth, then applies the terminal rule.
void label_rewards(Episode& episode, const Eigen::MatrixXd& proxies, const RewardConfig& cfg);

/// Labels from the episode's own observations using last-observed
/// carry-forward of the proxy features. Throws if a required proxy has not
/// been observed by the time it is needed.
void label_rewards_carry(Episode& episode, const RewardConfig& cfg);

}  // namespace medrl
