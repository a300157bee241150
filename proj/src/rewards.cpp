#include "medrl/rl/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace medrl {

double sepsis_reward(double sofa_prev, double sofa_next, double lactate_prev, double lactate_next,
                     const RewardConfig& cfg) {
  const double s0 = std::round(sofa_prev);
  const double s1 = std::round(sofa_next);
  double r = 0.0;
  if (s1 == s0 && s1 > 0.0) r += cfg.a_sep;
  r += cfg.b_sep * (s1 - s0);
  r += cfg.c_sep * std::tanh(lactate_next - lactate_prev);
  return r;
}

double vent_reward(double spo2_next, double mbp_next, const RewardConfig& cfg) {
  const double spo2_term = (spo2_next >= 94.0 && spo2_next <= 98.0) ? 1.0 : -0.5;
  const double mbp_term = (mbp_next >= 70.0 && mbp_next <= 80.0) ? 1.0 : -0.5;
  return cfg.a_vent * spo2_term + cfg.b_vent * mbp_term;
}

void apply_terminal(std::vector<std::optional<double>>& rewards, Outcome outcome, const RewardConfig& cfg) {
  if (rewards.empty()) return;
  switch (outcome) {
    case Outcome::kSurvived: rewards.back() = cfg.terminal_reward; break;
    case Outcome::kDeceased: rewards.back() = -cfg.terminal_reward; break;
    case Outcome::kCensored: rewards.back() = std::nullopt; break;
  }
}

namespace {

void write_labels(Episode& episode, const Eigen::MatrixXd& proxies, const RewardConfig& cfg) {
  const int n = episode.length();
  if (proxies.rows() != n || proxies.cols() < 2)
    throw std::invalid_argument("label_rewards: proxy series must be (steps x 2)");
  const bool sepsis = episode.schema == "sepsis";
  std::vector<std::optional<double>> rewards(static_cast<std::size_t>(n));
  for (int t = 0; t + 1 < n; ++t) {
    rewards[static_cast<std::size_t>(t)] =
        sepsis ? sepsis_reward(proxies(t, 0), proxies(t + 1, 0), proxies(t, 1), proxies(t + 1, 1), cfg)
               : vent_reward(proxies(t + 1, 0), proxies(t + 1, 1), cfg);
  }
  apply_terminal(rewards, episode.outcome, cfg);
  for (int t = 0; t < n; ++t) episode.steps[static_cast<std::size_t>(t)].reward = rewards[static_cast<std::size_t>(t)];
}

}  // namespace

void label_rewards(Episode& episode, const Eigen::MatrixXd& proxies, const RewardConfig& cfg) {
  write_labels(episode, proxies, cfg);
}

void label_rewards_carry(Episode& episode, const RewardConfig& cfg) {
  const int n = episode.length();
  const int d = episode.feature_dim();
  if (cfg.severity_index < 0 || cfg.severity_index >= d || cfg.secondary_index < 0 || cfg.secondary_index >= d)
    throw std::invalid_argument("label_rewards_carry: proxy feature index out of range");
  Eigen::MatrixXd proxies(n, 2);
  double carry0 = std::numeric_limits<double>::quiet_NaN();
  double carry1 = std::numeric_limits<double>::quiet_NaN();
  for (int t = 0; t < n; ++t) {
    const auto& step = episode.steps[static_cast<std::size_t>(t)];
    if (step.mask(cfg.severity_index) == 1.0) carry0 = step.obs(cfg.severity_index);
    if (step.mask(cfg.secondary_index) == 1.0) carry1 = step.obs(cfg.secondary_index);
    const bool needed = n > 1;  // 1-step episodes take only the terminal label
    if (needed && (std::isnan(carry0) || std::isnan(carry1)))
      throw std::runtime_error("label_rewards_carry: proxy feature unobserved by step " + std::to_string(t) +
                               " in episode " + episode.id);
    proxies(t, 0) = carry0;
    proxies(t, 1) = carry1;
  }
  write_labels(episode, proxies, cfg);
}

}  // namespace medrl
