#include <doctest.h>

#include <cmath>
#include <set>

#include "medrl/rl/rewards.hpp"

using namespace medrl;

TEST_CASE("sepsis reward matches direct substitution") {
  RewardConfig cfg;  // defaults (-0.025, -0.125, -2)
  // unchanged positive SOFA, unchanged lactate -> only the stagnation penalty
  CHECK(sepsis_reward(5, 5, 2.0, 2.0, cfg) == doctest::Approx(-0.025));
  // SOFA 0 -> 0: the indicator is guarded by > 0
  CHECK(sepsis_reward(0, 0, 2.0, 2.0, cfg) == doctest::Approx(0.0));
  // SOFA drops by 2, lactate unchanged -> only the difference term
  CHECK(sepsis_reward(6, 4, 1.0, 1.0, cfg) == doctest::Approx(cfg.b_sep * (-2.0)));
  // lactate rise saturates through tanh
  CHECK(sepsis_reward(3, 4, 1.0, 9.0, cfg) ==
        doctest::Approx(cfg.b_sep * 1.0 + cfg.c_sep * std::tanh(8.0)));
}

TEST_CASE("sepsis reward is bounded by the weight budget") {
  RewardConfig cfg;
  const double sofa_range = 24.0;
  const double bound = std::abs(cfg.a_sep) + std::abs(cfg.b_sep) * sofa_range + std::abs(cfg.c_sep);
  for (double s0 = 0; s0 <= 24; s0 += 3)
    for (double s1 = 0; s1 <= 24; s1 += 3)
      for (double dl = -30; dl <= 30; dl += 5)
        CHECK(std::abs(sepsis_reward(s0, s1, 0.0, dl, cfg)) <= bound + 1e-12);
}

TEST_CASE("vent reward covers the closed-interval boundaries") {
  RewardConfig cfg;  // a = b = 0.5
  CHECK(vent_reward(96.0, 75.0, cfg) == doctest::Approx(1.0));
  CHECK(vent_reward(94.0, 75.0, cfg) == doctest::Approx(1.0));  // boundary in range
  CHECK(vent_reward(98.0, 70.0, cfg) == doctest::Approx(1.0));
  CHECK(vent_reward(90.0, 60.0, cfg) == doctest::Approx(-0.5));
  CHECK(vent_reward(99.0, 75.0, cfg) == doctest::Approx(0.25));
}

TEST_CASE("vent reward takes exactly the enumerated indicator values") {
  RewardConfig cfg;
  // 3 regions per vital (below / inside / above); the reward collapses each
  // out-of-range side to the same half-penalty
  const double spo2_cases[3] = {90.0, 96.0, 99.5};
  const double mbp_cases[3] = {60.0, 75.0, 90.0};
  std::set<double> seen;
  for (double s : spo2_cases)
    for (double m : mbp_cases) {
      const double r = vent_reward(s, m, cfg);
      const double s_term = (s >= 94.0 && s <= 98.0) ? 1.0 : -0.5;
      const double m_term = (m >= 70.0 && m <= 80.0) ? 1.0 : -0.5;
      CHECK(r == doctest::Approx(cfg.a_vent * s_term + cfg.b_vent * m_term));
      seen.insert(std::round(r * 1e9) / 1e9);
    }
  CHECK(seen.size() == 3);  // {1.0, 0.25, -0.5} with a = b
}

TEST_CASE("terminal reward replaces the final step only") {
  RewardConfig cfg;
  std::vector<std::optional<double>> rewards = {0.1, -0.2, 0.3};
  apply_terminal(rewards, Outcome::kSurvived, cfg);
  CHECK(rewards.size() == 3);
  CHECK(*rewards[0] == doctest::Approx(0.1));
  CHECK(*rewards[1] == doctest::Approx(-0.2));
  CHECK(*rewards[2] == doctest::Approx(15.0));

  apply_terminal(rewards, Outcome::kDeceased, cfg);
  CHECK(*rewards[2] == doctest::Approx(-15.0));

  apply_terminal(rewards, Outcome::kCensored, cfg);
  CHECK_FALSE(rewards[2].has_value());
}

namespace {

Episode proxy_episode(int n, Outcome outcome) {
  Episode ep;
  ep.id = "r";
  ep.schema = "sepsis";
  ep.outcome = outcome;
  for (int t = 0; t < n; ++t) {
    EpisodeStep step;
    step.time = t;
    step.obs = Eigen::VectorXd::Constant(2, std::numeric_limits<double>::quiet_NaN());
    step.mask = Eigen::VectorXd::Zero(2);
    step.terminal = (t + 1 == n) && outcome != Outcome::kCensored;
    ep.steps.push_back(std::move(step));
  }
  return ep;
}

}  // namespace

TEST_CASE("labeling from a proxy series fills every transition") {
  RewardConfig cfg;
  Episode ep = proxy_episode(3, Outcome::kSurvived);
  Eigen::MatrixXd proxies(3, 2);
  proxies << 6, 2.0, 6, 2.0, 4, 1.5;
  label_rewards(ep, proxies, cfg);
  CHECK(*ep.steps[0].reward == doctest::Approx(sepsis_reward(6, 6, 2.0, 2.0, cfg)));
  CHECK(*ep.steps[1].reward == doctest::Approx(sepsis_reward(6, 4, 2.0, 1.5, cfg)));
  CHECK(*ep.steps[2].reward == doctest::Approx(15.0));
}

TEST_CASE("one-step episodes carry only the terminal label") {
  RewardConfig cfg;
  Episode ep = proxy_episode(1, Outcome::kDeceased);
  Eigen::MatrixXd proxies(1, 2);
  proxies << 20, 9.0;
  label_rewards(ep, proxies, cfg);
  CHECK(*ep.steps[0].reward == doctest::Approx(-15.0));
}

TEST_CASE("carry-forward labeling uses the last observed proxies and errors when absent") {
  RewardConfig cfg;
  cfg.severity_index = 0;
  cfg.secondary_index = 1;
  Episode ep = proxy_episode(3, Outcome::kSurvived);
  ep.steps[0].obs << 6.0, 2.0;
  ep.steps[0].mask << 1, 1;
  ep.steps[2].obs(0) = 4.0;
  ep.steps[2].mask(0) = 1.0;
  label_rewards_carry(ep, cfg);
  // step 1 carries (6, 2); step 2 carries (4, 2)
  CHECK(*ep.steps[0].reward == doctest::Approx(sepsis_reward(6, 6, 2.0, 2.0, cfg)));
  CHECK(*ep.steps[1].reward == doctest::Approx(sepsis_reward(6, 4, 2.0, 2.0, cfg)));

  Episode never = proxy_episode(2, Outcome::kSurvived);
  CHECK_THROWS_AS(label_rewards_carry(never, cfg), std::runtime_error);
}
