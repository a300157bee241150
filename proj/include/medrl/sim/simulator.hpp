#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "medrl/core/random.hpp"
#include "medrl/data/episode.hpp"
#include "medrl/rl/rewards.hpp"

namespace medrl {

/// Parameters of the stochastic clinician surrogate used to log actions:
/// per-treatment-dimension target level is an affine function of the
/// estimated severity, and levels are drawn from a discretized Gaussian
/// around the target. Depends only on observable history (the carried
/// severity proxy), so a sequence classifier can recover it.
struct BehaviorParams {
  double temperature = 0.9;
  // One gain/offset pair per treatment dimension (sepsis uses 2, vent 3).
  std::array<double, 3> gains{2.0, 1.3, 0.0};
  std::array<double, 3> offsets{0.4, 1.0, 0.0};
};

/// Ground-truth generator: linear-Gaussian latent dynamics with additive
/// per-action effects, threshold absorption on a severity scalar, and
/// severity-coupled observation timing and missingness. Feature 0 carries
/// the severity proxy (SOFA / SpO2) and feature 1 the secondary proxy
/// (lactate / MBP) so the clinical reward functions apply directly.
struct SimConfig {
  std::string schema = "sepsis";
  int latent_dim = 6;
  int feature_dim = 12;
  int horizon = 60;
  std::uint64_t seed = 0;

  Eigen::MatrixXd transition;       // m x m, spectral radius < 1
  Eigen::VectorXd drift;            // m, untreated deterioration
  Eigen::MatrixXd action_effects;   // m x A, additive effect per action id
  Eigen::VectorXd severity_weights; // m, severity = ||w .* x||_2
  Eigen::VectorXd init_mean;
  Eigen::VectorXd init_std;
  Eigen::MatrixXd obs_map;  // D x m readout for generic features

  double process_noise = 0.10;
  double obs_noise = 0.1;

  double miss_base = 0.40;      // per-feature observation probability at reference severity
  double miss_coupling = 0.6;   // dP/dSeverity multiplier (informative missingness)
  double severity_reference = 1.5;
  double gap_rate_base = 0.35;      // observation events per hour at severity 0
  double gap_rate_coupling = 1.0;   // extra rate per unit severity

  double discharge_threshold = 1.1;
  double death_threshold = 3.1;

  RewardConfig reward;
  BehaviorParams behavior;

  int action_count() const { return action_cardinality(schema); }
};

/// Sensible desk-scale defaults for either schema; matrices are derived
/// deterministically from the seed.
SimConfig make_default_sim_config(const std::string& schema, std::uint64_t seed);

/// Throws when dynamics are unstable or thresholds/probabilities are out of
/// their valid ranges.
void validate_sim_config(const SimConfig& config);

double severity(const SimConfig& config, const Eigen::VectorXd& state);

/// What a policy sees when asked for an action at one step.
struct SimStepView {
  double time = 0.0;
  const Eigen::VectorXd& obs;   // NaN where unobserved
  const Eigen::VectorXd& mask;
  const Eigen::VectorXd& latent_state;  // oracle-mode access
  double true_severity = 0.0;
};

class SimPolicy {
 public:
  virtual ~SimPolicy() = default;
  virtual void begin_episode() {}
  virtual int act(const SimStepView& view, Rng& rng) = 0;
};

class NullPolicy : public SimPolicy {
 public:
  int act(const SimStepView&, Rng&) override { return 0; }
};

class RandomPolicy : public SimPolicy {
 public:
  explicit RandomPolicy(int action_count) : action_count_(action_count) {}
  int act(const SimStepView&, Rng& rng) override { return rng.uniform_int(action_count_); }

 private:
  int action_count_;
};

/// Oracle-mode policy: picks the action minimizing the expected next-step
/// severity under the true dynamics. Uses the latent state, so it is only
/// valid as a ground-truth reference, never as a deployable agent.
class GreedySeverityPolicy : public SimPolicy {
 public:
  explicit GreedySeverityPolicy(const SimConfig& config) : config_(&config) {}
  int act(const SimStepView& view, Rng&) override;

 private:
  const SimConfig* config_;
};

/// Severity estimate implied by a carried severity-proxy observation
/// (inverse of the proxy readout; returns the reference severity when the
/// proxy has not been observed yet, signalled by NaN).
double severity_estimate_from_proxy(const SimConfig& config, double proxy_carry);

/// Action distribution of the clinician surrogate given the carried
/// severity-proxy value. Exact propensities for OPE ground truth.
Eigen::VectorXd behavior_action_probs(const SimConfig& config, double proxy_carry, const BehaviorParams& params);

/// The logging policy: stochastic clinician surrogate driven by the carried
/// severity proxy.
class ClinicianPolicy : public SimPolicy {
 public:
  ClinicianPolicy(const SimConfig& config, BehaviorParams params) : config_(&config), params_(params) {}
  void begin_episode() override { carry_ = std::numeric_limits<double>::quiet_NaN(); }
  int act(const SimStepView& view, Rng& rng) override;

  /// Replays the carry over an episode prefix and returns the exact action
  /// distribution used at each step (rows = steps, cols = actions).
  static Eigen::MatrixXd replay_probs(const SimConfig& config, const BehaviorParams& params, const Episode& episode);

 private:
  const SimConfig* config_;
  BehaviorParams params_;
  double carry_ = std::numeric_limits<double>::quiet_NaN();
};

struct SimResult {
  EpisodeSet episodes;
  std::vector<Eigen::VectorXd> true_severity;  // per episode, per step
  double mean_return = 0.0;      // discounted, reward-labeled
  double return_stderr = 0.0;
  double mortality = 0.0;        // deceased / n
  int censored = 0;
};

/// Rolls out `n` episodes under `policy`, labels rewards from the true proxy
/// series, and reports the Monte Carlo return and mortality. Deterministic
/// given (config.seed, seed_salt): episode k uses an independent stream
/// derived from them.
SimResult simulate(const SimConfig& config, SimPolicy& policy, int n, std::uint64_t seed_salt = 0);

struct PolicyValue {
  double mean = 0.0;
  double stderr = 0.0;
  double mortality = 0.0;
};

/// Monte Carlo ground-truth value of a policy (n >= 100).
PolicyValue true_policy_value(const SimConfig& config, SimPolicy& policy, int n, std::uint64_t seed_salt = 0);

}  // namespace medrl
