#include "medrl/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace medrl {

namespace {

constexpr double kMinObsProb = 0.03;
constexpr double kMaxObsProb = 0.97;
constexpr double kMinGapHours = 0.05;
constexpr double kMaxGapHours = 8.0;

// Per-dimension level counts of the joint action grid.
std::vector<int> level_counts(const std::string& schema) {
  if (schema == "sepsis") return {5, 5};
  return {2, 3, 3};
}

std::vector<int> split_action(int action, const std::vector<int>& counts) {
  std::vector<int> levels(counts.size());
  for (int i = static_cast<int>(counts.size()) - 1; i >= 0; --i) {
    levels[static_cast<std::size_t>(i)] = action % counts[static_cast<std::size_t>(i)];
    action /= counts[static_cast<std::size_t>(i)];
  }
  return levels;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

// Per-hour transition raised to a fractional duration: diagonal decay uses
// exact powers; the weak cross-coupling scales linearly.
Eigen::MatrixXd time_scaled_transition(const Eigen::MatrixXd& hourly, double gap) {
  Eigen::MatrixXd out = hourly * gap;
  for (Eigen::Index i = 0; i < hourly.rows(); ++i) out(i, i) = std::pow(hourly(i, i), gap);
  return out;
}

// True proxy pair (severity proxy, secondary proxy) for a latent state.
std::pair<double, double> proxy_values(const SimConfig& config, const Eigen::VectorXd& x, double sev) {
  if (config.schema == "sepsis") {
    const double sofa = std::round(std::clamp(4.0 * sev, 0.0, 24.0));
    const double lactate = std::max(0.3, 1.0 + 1.2 * (sev - 1.0) + 0.4 * x(1));
    return {sofa, lactate};
  }
  const double spo2 = std::clamp(97.5 - 3.5 * (sev - 1.0), 55.0, 100.0);
  const double mbp = std::clamp(76.0 - 8.0 * (sev - 1.0) + 1.5 * x(1), 30.0, 130.0);
  return {spo2, mbp};
}

}  // namespace

double severity(const SimConfig& config, const Eigen::VectorXd& state) {
  return config.severity_weights.cwiseProduct(state).norm();
}

SimConfig make_default_sim_config(const std::string& schema, std::uint64_t seed) {
  SimConfig config;
  config.schema = schema;
  config.seed = seed;
  const int m = config.latent_dim;
  const int d = config.feature_dim;
  const int a = config.action_count();

  Rng rng(seed ^ 0x5eedc0f19ULL);

  // Stable autonomous dynamics with mild cross-coupling; the drift pushes
  // the illness dimensions toward a fixed point above the death threshold,
  // so untreated patients deteriorate.
  Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(m, m);
  trans.diagonal() << 0.96, 0.92, 0.85, 0.85, 0.85, 0.85;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j) trans(i, j) = 0.012 * rng.normal();
  config.transition = trans;

  config.drift = Eigen::VectorXd::Zero(m);
  config.drift(0) = 0.14;
  config.drift(1) = 0.07;

  config.severity_weights = Eigen::VectorXd::Zero(m);
  config.severity_weights << 1.0, 0.55, 0.95, 0.0, 0.0, 0.0;

  // Treatment pushes the illness dimensions down linearly in level while a
  // quadratic toxicity term accumulates on dimension 2, so the optimal dose
  // grows with severity instead of saturating at the maximum.
  const auto counts = level_counts(schema);
  config.action_effects = Eigen::MatrixXd::Zero(m, a);
  for (int id = 0; id < a; ++id) {
    const auto levels = split_action(id, counts);
    Eigen::VectorXd eff = Eigen::VectorXd::Zero(m);
    double tox = 0.0;
    if (schema == "sepsis") {
      eff(0) -= 0.070 * levels[0];
      eff(1) -= 0.050 * levels[1];
      eff(0) -= 0.020 * levels[1];
      tox = 0.014 * (levels[0] * levels[0] + levels[1] * levels[1]);
    } else {
      eff(0) -= 0.120 * levels[0];
      eff(0) -= 0.100 * levels[1];
      eff(1) -= 0.060 * levels[2];
      eff(0) -= 0.030 * levels[2];
      tox = 0.040 * (levels[0] * levels[0] + levels[1] * levels[1] + levels[2] * levels[2]);
    }
    eff(2) += tox;
    config.action_effects.col(id) = eff;
  }

  config.init_mean = Eigen::VectorXd::Zero(m);
  config.init_mean << 2.2, 1.0, 0.0, 0.0, 0.0, 0.0;
  config.init_std = Eigen::VectorXd::Constant(m, 0.30);
  config.init_std(0) = 0.60;
  config.init_std(1) = 0.40;

  // Generic feature readout; rows 0 and 1 are replaced by the clinical
  // proxies at observation time.
  config.obs_map = Eigen::MatrixXd::Zero(d, m);
  for (int i = 2; i < d; ++i)
    for (int j = 0; j < m; ++j) config.obs_map(i, j) = 0.8 * rng.normal();

  if (schema == "sepsis") {
    config.behavior.gains = {2.0, 1.3, 0.0};
    config.behavior.offsets = {0.4, 1.0, 0.0};
  } else {
    config.behavior.gains = {1.0, 1.0, 0.9};
    config.behavior.offsets = {1.3, 0.6, 0.9};
  }

  validate_sim_config(config);
  return config;
}

void validate_sim_config(const SimConfig& config) {
  if (config.latent_dim < 3) throw std::invalid_argument("SimConfig: latent_dim must be at least 3");
  if (config.feature_dim < 2) throw std::invalid_argument("SimConfig: feature_dim must be at least 2");
  if (config.horizon < 1) throw std::invalid_argument("SimConfig: horizon must be positive");
  if (config.transition.rows() != config.latent_dim || config.transition.cols() != config.latent_dim)
    throw std::invalid_argument("SimConfig: transition matrix shape mismatch");
  if (spectral_radius(config.transition) >= 1.0)
    throw std::invalid_argument("SimConfig: transition matrix spectral radius must be < 1");
  if (spectral_radius(time_scaled_transition(config.transition, kMaxGapHours)) >= 1.0)
    throw std::invalid_argument("SimConfig: dynamics unstable over the maximum observation gap");
  if (config.action_effects.cols() != config.action_count() || config.action_effects.rows() != config.latent_dim)
    throw std::invalid_argument("SimConfig: action_effects shape mismatch");
  if (!(config.death_threshold > config.discharge_threshold))
    throw std::invalid_argument("SimConfig: death threshold must exceed discharge threshold");
  if (config.miss_base <= 0.0 || config.miss_base >= 1.0)
    throw std::invalid_argument("SimConfig: miss_base must be in (0,1)");
  if (config.gap_rate_base <= 0.0) throw std::invalid_argument("SimConfig: gap_rate_base must be positive");
}

int GreedySeverityPolicy::act(const SimStepView& view, Rng&) {
  const SimConfig& config = *config_;
  const Eigen::VectorXd base = config.transition * view.latent_state + config.drift;
  int best = 0;
  double best_sev = std::numeric_limits<double>::infinity();
  for (int id = 0; id < config.action_count(); ++id) {
    const double sev = severity(config, base + config.action_effects.col(id));
    if (sev < best_sev) {
      best_sev = sev;
      best = id;
    }
  }
  return best;
}

double severity_estimate_from_proxy(const SimConfig& config, double proxy_carry) {
  if (std::isnan(proxy_carry)) return config.severity_reference;
  if (config.schema == "sepsis") return proxy_carry / 4.0;
  return 1.0 + (97.5 - proxy_carry) / 3.5;
}

Eigen::VectorXd behavior_action_probs(const SimConfig& config, double proxy_carry, const BehaviorParams& params) {
  const double sev_est = severity_estimate_from_proxy(config, proxy_carry);
  const auto counts = level_counts(config.schema);
  std::vector<Eigen::VectorXd> marginals;
  for (std::size_t dim = 0; dim < counts.size(); ++dim) {
    const int n_levels = counts[dim];
    const double target = params.gains[dim] * (sev_est - params.offsets[dim]);
    Eigen::VectorXd w(n_levels);
    for (int lv = 0; lv < n_levels; ++lv) {
      const double z = (lv - target) / params.temperature;
      w(lv) = std::exp(-0.5 * z * z);
    }
    w /= w.sum();
    marginals.push_back(std::move(w));
  }
  const int a = config.action_count();
  Eigen::VectorXd probs(a);
  for (int id = 0; id < a; ++id) {
    const auto levels = split_action(id, counts);
    double p = 1.0;
    for (std::size_t dim = 0; dim < counts.size(); ++dim) p *= marginals[dim](levels[dim]);
    probs(id) = p;
  }
  probs /= probs.sum();
  return probs;
}

int ClinicianPolicy::act(const SimStepView& view, Rng& rng) {
  if (view.mask(0) == 1.0) carry_ = view.obs(0);
  const Eigen::VectorXd probs = behavior_action_probs(*config_, carry_, params_);
  std::vector<double> w(probs.data(), probs.data() + probs.size());
  return rng.categorical(w);
}

Eigen::MatrixXd ClinicianPolicy::replay_probs(const SimConfig& config, const BehaviorParams& params,
                                              const Episode& episode) {
  const int n = episode.length();
  Eigen::MatrixXd probs(n, config.action_count());
  double carry = std::numeric_limits<double>::quiet_NaN();
  for (int t = 0; t < n; ++t) {
    const auto& step = episode.steps[static_cast<std::size_t>(t)];
    if (step.mask(0) == 1.0) carry = step.obs(0);
    probs.row(t) = behavior_action_probs(config, carry, params).transpose();
  }
  return probs;
}

namespace {

struct RolloutScratch {
  Episode episode;
  Eigen::MatrixXd proxies;  // steps x 2, ground truth
  Eigen::VectorXd severities;
};

RolloutScratch roll_episode(const SimConfig& config, SimPolicy& policy, Rng rng, const std::string& id) {
  const int d = config.feature_dim;
  RolloutScratch out;
  out.episode.id = id;
  out.episode.schema = config.schema;
  out.episode.outcome = Outcome::kCensored;
  std::vector<std::pair<double, double>> proxy_rows;
  std::vector<double> severity_rows;

  Eigen::VectorXd x(config.latent_dim);
  for (int i = 0; i < config.latent_dim; ++i) x(i) = rng.normal(config.init_mean(i), config.init_std(i));
  // admissions are sick but not already beyond rescue
  for (int guard = 0; guard < 64 && severity(config, x) >= config.death_threshold - 0.1; ++guard)
    x *= 0.97;

  policy.begin_episode();
  double now = 0.0;
  for (int t = 0; t < config.horizon; ++t) {
    const double sev = severity(config, x);
    const auto [proxy0, proxy1] = proxy_values(config, x, sev);
    proxy_rows.emplace_back(proxy0, proxy1);
    severity_rows.push_back(sev);

    EpisodeStep step;
    step.time = now;
    step.obs = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
    step.mask = Eigen::VectorXd::Zero(d);
    const Eigen::VectorXd generic = config.obs_map * x;
    for (int f = 0; f < d; ++f) {
      // Admission panel is fully charted; afterwards each feature is
      // sampled with a severity-coupled probability.
      double p = config.miss_base * (1.0 + config.miss_coupling * (sev - config.severity_reference));
      p = std::clamp(p, kMinObsProb, kMaxObsProb);
      const bool observed = (t == 0) || rng.bernoulli(p);
      if (!observed) continue;
      step.mask(f) = 1.0;
      if (f == 0)
        step.obs(f) = proxy0;
      else if (f == 1)
        step.obs(f) = proxy1 + config.obs_noise * 0.5 * rng.normal();
      else
        step.obs(f) = generic(f) + config.obs_noise * rng.normal();
    }

    SimStepView view{now, step.obs, step.mask, x, sev};
    step.action = policy.act(view, rng);
    if (step.action < 0 || step.action >= config.action_count())
      throw std::runtime_error("simulate: policy returned action out of range");
    out.episode.steps.push_back(std::move(step));

    if (sev <= config.discharge_threshold) {
      out.episode.outcome = Outcome::kSurvived;
      break;
    }
    if (sev >= config.death_threshold) {
      out.episode.outcome = Outcome::kDeceased;
      break;
    }
    if (t == config.horizon - 1) break;  // censored at horizon

    const int a = out.episode.steps.back().action;
    const double gap =
        std::clamp(rng.exponential(config.gap_rate_base * (1.0 + config.gap_rate_coupling * std::max(sev, 0.0))),
                   kMinGapHours, kMaxGapHours);
    // Time-scaled dynamics: the per-hour transition acts for `gap` hours,
    // drift and the held treatment accumulate linearly, and the diffusion
    // grows with sqrt(gap). Elapsed time therefore carries real signal.
    Eigen::VectorXd noise(config.latent_dim);
    for (int i = 0; i < config.latent_dim; ++i) noise(i) = config.process_noise * std::sqrt(gap) * rng.normal();
    x = time_scaled_transition(config.transition, gap) * x +
        gap * (config.drift + config.action_effects.col(a)) + noise;
    now += gap;
  }

  if (out.episode.outcome != Outcome::kCensored) out.episode.steps.back().terminal = true;
  out.proxies.resize(static_cast<Eigen::Index>(proxy_rows.size()), 2);
  out.severities.resize(static_cast<Eigen::Index>(proxy_rows.size()));
  for (std::size_t i = 0; i < proxy_rows.size(); ++i) {
    out.proxies(static_cast<Eigen::Index>(i), 0) = proxy_rows[i].first;
    out.proxies(static_cast<Eigen::Index>(i), 1) = proxy_rows[i].second;
    out.severities(static_cast<Eigen::Index>(i)) = severity_rows[i];
  }
  label_rewards(out.episode, out.proxies, config.reward);
  return out;
}

}  // namespace

SimResult simulate(const SimConfig& config, SimPolicy& policy, int n, std::uint64_t seed_salt) {
  validate_sim_config(config);
  if (n < 1) throw std::invalid_argument("simulate: n must be positive");
  SimResult result;
  result.episodes.feature_dim = config.feature_dim;
  result.episodes.feature_names.push_back(config.schema == "sepsis" ? "sofa_proxy" : "spo2_proxy");
  result.episodes.feature_names.push_back(config.schema == "sepsis" ? "lactate_proxy" : "mbp_proxy");
  for (int f = 2; f < config.feature_dim; ++f) result.episodes.feature_names.push_back("f" + std::to_string(f));

  Rng root(config.seed ^ (0xabcdef1234ULL + seed_salt));
  double sum = 0.0, sum_sq = 0.0;
  int deceased = 0, censored = 0;
  for (int k = 0; k < n; ++k) {
    Rng ep_rng = root.fork(static_cast<std::uint64_t>(k));
    auto rolled = roll_episode(config, policy, ep_rng, "sim-" + std::to_string(config.seed) + "-" + std::to_string(k));
    const double g = rolled.episode.discounted_return(config.reward.gamma);
    sum += g;
    sum_sq += g * g;
    if (rolled.episode.outcome == Outcome::kDeceased) ++deceased;
    if (rolled.episode.outcome == Outcome::kCensored) ++censored;
    result.episodes.episodes.push_back(std::move(rolled.episode));
    result.true_severity.push_back(std::move(rolled.severities));
  }
  result.mean_return = sum / n;
  const double var = std::max(0.0, sum_sq / n - result.mean_return * result.mean_return);
  result.return_stderr = std::sqrt(var / n);
  result.mortality = static_cast<double>(deceased) / n;
  result.censored = censored;
  return result;
}

PolicyValue true_policy_value(const SimConfig& config, SimPolicy& policy, int n, std::uint64_t seed_salt) {
  if (n < 100) throw std::invalid_argument("true_policy_value: n must be at least 100");
  const SimResult result = simulate(config, policy, n, seed_salt);
  return {result.mean_return, result.return_stderr, result.mortality};
}

}  // namespace medrl
