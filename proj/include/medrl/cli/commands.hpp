#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "medrl/cli/config.hpp"
#include "medrl/core/random.hpp"
#include "medrl/data/episode_io.hpp"
#include "medrl/rl/behavior.hpp"
#include "medrl/rl/ope.hpp"
#include "medrl/rl/policy.hpp"
#include "medrl/rl/rewards.hpp"
#include "medrl/rl/worldmodel.hpp"
#include "medrl/sim/simulator.hpp"

namespace medrl {

// ---------------------------------------------------------------------------
// Config -> component builders
// ---------------------------------------------------------------------------

inline RewardConfig reward_from_config(const ConfigMap& c) {
  RewardConfig r;
  r.a_sep = c.get_double("reward.a_sep");
  r.b_sep = c.get_double("reward.b_sep");
  r.c_sep = c.get_double("reward.c_sep");
  r.a_vent = c.get_double("reward.a_vent");
  r.b_vent = c.get_double("reward.b_vent");
  r.terminal_reward = c.get_double("reward.terminal");
  r.gamma = c.get_double("reward.gamma");
  return r;
}

inline SimConfig sim_from_config(const ConfigMap& c) {
  SimConfig sim = make_default_sim_config(c.get_string("run.schema"), c.get_u64("run.seed"));
  sim.horizon = c.get_int("sim.horizon");
  sim.miss_base = c.get_double("sim.miss_base");
  sim.miss_coupling = c.get_double("sim.miss_coupling");
  sim.process_noise = c.get_double("sim.process_noise");
  sim.obs_noise = c.get_double("sim.obs_noise");
  sim.discharge_threshold = c.get_double("sim.discharge_threshold");
  sim.death_threshold = c.get_double("sim.death_threshold");
  sim.gap_rate_base = c.get_double("sim.gap_rate_base");
  sim.gap_rate_coupling = c.get_double("sim.gap_rate_coupling");
  sim.behavior.temperature = c.get_double("sim.behavior_temperature");
  sim.reward = reward_from_config(c);
  validate_sim_config(sim);
  return sim;
}

template <typename S>
WorldModelConfig<S> worldmodel_config_from(const ConfigMap& c, int feature_dim, int action_count) {
  WorldModelConfig<S> w;
  w.feature_dim = feature_dim;
  w.action_count = action_count;
  w.embed_width = c.get_int("model.embed_width");
  w.mask_channel = c.get_bool("model.mask_channel");
  w.use_afi = c.get_string("model.encoder") == "afi";
  w.deter_dim = c.get_int("model.deter_dim");
  w.stoch_dim = c.get_int("model.stoch_dim");
  w.hidden = c.get_int("model.hidden");
  w.dyn_hidden = c.get_int("model.dyn_hidden");
  w.std_floor = c.get_double("model.std_floor");
  w.free_bits = c.get_double("model.free_bits");
  w.bucket_count = c.get_int("model.bucket_count");
  w.bucket_limit = c.get_double("model.bucket_limit");
  w.w_reward = c.get_double("model.w_reward");
  w.w_continue = c.get_double("model.w_continue");
  w.w_recon = c.get_double("model.w_recon");
  w.w_kl = c.get_double("model.w_kl");
  return w;
}

template <typename S>
typename PolicyBundle<S>::Config policy_config_from(const ConfigMap& c, int action_count, int feature_width) {
  typename PolicyBundle<S>::Config p;
  p.action_count = action_count;
  p.feature_width = feature_width;
  p.hidden = c.get_int("model.hidden");
  p.bucket_count = c.get_int("model.bucket_count");
  p.bucket_limit = c.get_double("model.bucket_limit");
  p.ema_rate = c.get_double("policy.ema_rate");
  p.entropy_coef = c.get_double("policy.entropy_coef");
  p.lambda = c.get_double("policy.lambda");
  p.gamma = c.get_double("reward.gamma");
  p.retnorm_decay = c.get_double("policy.retnorm_decay");
  return p;
}

// ---------------------------------------------------------------------------
// Deterministic artifact helpers
// ---------------------------------------------------------------------------

namespace cliio {

inline std::string artifact_path(const ConfigMap& c, const std::string& name, const std::string& ext) {
  const std::filesystem::path dir(c.get_string("run.outdir"));
  std::filesystem::create_directories(dir);
  return (dir / (name + "." + c.hash() + "." + ext)).string();
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

inline void write_run_summary(const ConfigMap& c, const std::string& command,
                              const std::vector<std::string>& overrides, const std::vector<std::string>& artifacts) {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = c.hash();
  j["overrides"] = overrides;
  j["artifacts"] = artifacts;
  nlohmann::json cfg;
  for (const auto& [k, v] : c.items()) cfg[k] = v;
  j["config"] = cfg;
  std::ofstream out(artifact_path(c, "run_summary_" + command, "json"));
  out << j.dump(2) << "\n";
}

}  // namespace cliio

// ---------------------------------------------------------------------------
// Evaluation glue: the trained agent acting through the world model
// ---------------------------------------------------------------------------

/// Runs the posterior filter over an episode's own observations and asks
/// the actor for an action at each step. Used to evaluate a trained policy
/// inside the simulator and to compute its action probabilities on logged
/// trajectories.
template <typename S>
class AgentSimPolicy : public SimPolicy {
 public:
  AgentSimPolicy(const WorldModel<S>& world, const PolicyBundle<S>& policy, bool greedy, std::uint64_t seed)
      : world_(&world), policy_(&policy), greedy_(greedy), rng_(seed) {}

  void begin_episode() override {
    belief_ = world_->initial_belief(1);
    prev_action_ = -1;
    first_time_ = std::numeric_limits<double>::quiet_NaN();
    last_seen_.assign(static_cast<std::size_t>(world_->config().feature_dim), 0.0);
  }

  int act(const SimStepView& view, Rng&) override {
    NoGradGuard guard;
    const int d = world_->config().feature_dim;
    if (std::isnan(first_time_)) {
      first_time_ = view.time;
      for (auto& t : last_seen_) t = view.time;
    }
    Mat<S> obs = Mat<S>::Zero(d, 1), mask = Mat<S>::Zero(d, 1), delta = Mat<S>::Zero(d, 1);
    const NormStats& stats = world_->stats();
    for (int f = 0; f < d; ++f) {
      delta(f, 0) = static_cast<S>(view.time - last_seen_[static_cast<std::size_t>(f)]);
      if (view.mask(f) == 1.0) {
        obs(f, 0) = static_cast<S>((view.obs(f) - stats.mean(f)) / stats.std_dev(f));
        mask(f, 0) = S(1);
        last_seen_[static_cast<std::size_t>(f)] = view.time;
      }
    }
    Tensor<S> feat = world_->encode_obs(obs, delta, mask);
    belief_ = world_->posterior_step(belief_, world_->action_onehot({prev_action_}), feat, rng_, true);
    Eigen::VectorX<S> s(world_->config().feature_width());
    s.topRows(world_->config().deter_dim) = belief_.h.value().col(0);
    s.bottomRows(world_->config().stoch_dim) = belief_.z.value().col(0);
    prev_action_ = policy_->act(s, greedy_, rng_);
    return prev_action_;
  }

 private:
  const WorldModel<S>* world_;
  const PolicyBundle<S>* policy_;
  bool greedy_;
  Rng rng_;
  LatentBelief<S> belief_;
  int prev_action_ = -1;
  double first_time_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> last_seen_;
};

/// Per-step probabilities the trained policy assigns to the logged actions
/// (softmax over latent features from a deterministic posterior replay).
template <typename S>
Eigen::VectorXd policy_probs_on_episode(const WorldModel<S>& world, const PolicyBundle<S>& policy,
                                        const Episode& episode) {
  NoGradGuard guard;
  Rng rng(0);
  const auto replay = world.replay_posterior(episode, rng, true);
  const Mat<S> probs = policy.action_probs(replay.features);
  Eigen::VectorXd out(episode.length());
  for (int t = 0; t < episode.length(); ++t) out(t) = static_cast<double>(probs(episode.steps[static_cast<std::size_t>(t)].action, t));
  return out;
}

template <typename S>
std::vector<int> policy_recommendations(const WorldModel<S>& world, const PolicyBundle<S>& policy,
                                        const Episode& episode) {
  NoGradGuard guard;
  Rng rng(0);
  const auto replay = world.replay_posterior(episode, rng, true);
  const Mat<S> logits = policy.actor_logits(replay.features).value();
  std::vector<int> out(static_cast<std::size_t>(episode.length()));
  for (int t = 0; t < episode.length(); ++t) {
    Eigen::Index best = 0;
    logits.col(t).maxCoeff(&best);
    out[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommandIO {
  std::vector<std::string> overrides;  // echoed into run summaries
  std::ostream* log = &std::cout;
};

inline int cmd_gen_synthetic(const ConfigMap& config, const CommandIO& io = {}) {
  const SimConfig sim = sim_from_config(config);
  ClinicianPolicy behavior(sim, sim.behavior);
  const int n_train = config.get_int("sim.n_train");
  const int n_test = config.get_int("sim.n_test");

  SimResult train = simulate(sim, behavior, n_train, /*seed_salt=*/1);
  SimResult test = simulate(sim, behavior, n_test, /*seed_salt=*/2);
  for (auto& ep : train.episodes.episodes) ep.id = "train-" + ep.id;
  for (auto& ep : test.episodes.episodes) ep.id = "test-" + ep.id;

  const std::string train_path = cliio::artifact_path(config, "episodes_train", "jsonl");
  const std::string test_path = cliio::artifact_path(config, "episodes_test", "jsonl");
  save_episodes(train.episodes, train_path);
  save_episodes(test.episodes, test_path);

  nlohmann::json truth;
  truth["behavior_true_value"] = train.mean_return;
  truth["behavior_value_stderr"] = train.return_stderr;
  truth["behavior_mortality"] = train.mortality;
  truth["train_censored"] = train.censored;
  truth["test_mean_return"] = test.mean_return;
  truth["test_mortality"] = test.mortality;
  truth["config_hash"] = config.hash();
  const std::string truth_path = cliio::artifact_path(config, "gen_summary", "json");
  {
    std::ofstream out(truth_path);
    out << truth.dump(2) << "\n";
  }
  cliio::write_run_summary(config, "gen-synthetic", io.overrides, {train_path, test_path, truth_path});
  *io.log << "gen-synthetic: " << n_train << " train / " << n_test << " test episodes, behavior value "
          << train.mean_return << " (mortality " << train.mortality << ")\n";
  return 0;
}

template <typename S>
int cmd_train_world_t(const ConfigMap& config, const std::string& episodes_path, const CommandIO& io) {
  const EpisodeSet data = load_episodes(episodes_path);
  if (data.episodes.empty()) throw std::runtime_error("train-world: no episodes in " + episodes_path);
  const std::string schema = config.get_string("run.schema");
  for (const auto& ep : data.episodes)
    if (ep.schema != schema)
      throw std::runtime_error("train-world: episode schema " + ep.schema + " does not match config schema " + schema);

  WorldModelConfig<S> wm_cfg = worldmodel_config_from<S>(config, data.feature_dim, action_cardinality(schema));
  NormStats stats = NormStats::fit(data.episodes, data.feature_dim);
  WorldModel<S> model(wm_cfg, stats, config.get_u64("run.seed"));

  WorldTrainConfig tc;
  tc.epochs = std::max(1, config.get_int("world.steps") /
                              std::max(1, static_cast<int>((data.episodes.size() + config.get_int("world.batch_size") - 1) /
                                                           config.get_int("world.batch_size"))));
  tc.steps_per_epoch = 0;
  tc.batch_size = config.get_int("world.batch_size");
  tc.batch_length = config.get_int("world.batch_length");
  tc.lr = config.get_double("world.lr");
  tc.clip_norm = config.get_double("world.clip_norm");
  tc.seed = config.get_u64("run.seed");
  const auto trace = model.train(data.episodes, tc);

  const std::string ckpt = cliio::artifact_path(config, "worldmodel", "ckpt");
  model.save(ckpt, config.hash());
  const std::string trace_path = cliio::artifact_path(config, "world_loss_trace", "csv");
  {
    cliio::CsvWriter csv(trace_path, {"epoch", "loss_reward", "loss_continue", "loss_recon", "loss_dynamics", "total"});
    for (const auto& row : trace)
      csv.row({std::to_string(row.epoch), cliio::fmt(row.reward), cliio::fmt(row.cont), cliio::fmt(row.recon),
               cliio::fmt(row.kl), cliio::fmt(row.total)});
  }
  cliio::write_run_summary(config, "train-world", io.overrides, {ckpt, trace_path});
  *io.log << "train-world: " << trace.size() << " epochs, final total loss "
          << (trace.empty() ? 0.0 : trace.back().total) << "\n";
  return 0;
}

struct TrainPolicyArgs {
  std::string world_ckpt;
  std::string episodes_path;
  std::string phase = "both";     // "1" | "2" | "both"
  std::string policy_in;          // phase-1 checkpoint when running phase 2 alone
  bool allow_cold_start = false;  // explicit opt-in for imagination-only training
  int tau = -1;                   // overrides policy.tau when >= 0
  int horizon = -1;               // overrides policy.horizon when >= 0
};

template <typename S>
int cmd_train_policy_t(const ConfigMap& config, const TrainPolicyArgs& args, const CommandIO& io) {
  if (args.phase != "1" && args.phase != "2" && args.phase != "both")
    throw std::invalid_argument("train-policy: --phase must be 1, 2 or both");
  if (args.phase == "2" && args.policy_in.empty() && !args.allow_cold_start)
    throw std::invalid_argument(
        "train-policy: phase 2 without a phase-1 checkpoint requires --allow-cold-start (imagination-only training)");

  const EpisodeSet data = load_episodes(args.episodes_path);
  if (data.episodes.empty()) throw std::runtime_error("train-policy: no episodes in " + args.episodes_path);
  WorldModel<S> world = WorldModel<S>::load(args.world_ckpt);
  if (world.config().feature_dim != data.feature_dim)
    throw std::runtime_error("train-policy: checkpoint feature dim does not match the episode file");

  PolicyTrainConfig pc;
  pc.real_window = config.get_int("policy.T");
  pc.imagined_suffix = args.tau >= 0 ? args.tau : config.get_int("policy.tau");
  pc.imagine_horizon = args.horizon >= 0 ? args.horizon : config.get_int("policy.horizon");
  pc.batch_size = config.get_int("policy.batch_size");
  pc.clip_norm = config.get_double("world.clip_norm");
  pc.phase2_stride = config.get_int("policy.phase2_stride");
  pc.seed = config.get_u64("run.seed");
  if (pc.imagined_suffix > pc.real_window)
    throw std::invalid_argument("train-policy: tau must not exceed the real window T");

  PolicyBundle<S> bundle = args.policy_in.empty()
                               ? PolicyBundle<S>(policy_config_from<S>(config, world.config().action_count,
                                                                       world.config().feature_width()),
                                                 config.get_u64("run.seed"))
                               : PolicyBundle<S>::load(args.policy_in);

  std::vector<std::string> artifacts;
  if (args.phase == "1" || args.phase == "both") {
    pc.steps = config.get_int("policy.steps_phase1");
    pc.lr = config.get_double("policy.lr_phase1");
    const auto trace = bundle.train_phase1(data.episodes, world, pc);
    const std::string path = cliio::artifact_path(config, "policy_trace_phase1", "csv");
    cliio::CsvWriter csv(path, {"step", "actor_loss", "critic_loss", "entropy", "mean_return_target", "mean_seq_len"});
    for (const auto& row : trace)
      csv.row({std::to_string(row.step), cliio::fmt(row.actor_loss), cliio::fmt(row.critic_loss),
               cliio::fmt(row.entropy), cliio::fmt(row.mean_return_target), cliio::fmt(row.mean_sequence_length)});
    artifacts.push_back(path);
    *io.log << "train-policy phase 1: " << trace.size() << " steps\n";
  }
  if (args.phase == "2" || args.phase == "both") {
    pc.steps = config.get_int("policy.steps_phase2");
    pc.lr = config.get_double("policy.lr_phase2");
    const auto trace = bundle.train_phase2(data.episodes, world, pc);
    const std::string path = cliio::artifact_path(config, "policy_trace_phase2", "csv");
    cliio::CsvWriter csv(path, {"step", "actor_loss", "critic_loss", "entropy", "mean_return_target", "mean_seq_len"});
    for (const auto& row : trace)
      csv.row({std::to_string(row.step), cliio::fmt(row.actor_loss), cliio::fmt(row.critic_loss),
               cliio::fmt(row.entropy), cliio::fmt(row.mean_return_target), cliio::fmt(row.mean_sequence_length)});
    artifacts.push_back(path);
    *io.log << "train-policy phase 2: " << trace.size() << " steps\n";
  }

  const std::string ckpt = cliio::artifact_path(config, "policy", "ckpt");
  bundle.save(ckpt, config.hash());
  artifacts.push_back(ckpt);
  cliio::write_run_summary(config, "train-policy", io.overrides, artifacts);
  return 0;
}

struct EvaluateArgs {
  std::string world_ckpt;
  std::string policy_ckpt;
  std::string episodes_path;
  std::string behavior_ckpt;  // optional: reuse a fitted behavior policy
  bool with_true_value = true;
};

template <typename S>
int cmd_evaluate_t(const ConfigMap& config, const EvaluateArgs& args, const CommandIO& io) {
  const EpisodeSet data = load_episodes(args.episodes_path);
  if (data.episodes.empty()) throw std::runtime_error("evaluate: no episodes in " + args.episodes_path);
  const std::string schema = config.get_string("run.schema");
  for (const auto& ep : data.episodes)
    if (ep.schema != schema)
      throw std::runtime_error("evaluate: episode schema " + ep.schema + " does not match config schema " + schema);

  WorldModel<S> world = WorldModel<S>::load(args.world_ckpt);
  PolicyBundle<S> policy = PolicyBundle<S>::load(args.policy_ckpt);
  const int action_count = world.config().action_count;

  // behavior policy: load or fit on a deterministic split of the episodes
  std::unique_ptr<BehaviorPolicy<S>> behavior;
  std::vector<std::string> artifacts;
  if (!args.behavior_ckpt.empty()) {
    behavior = std::make_unique<BehaviorPolicy<S>>(BehaviorPolicy<S>::load(args.behavior_ckpt));
  } else {
    typename BehaviorPolicy<S>::Config bc;
    bc.feature_dim = data.feature_dim;
    bc.action_count = action_count;
    bc.hidden = config.get_int("behavior.hidden");
    bc.prob_floor = config.get_double("behavior.prob_floor");
    behavior = std::make_unique<BehaviorPolicy<S>>(bc, world.stats(), config.get_u64("run.seed"));
    std::vector<Episode> train, val;
    for (std::size_t i = 0; i < data.episodes.size(); ++i)
      (i % 6 == 5 ? val : train).push_back(data.episodes[i]);
    BehaviorTrainConfig btc;
    btc.lr = config.get_double("behavior.lr");
    btc.max_epochs = config.get_int("behavior.max_epochs");
    btc.patience = config.get_int("behavior.patience");
    btc.batch_size = config.get_int("behavior.batch_size");
    btc.seed = config.get_u64("run.seed");
    const auto report = behavior->fit(train, val, btc);
    *io.log << "evaluate: behavior policy fitted, holdout accuracy " << report.holdout_accuracy << "\n";
    if (report.degenerate_actions) *io.log << "evaluate: warning: logged actions are single-class\n";
    const std::string bp_path = cliio::artifact_path(config, "behavior", "ckpt");
    behavior->save(bp_path, config.hash());
    artifacts.push_back(bp_path);
  }

  // importance ratios and estimators
  OpeConfig ope_cfg;
  ope_cfg.gamma = config.get_double("reward.gamma");
  ope_cfg.clip_lo = config.get_double("ope.clip_lo");
  ope_cfg.clip_hi = config.get_double("ope.clip_hi");
  std::vector<std::vector<double>> rewards;
  std::vector<TrajectoryRatios> ratios;
  std::vector<std::vector<int>> logged_actions, recommended;
  for (const auto& ep : data.episodes) {
    std::vector<double> r;
    std::vector<int> acts;
    for (const auto& step : ep.steps) {
      r.push_back(step.reward.value_or(0.0));
      acts.push_back(step.action);
    }
    rewards.push_back(std::move(r));
    logged_actions.push_back(std::move(acts));
    const Eigen::VectorXd pi = policy_probs_on_episode(world, policy, ep);
    const Eigen::MatrixXd pb = behavior->probs(ep);
    Eigen::VectorXd pb_logged(ep.length());
    for (int t = 0; t < ep.length(); ++t) pb_logged(t) = pb(t, ep.steps[static_cast<std::size_t>(t)].action);
    ratios.push_back(importance_ratios(pi, pb_logged, ope_cfg));
    recommended.push_back(policy_recommendations(world, policy, ep));
  }
  const OpeReport report = ope_estimates(rewards, ratios, ope_cfg);

  // outcome analyses
  const MortalityCurve curve = mortality_vs_return(data.episodes, ope_cfg.gamma, config.get_int("ope.bins"));
  const double est_mortality = curve.interpolate(report.wis);
  ActionSchema schema_obj = schema == "sepsis" ? ActionSchema::fit_sepsis({1, 2, 3, 4}, {1, 2, 3, 4})
                                               : ActionSchema::vent();
  const auto dose_rows = dose_difference_table(data.episodes, recommended, schema_obj, default_sofa_strata());
  const Eigen::VectorXd heat_logged = action_heatmap(logged_actions, action_count);
  const Eigen::VectorXd heat_policy = action_heatmap(recommended, action_count);

  // artifacts
  {
    cliio::CsvWriter csv(cliio::artifact_path(config, "ope_report", "csv"),
                         {"wis", "wpdis", "cwpdis", "ess", "n", "max_weight", "mean_weight", "clipped_fraction",
                          "estimated_mortality"});
    csv.row({cliio::fmt(report.wis), cliio::fmt(report.wpdis), cliio::fmt(report.cwpdis), cliio::fmt(report.ess),
             std::to_string(report.n_trajectories), cliio::fmt(report.max_weight), cliio::fmt(report.mean_weight),
             cliio::fmt(report.clipped_fraction), cliio::fmt(est_mortality)});
    artifacts.push_back(cliio::artifact_path(config, "ope_report", "csv"));
  }
  {
    cliio::CsvWriter csv(cliio::artifact_path(config, "mortality_vs_return", "csv"),
                         {"return_center", "mortality", "count"});
    for (const auto& bin : curve.bins)
      csv.row({cliio::fmt(bin.return_center), cliio::fmt(bin.mortality), std::to_string(bin.count)});
    artifacts.push_back(cliio::artifact_path(config, "mortality_vs_return", "csv"));
  }
  {
    cliio::CsvWriter csv(cliio::artifact_path(config, "action_heatmap", "csv"), {"action", "logged", "policy"});
    for (int a = 0; a < action_count; ++a)
      csv.row({std::to_string(a), cliio::fmt(heat_logged(a)), cliio::fmt(heat_policy(a))});
    artifacts.push_back(cliio::artifact_path(config, "action_heatmap", "csv"));
  }
  {
    cliio::CsvWriter csv(cliio::artifact_path(config, "dose_difference", "csv"),
                         {"stratum", "treatment_dim", "dose_diff", "mortality", "count"});
    for (const auto& row : dose_rows)
      csv.row({row.stratum, std::to_string(row.treatment_dim), std::to_string(row.dose_diff),
               cliio::fmt(row.mortality), std::to_string(row.count)});
    artifacts.push_back(cliio::artifact_path(config, "dose_difference", "csv"));
  }

  nlohmann::json j;
  j["wis"] = report.wis;
  j["wpdis"] = report.wpdis;
  j["cwpdis"] = report.cwpdis;
  j["ess"] = report.ess;
  j["n_trajectories"] = report.n_trajectories;
  j["max_weight"] = report.max_weight;
  j["mean_weight"] = report.mean_weight;
  j["clipped_fraction"] = report.clipped_fraction;
  j["estimated_mortality"] = est_mortality;
  j["gamma"] = ope_cfg.gamma;
  j["clip_lo"] = ope_cfg.clip_lo;
  j["clip_hi"] = ope_cfg.clip_hi;
  j["config_hash"] = config.hash();

  // ground truth from the simulator (synthetic data is the only source here)
  if (args.with_true_value) {
    const SimConfig sim = sim_from_config(config);
    AgentSimPolicy<S> agent(world, policy, /*greedy=*/true, config.get_u64("run.seed") ^ 0x7777ULL);
    const PolicyValue value = true_policy_value(sim, agent, config.get_int("eval.n_true_value"), /*seed_salt=*/77);
    j["true_value"] = value.mean;
    j["true_value_stderr"] = value.stderr;
    j["true_mortality"] = value.mortality;
    *io.log << "evaluate: true value " << value.mean << " +- " << value.stderr << ", mortality " << value.mortality
            << "\n";
  }
  const std::string summary_path = cliio::artifact_path(config, "ope_summary", "json");
  {
    std::ofstream out(summary_path);
    out << j.dump(2) << "\n";
  }
  artifacts.push_back(summary_path);
  cliio::write_run_summary(config, "evaluate", io.overrides, artifacts);
  *io.log << "evaluate: WIS " << report.wis << ", WPDIS " << report.wpdis << ", CWPDIS " << report.cwpdis << ", ESS "
          << report.ess << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Ablation driver
// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string axis;  // afi | phase | tau | horizon
  std::string episodes_train;
  std::string episodes_test;
};

template <typename S>
int cmd_ablate_t(const ConfigMap& base_config, const AblateArgs& args, const CommandIO& io) {
  struct Setting {
    std::string name;
    ConfigMap config;
    std::string phase = "both";
    bool cold_start = false;
  };
  std::vector<Setting> settings;
  auto with = [&](const std::string& name, const std::string& key, const std::string& value) {
    ConfigMap c = base_config;
    c.set(key, value);
    c.validate();
    settings.push_back({name, c});
  };
  if (args.axis == "afi") {
    with("afi", "model.encoder", "afi");
    with("no_afi", "model.encoder", "plain");
  } else if (args.axis == "tau") {
    for (int tau : {5, 10, 30, 50}) with("tau_" + std::to_string(tau), "policy.tau", std::to_string(tau));
  } else if (args.axis == "horizon") {
    for (int h : {5, 15, 25, 35}) with("H_" + std::to_string(h), "policy.horizon", std::to_string(h));
  } else if (args.axis == "phase") {
    settings.push_back({"both", base_config, "both", false});
    settings.push_back({"mdp1_only", base_config, "1", false});
    settings.push_back({"mdp2_only", base_config, "2", true});
  } else {
    throw std::invalid_argument("ablate: unknown axis " + args.axis + " (use afi|phase|tau|horizon)");
  }

  const std::string table_path = cliio::artifact_path(base_config, "ablate_" + args.axis, "csv");
  cliio::CsvWriter csv(table_path, {"setting", "wis", "wpdis", "cwpdis", "ess", "true_value", "true_mortality"});
  for (const auto& setting : settings) {
    ConfigMap c = setting.config;
    // keep artifacts of different settings apart even when the config hash
    // does not change (phase axis)
    c.set("run.outdir", base_config.get_string("run.outdir") + "/" + args.axis + "_" + setting.name);
    *io.log << "ablate[" << args.axis << "] setting " << setting.name << "\n";
    cmd_train_world_t<S>(c, args.episodes_train, io);
    TrainPolicyArgs tp;
    tp.world_ckpt = cliio::artifact_path(c, "worldmodel", "ckpt");
    tp.episodes_path = args.episodes_train;
    tp.phase = setting.phase;
    tp.allow_cold_start = setting.cold_start;
    cmd_train_policy_t<S>(c, tp, io);
    EvaluateArgs ev;
    ev.world_ckpt = tp.world_ckpt;
    ev.policy_ckpt = cliio::artifact_path(c, "policy", "ckpt");
    ev.episodes_path = args.episodes_test;
    cmd_evaluate_t<S>(c, ev, io);
    // read back the summary for the comparison table
    std::ifstream in(cliio::artifact_path(c, "ope_summary", "json"));
    nlohmann::json j;
    in >> j;
    csv.row({setting.name, cliio::fmt(j["wis"].get<double>()), cliio::fmt(j["wpdis"].get<double>()),
             cliio::fmt(j["cwpdis"].get<double>()), cliio::fmt(j["ess"].get<double>()),
             cliio::fmt(j.value("true_value", 0.0)), cliio::fmt(j.value("true_mortality", 0.0))});
  }
  cliio::write_run_summary(base_config, "ablate-" + args.axis, io.overrides, {table_path});
  return 0;
}

// ---------------------------------------------------------------------------
// Precision dispatch
// ---------------------------------------------------------------------------

template <typename Fn32, typename Fn64>
int dispatch_precision(const ConfigMap& config, Fn32&& f32, Fn64&& f64) {
  return config.get_string("run.precision") == "f64" ? f64() : f32();
}

inline int cmd_train_world(const ConfigMap& c, const std::string& episodes, const CommandIO& io = {}) {
  return dispatch_precision(c, [&] { return cmd_train_world_t<float>(c, episodes, io); },
                            [&] { return cmd_train_world_t<double>(c, episodes, io); });
}

inline int cmd_train_policy(const ConfigMap& c, const TrainPolicyArgs& args, const CommandIO& io = {}) {
  return dispatch_precision(c, [&] { return cmd_train_policy_t<float>(c, args, io); },
                            [&] { return cmd_train_policy_t<double>(c, args, io); });
}

inline int cmd_evaluate(const ConfigMap& c, const EvaluateArgs& args, const CommandIO& io = {}) {
  return dispatch_precision(c, [&] { return cmd_evaluate_t<float>(c, args, io); },
                            [&] { return cmd_evaluate_t<double>(c, args, io); });
}

inline int cmd_ablate(const ConfigMap& c, const AblateArgs& args, const CommandIO& io = {}) {
  return dispatch_precision(c, [&] { return cmd_ablate_t<float>(c, args, io); },
                            [&] { return cmd_ablate_t<double>(c, args, io); });
}

}  // namespace medrl
