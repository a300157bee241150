// Command-line front end: data generation, world-model and policy training,
// off-policy evaluation, and ablation sweeps over one shared config file.

#include <CLI11.hpp>
#include <iostream>

#include "medrl/cli/commands.hpp"

using namespace medrl;

int main(int argc, char** argv) {
  CLI::App app{"model-based offline RL for irregular clinical time series"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "config file (key = value lines)");
  app.add_option("--set", overrides, "override a config key, e.g. --set run.seed=3")->take_all();

  auto* gen = app.add_subcommand("gen-synthetic", "generate labeled synthetic episode files");

  std::string episodes_path;
  auto* train_world = app.add_subcommand("train-world", "train the latent dynamics model");
  train_world->add_option("--episodes", episodes_path, "training episode JSONL")->required();

  TrainPolicyArgs tp;
  auto* train_policy = app.add_subcommand("train-policy", "train the treatment policy in phases");
  train_policy->add_option("--world", tp.world_ckpt, "world model checkpoint")->required();
  train_policy->add_option("--episodes", tp.episodes_path, "training episode JSONL")->required();
  train_policy->add_option("--phase", tp.phase, "1, 2 or both (default both)");
  train_policy->add_option("--policy-in", tp.policy_in, "warm-start policy checkpoint");
  train_policy->add_flag("--allow-cold-start", tp.allow_cold_start,
                         "permit phase 2 without a phase-1 checkpoint");
  train_policy->add_option("--tau", tp.tau, "imagined suffix length for phase 1");
  train_policy->add_option("--horizon", tp.horizon, "imagination horizon for phase 2");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "off-policy estimates and outcome analyses");
  evaluate->add_option("--world", ev.world_ckpt, "world model checkpoint")->required();
  evaluate->add_option("--policy", ev.policy_ckpt, "policy checkpoint")->required();
  evaluate->add_option("--episodes", ev.episodes_path, "evaluation episode JSONL")->required();
  evaluate->add_option("--behavior", ev.behavior_ckpt, "reuse a fitted behavior-policy checkpoint");
  bool no_true_value = false;
  evaluate->add_flag("--no-true-value", no_true_value, "skip the simulator ground-truth value");

  AblateArgs ab;
  auto* ablate = app.add_subcommand("ablate", "comparison table along one design axis");
  ablate->add_option("--axis", ab.axis, "afi | phase | tau | horizon")->required();
  ablate->add_option("--train-episodes", ab.episodes_train, "training episode JSONL")->required();
  ablate->add_option("--test-episodes", ab.episodes_test, "evaluation episode JSONL")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigMap config = ConfigMap::resolve(config_path, overrides);
    CommandIO io;
    io.overrides = overrides;
    if (gen->parsed()) return cmd_gen_synthetic(config, io);
    if (train_world->parsed()) return cmd_train_world(config, episodes_path, io);
    if (train_policy->parsed()) return cmd_train_policy(config, tp, io);
    if (evaluate->parsed()) {
      ev.with_true_value = !no_true_value;
      return cmd_evaluate(config, ev, io);
    }
    if (ablate->parsed()) return cmd_ablate(config, ab, io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
