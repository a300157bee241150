#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "medrl/cli/commands.hpp"

using namespace medrl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Desk-test scale: small model, few steps, tiny episode counts.
ConfigMap tiny_config(const std::string& outdir) {
  ConfigMap c = ConfigMap::defaults();
  c.set("run.outdir", outdir);
  c.set("run.seed", "5");
  c.set("sim.n_train", "60");
  c.set("sim.n_test", "30");
  c.set("model.embed_width", "4");
  c.set("model.deter_dim", "16");
  c.set("model.stoch_dim", "4");
  c.set("model.hidden", "16");
  c.set("model.dyn_hidden", "16");
  c.set("model.bucket_count", "31");
  c.set("world.batch_size", "8");
  c.set("world.batch_length", "20");
  c.set("world.steps", "16");
  c.set("policy.steps_phase1", "3");
  c.set("policy.steps_phase2", "2");
  c.set("policy.batch_size", "4");
  c.set("policy.phase2_stride", "8");
  c.set("behavior.max_epochs", "3");
  c.set("behavior.batch_size", "16");
  c.set("eval.n_true_value", "120");
  c.validate();
  return c;
}

struct Quiet {
  std::ostringstream sink;
  CommandIO io;
  Quiet() { io.log = &sink; }
};

}  // namespace

TEST_CASE("config defaults carry the published training settings") {
  ConfigMap c = ConfigMap::defaults();
  CHECK(c.get_int("world.batch_size") == 64);
  CHECK(c.get_int("world.batch_length") == 50);
  CHECK(c.get_int("policy.T") == 50);
  CHECK(c.get_int("policy.tau") == 10);
  CHECK(c.get_int("policy.horizon") == 15);
  CHECK(c.get_int("model.hidden") == 512);
  CHECK(c.get_int("model.deter_dim") == 256);
  CHECK(c.get_int("model.stoch_dim") == 32);
  CHECK(c.get_int("model.bucket_count") == 255);
  CHECK(c.get_double("world.lr") == doctest::Approx(1e-4));
  CHECK(c.get_double("policy.lr_phase1") == doctest::Approx(1e-4));
  CHECK(c.get_double("policy.lr_phase2") == doctest::Approx(1e-5));
  CHECK(c.get_double("policy.ema_rate") == doctest::Approx(0.02));
  CHECK(c.get_double("reward.gamma") == doctest::Approx(0.99));
}

TEST_CASE("config hash tracks semantics and ignores the output directory") {
  ConfigMap a = ConfigMap::defaults();
  ConfigMap b = ConfigMap::defaults();
  CHECK(a.hash() == b.hash());
  b.set("run.outdir", "somewhere/else");
  CHECK(a.hash() == b.hash());
  b.set("run.seed", "123");
  CHECK(a.hash() != b.hash());
}

TEST_CASE("config validation guards the documented invariants") {
  ConfigMap c = ConfigMap::defaults();
  c.set("policy.tau", "51");
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.set("policy.tau", "50");  // tau == T tolerated for the sweep's top end
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(c.set("no.such.key", "1"), std::invalid_argument);
  c.set("run.schema", "surgery");
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("config files parse key = value lines with comments") {
  const std::string path = (fs::temp_directory_path() / "medrl_cfg.txt").string();
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "run.seed = 42   # trailing comment\n";
    out << "\n";
    out << "policy.tau = 7\n";
  }
  ConfigMap c = ConfigMap::resolve(path, {"reward.gamma=0.9"});
  CHECK(c.get_u64("run.seed") == 42);
  CHECK(c.get_int("policy.tau") == 7);
  CHECK(c.get_double("reward.gamma") == doctest::Approx(0.9));
  fs::remove(path);
}

TEST_CASE("gen-synthetic is byte-deterministic given seed and config") {
  const std::string dir1 = (fs::temp_directory_path() / "medrl_gen1").string();
  const std::string dir2 = (fs::temp_directory_path() / "medrl_gen2").string();
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  Quiet q1, q2;
  ConfigMap c1 = tiny_config(dir1);
  ConfigMap c2 = tiny_config(dir2);
  REQUIRE(cmd_gen_synthetic(c1, q1.io) == 0);
  REQUIRE(cmd_gen_synthetic(c2, q2.io) == 0);
  const std::string hash = c1.hash();
  CHECK(slurp(dir1 + "/episodes_train." + hash + ".jsonl") == slurp(dir2 + "/episodes_train." + hash + ".jsonl"));
  CHECK(slurp(dir1 + "/episodes_test." + hash + ".jsonl") == slurp(dir2 + "/episodes_test." + hash + ".jsonl"));
  CHECK(slurp(dir1 + "/gen_summary." + hash + ".json") == slurp(dir2 + "/gen_summary." + hash + ".json"));
  fs::remove_all(dir2);

  // the generated files parse straight back
  const EpisodeSet set = load_episodes(dir1 + "/episodes_train." + hash + ".jsonl");
  CHECK(set.episodes.size() == 60);
  for (const auto& ep : set.episodes) CHECK_NOTHROW(validate_episode(ep, set.feature_dim));
  fs::remove_all(dir1);
}

TEST_CASE("end-to-end pipeline: gen, train, evaluate, artifacts parse back") {
  const std::string dir = (fs::temp_directory_path() / "medrl_pipe").string();
  fs::remove_all(dir);
  Quiet q;
  ConfigMap c = tiny_config(dir);
  const std::string hash = c.hash();
  REQUIRE(cmd_gen_synthetic(c, q.io) == 0);
  const std::string train_path = dir + "/episodes_train." + hash + ".jsonl";
  const std::string test_path = dir + "/episodes_test." + hash + ".jsonl";

  REQUIRE(cmd_train_world(c, train_path, q.io) == 0);
  const std::string world_ckpt = dir + "/worldmodel." + hash + ".ckpt";
  CHECK(fs::exists(world_ckpt));

  TrainPolicyArgs tp;
  tp.world_ckpt = world_ckpt;
  tp.episodes_path = train_path;
  tp.phase = "both";
  REQUIRE(cmd_train_policy(c, tp, q.io) == 0);
  const std::string policy_ckpt = dir + "/policy." + hash + ".ckpt";
  CHECK(fs::exists(policy_ckpt));

  EvaluateArgs ev;
  ev.world_ckpt = world_ckpt;
  ev.policy_ckpt = policy_ckpt;
  ev.episodes_path = test_path;
  REQUIRE(cmd_evaluate(c, ev, q.io) == 0);

  // every emitted artifact parses
  std::ifstream in(dir + "/ope_summary." + hash + ".json");
  REQUIRE(in);
  nlohmann::json j;
  in >> j;
  CHECK(j.contains("wis"));
  CHECK(j.contains("true_value"));
  CHECK(std::isfinite(j["wis"].get<double>()));
  CHECK(j["ess"].get<double>() <= 30.0 + 1e-9);

  const std::string trace = slurp(dir + "/world_loss_trace." + hash + ".csv");
  CHECK(trace.find("epoch,loss_reward") == 0);
  const std::string ope_csv = slurp(dir + "/ope_report." + hash + ".csv");
  CHECK(ope_csv.find("wis,") == 0);
  CHECK(fs::exists(dir + "/mortality_vs_return." + hash + ".csv"));
  CHECK(fs::exists(dir + "/action_heatmap." + hash + ".csv"));
  CHECK(fs::exists(dir + "/dose_difference." + hash + ".csv"));
  CHECK(fs::exists(dir + "/behavior." + hash + ".ckpt"));

  // run summaries record the command and hash
  std::ifstream rs(dir + "/run_summary_evaluate." + hash + ".json");
  REQUIRE(rs);
  nlohmann::json summary;
  rs >> summary;
  CHECK(summary["config_hash"] == hash);
  fs::remove_all(dir);
}

TEST_CASE("phase 2 without a warm start requires the explicit flag") {
  const std::string dir = (fs::temp_directory_path() / "medrl_cold").string();
  fs::remove_all(dir);
  Quiet q;
  ConfigMap c = tiny_config(dir);
  const std::string hash = c.hash();
  REQUIRE(cmd_gen_synthetic(c, q.io) == 0);
  const std::string train_path = dir + "/episodes_train." + hash + ".jsonl";
  REQUIRE(cmd_train_world(c, train_path, q.io) == 0);

  TrainPolicyArgs tp;
  tp.world_ckpt = dir + "/worldmodel." + hash + ".ckpt";
  tp.episodes_path = train_path;
  tp.phase = "2";
  CHECK_THROWS_AS(cmd_train_policy(c, tp, q.io), std::invalid_argument);
  tp.allow_cold_start = true;
  CHECK(cmd_train_policy(c, tp, q.io) == 0);
  fs::remove_all(dir);
}

TEST_CASE("tau above the real window is rejected at the command layer") {
  const std::string dir = (fs::temp_directory_path() / "medrl_tau").string();
  fs::remove_all(dir);
  Quiet q;
  ConfigMap c = tiny_config(dir);
  c.set("policy.T", "6");
  const std::string hash = c.hash();
  REQUIRE(cmd_gen_synthetic(c, q.io) == 0);
  const std::string train_path = dir + "/episodes_train." + hash + ".jsonl";
  REQUIRE(cmd_train_world(c, train_path, q.io) == 0);
  TrainPolicyArgs tp;
  tp.world_ckpt = dir + "/worldmodel." + hash + ".ckpt";
  tp.episodes_path = train_path;
  tp.tau = 7;
  CHECK_THROWS_AS(cmd_train_policy(c, tp, q.io), std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("ablate sweeps the published tau axis and writes one row per setting") {
  const std::string dir = (fs::temp_directory_path() / "medrl_ablate").string();
  fs::remove_all(dir);
  Quiet q;
  ConfigMap c = tiny_config(dir);
  // keep T = 50 so tau=50 is legal, but shrink everything else further
  c.set("sim.n_train", "24");
  c.set("sim.n_test", "16");
  c.set("world.steps", "4");
  c.set("policy.steps_phase1", "1");
  c.set("policy.steps_phase2", "1");
  c.set("policy.phase2_stride", "16");
  c.set("behavior.max_epochs", "1");
  c.set("eval.n_true_value", "100");
  const std::string hash = c.hash();
  REQUIRE(cmd_gen_synthetic(c, q.io) == 0);

  AblateArgs ab;
  ab.axis = "tau";
  ab.episodes_train = dir + "/episodes_train." + hash + ".jsonl";
  ab.episodes_test = dir + "/episodes_test." + hash + ".jsonl";
  REQUIRE(cmd_ablate(c, ab, q.io) == 0);

  const std::string table = slurp(dir + "/ablate_tau." + hash + ".csv");
  CHECK(table.find("tau_5") != std::string::npos);
  CHECK(table.find("tau_10") != std::string::npos);
  CHECK(table.find("tau_30") != std::string::npos);
  CHECK(table.find("tau_50") != std::string::npos);

  AblateArgs bad = ab;
  bad.axis = "nonsense";
  CHECK_THROWS_AS(cmd_ablate(c, bad, q.io), std::invalid_argument);
  fs::remove_all(dir);
}
