#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "medrl/core/random.hpp"
#include "medrl/data/episode.hpp"
#include "medrl/data/episode_io.hpp"

using namespace medrl;

namespace {

Episode make_episode(const std::string& id, int d, const std::vector<double>& times,
                     const std::vector<std::vector<double>>& masks, Outcome outcome = Outcome::kSurvived) {
  Episode ep;
  ep.id = id;
  ep.schema = "sepsis";
  ep.outcome = outcome;
  for (std::size_t t = 0; t < times.size(); ++t) {
    EpisodeStep step;
    step.time = times[t];
    step.obs = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
    step.mask = Eigen::VectorXd::Zero(d);
    for (int f = 0; f < d; ++f) {
      if (masks[t][static_cast<std::size_t>(f)] == 1.0) {
        step.mask(f) = 1.0;
        step.obs(f) = static_cast<double>(f) + 0.5 * static_cast<double>(t);
      }
    }
    step.terminal = (t + 1 == times.size()) && outcome != Outcome::kCensored;
    ep.steps.push_back(std::move(step));
  }
  return ep;
}

}  // namespace

TEST_CASE("delta recursion matches the hand-traced fixtures") {
  // p=[0,2,5], m=[1,0,1] -> delta=[0,2,5]
  auto ep = make_episode("a", 1, {0, 2, 5}, {{1}, {0}, {1}});
  Eigen::MatrixXd d = compute_deltas(ep);
  CHECK(d(0, 0) == 0.0);
  CHECK(d(1, 0) == 2.0);
  CHECK(d(2, 0) == 5.0);

  // fully observed, p=[0,4,8] -> [0,4,4]
  ep = make_episode("b", 1, {0, 4, 8}, {{1}, {1}, {1}});
  d = compute_deltas(ep);
  CHECK(d(1, 0) == 4.0);
  CHECK(d(2, 0) == 4.0);

  // never observed, p=[0,1,3] -> cumulative elapsed time [0,1,3]
  ep = make_episode("c", 1, {0, 1, 3}, {{0}, {0}, {0}});
  d = compute_deltas(ep);
  CHECK(d(1, 0) == 1.0);
  CHECK(d(2, 0) == 3.0);
}

TEST_CASE("deltas are nonnegative and equal the raw gap right after an observation") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + rng.uniform_int(8);
    const int dim = 1 + rng.uniform_int(4);
    std::vector<double> times;
    double now = 0.0;
    for (int t = 0; t < n; ++t) {
      times.push_back(now);
      now += rng.uniform(0.1, 5.0);
    }
    std::vector<std::vector<double>> masks(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& row : masks)
      for (auto& m : row) m = rng.bernoulli(0.5) ? 1.0 : 0.0;
    auto ep = make_episode("p", dim, times, masks);
    const Eigen::MatrixXd d = compute_deltas(ep);
    CHECK(d.minCoeff() >= 0.0);
    for (int t = 1; t < n; ++t)
      for (int f = 0; f < dim; ++f)
        if (ep.steps[static_cast<std::size_t>(t - 1)].mask(f) == 1.0)
          CHECK(d(t, f) == doctest::Approx(times[static_cast<std::size_t>(t)] - times[static_cast<std::size_t>(t - 1)]));
  }
}

TEST_CASE("compute_deltas rejects non-increasing timestamps") {
  auto ep = make_episode("bad", 1, {0, 2, 5}, {{1}, {1}, {1}});
  ep.steps[2].time = 2.0;
  CHECK_THROWS_AS(compute_deltas(ep), std::invalid_argument);
}

TEST_CASE("sepsis action binning follows the id formula and edge convention") {
  // nonzero training doses: quartile edges at 2.5 / 5 / 7.5 by construction
  std::vector<double> doses;
  for (int i = 1; i <= 9; ++i) doses.push_back(static_cast<double>(i) * 10.0 / 9.0 + 0.0);
  std::vector<double> iv = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<double> vaso = {2, 4, 6, 8};
  auto schema = ActionSchema::fit_sepsis(iv, vaso);

  CHECK(schema.bin_sepsis(0.0, 0.0) == 0);
  // iv dose in the top quartile, no vaso -> id 20
  CHECK(schema.bin_sepsis(9.0, 0.0) == 20);
  // a dose exactly at a quartile edge is assigned to the lower bin
  const double edge = schema.iv_edges[0];
  const int at_edge = schema.bin_sepsis(edge, 0.0);
  const int below = schema.bin_sepsis(edge - 1e-9, 0.0);
  const int above = schema.bin_sepsis(edge + 1e-9, 0.0);
  CHECK(at_edge == below);
  CHECK(above == below + 5);
  CHECK_THROWS_AS(schema.bin_sepsis(-1.0, 0.0), std::invalid_argument);
}

TEST_CASE("action binning is total and level decode inverts encode") {
  std::vector<double> iv = {1, 2, 3, 4, 5, 6, 7, 8};
  auto schema = ActionSchema::fit_sepsis(iv, iv);
  Rng rng(33);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.bernoulli(0.2) ? 0.0 : rng.uniform(0.0, 12.0);
    const double b = rng.bernoulli(0.2) ? 0.0 : rng.uniform(0.0, 12.0);
    const int id = schema.bin_sepsis(a, b);
    CHECK(id >= 0);
    CHECK(id < 25);
    auto [ivl, vl] = schema.sepsis_levels(id);
    CHECK(5 * ivl + vl == id);
  }
  for (int id = 0; id < 18; ++id) {
    auto lv = ActionSchema::vent_levels(id);
    CHECK(9 * lv[0] + 3 * lv[1] + lv[2] == id);
  }
}

TEST_CASE("ventilation binning matches the published thresholds") {
  CHECK(ActionSchema::bin_vent(5.0, 30.0, 6.0) == 0);
  CHECK(ActionSchema::bin_vent(8.0, 50.0, 8.0) == 17);
  // boundary values land in the middle bins
  CHECK(ActionSchema::bin_vent(5.0, 35.0, 6.5) == 4);
}

TEST_CASE("episode JSONL roundtrip is lossless") {
  const std::string path = (std::filesystem::temp_directory_path() / "medrl_roundtrip.jsonl").string();
  EpisodeSet set;
  set.feature_dim = 3;
  set.feature_names = {"sofa_proxy", "lactate_proxy", "f2"};
  auto ep = make_episode("ep-0", 3, {0.0, 1.5, 4.25}, {{1, 0, 1}, {0, 0, 0}, {1, 1, 0}}, Outcome::kDeceased);
  ep.steps[0].reward = -0.025;
  ep.steps[1].reward = 0.5;
  ep.steps[2].reward = -15.0;
  set.episodes.push_back(ep);
  auto single = make_episode("ep-1", 3, {2.0}, {{1, 1, 1}});
  single.steps[0].reward = 15.0;
  set.episodes.push_back(single);

  save_episodes(set, path);
  const EpisodeSet loaded = load_episodes(path);
  REQUIRE(loaded.episodes.size() == 2);
  CHECK(loaded.feature_dim == 3);
  CHECK(loaded.feature_names == set.feature_names);
  for (std::size_t i = 0; i < set.episodes.size(); ++i) {
    const auto& a = set.episodes[i];
    const auto& b = loaded.episodes[i];
    CHECK(a.id == b.id);
    CHECK(a.outcome == b.outcome);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t t = 0; t < a.steps.size(); ++t) {
      CHECK(a.steps[t].time == b.steps[t].time);
      CHECK(a.steps[t].action == b.steps[t].action);
      CHECK(a.steps[t].terminal == b.steps[t].terminal);
      CHECK((a.steps[t].mask - b.steps[t].mask).cwiseAbs().maxCoeff() == 0.0);
      CHECK(a.steps[t].reward.has_value() == b.steps[t].reward.has_value());
      if (a.steps[t].reward) CHECK(*a.steps[t].reward == *b.steps[t].reward);
      for (int f = 0; f < 3; ++f)
        if (a.steps[t].mask(f) == 1.0) CHECK(a.steps[t].obs(f) == b.steps[t].obs(f));
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("loader reports line and field for malformed records") {
  const std::string path = (std::filesystem::temp_directory_path() / "medrl_bad.jsonl").string();
  {
    std::ofstream out(path);
    out << R"({"meta": {"D": 2}})" << "\n";
    out << R"({"id": "x", "schema": "sepsis", "outcome": "survived", "steps": [{"t": 0.0, "obs": [1.0, null], "action": 30, "reward": null}]})"
        << "\n";
  }
  try {
    load_episodes(path);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("action") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("empty file loads as an empty set") {
  const std::string path = (std::filesystem::temp_directory_path() / "medrl_empty.jsonl").string();
  { std::ofstream out(path); }
  const EpisodeSet set = load_episodes(path);
  CHECK(set.episodes.empty());
  std::remove(path.c_str());
}

TEST_CASE("normalization standardizes observed entries only") {
  auto ep = make_episode("n", 2, {0, 1, 2}, {{1, 0}, {1, 1}, {0, 1}});
  ep.steps[0].obs(0) = 2.0;
  ep.steps[1].obs(0) = 6.0;
  ep.steps[1].obs(1) = 3.0;
  ep.steps[2].obs(1) = 3.0;
  NormStats stats = NormStats::fit({ep}, 2);
  CHECK(stats.mean(0) == doctest::Approx(4.0));
  CHECK(stats.std_dev(0) == doctest::Approx(2.0));
  // constant feature -> std forced to 1
  CHECK(stats.std_dev(1) == 1.0);

  const Episode norm = normalize(ep, stats);
  CHECK(norm.steps[1].obs(0) == doctest::Approx(1.0));
  CHECK(norm.steps[2].obs(1) == doctest::Approx(0.0));  // constant feature -> 0
  CHECK(std::isnan(norm.steps[0].obs(1)));              // missing entry stays missing
  CHECK((norm.steps[0].mask - ep.steps[0].mask).cwiseAbs().maxCoeff() == 0.0);

  NormStats bad;
  bad.mean = Eigen::VectorXd::Zero(5);
  bad.std_dev = Eigen::VectorXd::Ones(5);
  CHECK_THROWS_AS(normalize(ep, bad), std::invalid_argument);
}

TEST_CASE("validate_episode enforces the data-model invariants") {
  auto ok = make_episode("v", 2, {0, 1}, {{1, 1}, {0, 1}});
  CHECK_NOTHROW(validate_episode(ok, 2));
  auto bad_action = ok;
  bad_action.steps[0].action = 25;
  CHECK_THROWS_AS(validate_episode(bad_action, 2), std::invalid_argument);
  auto bad_terminal = ok;
  bad_terminal.steps[0].terminal = true;
  CHECK_THROWS_AS(validate_episode(bad_terminal, 2), std::invalid_argument);
}
