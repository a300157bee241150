#include <doctest.h>

#include <cmath>

#include "medrl/core/gradcheck.hpp"
#include "medrl/rl/worldmodel.hpp"
#include "medrl/sim/simulator.hpp"

using namespace medrl;

namespace {

WorldModelConfig<double> tiny_config(int feature_dim = 3, int actions = 4) {
  WorldModelConfig<double> cfg;
  cfg.feature_dim = feature_dim;
  cfg.action_count = actions;
  cfg.embed_width = 2;
  cfg.deter_dim = 8;
  cfg.stoch_dim = 4;
  cfg.hidden = 8;
  cfg.dyn_hidden = 8;
  cfg.bucket_count = 11;
  cfg.bucket_limit = 20.0;
  return cfg;
}

NormStats unit_stats(int d) {
  NormStats stats;
  stats.mean = Eigen::VectorXd::Zero(d);
  stats.std_dev = Eigen::VectorXd::Ones(d);
  return stats;
}

// Small handmade episode with labeled rewards and partial observation.
Episode toy_episode(int steps, Outcome outcome, double seed_shift = 0.0) {
  Episode ep;
  ep.id = "toy";
  ep.schema = "sepsis";
  ep.outcome = outcome;
  Rng rng(static_cast<std::uint64_t>(91 + seed_shift));
  double now = 0.0;
  for (int t = 0; t < steps; ++t) {
    EpisodeStep step;
    step.time = now;
    now += 1.0 + rng.uniform();
    step.obs = Eigen::VectorXd::Constant(3, std::numeric_limits<double>::quiet_NaN());
    step.mask = Eigen::VectorXd::Zero(3);
    for (int f = 0; f < 3; ++f) {
      if (rng.bernoulli(0.7)) {
        step.mask(f) = 1.0;
        step.obs(f) = rng.normal() + seed_shift;
      }
    }
    if (step.mask.sum() == 0.0) {
      step.mask(0) = 1.0;
      step.obs(0) = 0.3;
    }
    step.action = rng.uniform_int(4);
    step.reward = rng.uniform(-1.0, 1.0);
    step.terminal = (t + 1 == steps) && outcome != Outcome::kCensored;
    ep.steps.push_back(std::move(step));
  }
  if (outcome != Outcome::kCensored) ep.steps.back().reward = outcome == Outcome::kSurvived ? 15.0 : -15.0;
  return ep;
}

LatentBelief<double> belief_of(const Eigen::VectorXd& mean, const Eigen::VectorXd& std_dev) {
  LatentBelief<double> b;
  b.h = Tensor<double>::constant(Mat<double>::Zero(1, 1));
  b.mean = Tensor<double>::constant(Mat<double>(mean));
  b.std_dev = Tensor<double>::constant(Mat<double>(std_dev));
  b.z = b.mean;
  return b;
}

}  // namespace

TEST_CASE("kl matches closed forms and the free-bits floor") {
  Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(1), one = Eigen::VectorXd::Ones(1);
  // identical distributions -> 0 before flooring, floor after
  auto same = kl_divergence(belief_of(mu0, one), belief_of(mu0, one), 0.0);
  CHECK(same.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
  auto floored = kl_divergence(belief_of(mu0, one), belief_of(mu0, one), 1.0);
  CHECK(floored.value()(0, 0) == doctest::Approx(1.0));
  // posterior N(1,1) against prior N(0,1): KL = mu^2 / 2 = 0.5
  Eigen::VectorXd mu1 = Eigen::VectorXd::Ones(1);
  auto shifted = kl_divergence(belief_of(mu1, one), belief_of(mu0, one), 0.0);
  CHECK(shifted.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

  Eigen::VectorXd bad = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(kl_divergence(belief_of(mu0, bad), belief_of(mu0, one), 0.0), std::domain_error);
}

TEST_CASE("kl is nonnegative over randomized parameters") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int dim = 1 + rng.uniform_int(6);
    Eigen::VectorXd mq(dim), sq(dim), mp(dim), sp(dim);
    for (int i = 0; i < dim; ++i) {
      mq(i) = rng.normal(0, 2);
      mp(i) = rng.normal(0, 2);
      sq(i) = 0.05 + rng.uniform() * 3;
      sp(i) = 0.05 + rng.uniform() * 3;
    }
    const double kl = kl_divergence(belief_of(mq, sq), belief_of(mp, sp), 0.0).value()(0, 0);
    CHECK(kl >= -1e-12);
  }
}

TEST_CASE("posterior and prior share the recurrent state and differ in conditioning") {
  auto cfg = tiny_config();
  WorldModel<double> model(cfg, unit_stats(3), 7);
  Rng rng(1);

  LatentBelief<double> prev = model.initial_belief(2);
  Mat<double> obs = Mat<double>::Zero(3, 2);
  obs(0, 0) = 1.0;
  obs(2, 1) = -0.5;
  Mat<double> mask = Mat<double>::Zero(3, 2);
  mask(0, 0) = 1.0;
  mask(2, 1) = 1.0;
  Mat<double> delta = Mat<double>::Ones(3, 2);
  auto feat = model.encode_obs(obs, delta, mask);
  const Mat<double> onehot = model.action_onehot({1, 2});

  Rng r1(42), r2(42);
  auto post = model.posterior_step(prev, onehot, feat, r1);
  auto prior = model.prior_step(prev, onehot, r2);
  // identical (z, a) inputs -> identical h
  CHECK((post.h.value() - prior.h.value()).cwiseAbs().maxCoeff() == 0.0);
  // the posterior conditions on the observation, the prior does not
  CHECK((post.mean.value() - prior.mean.value()).cwiseAbs().maxCoeff() > 1e-8);

  // deterministic mode is bit-exact across calls
  Rng r3(0), r4(99);
  auto det1 = model.posterior_step(prev, onehot, feat, r3, true);
  auto det2 = model.posterior_step(prev, onehot, feat, r4, true);
  CHECK((det1.z.value() - det2.z.value()).cwiseAbs().maxCoeff() == 0.0);

  // same seed -> identical samples
  Rng r5(7), r6(7);
  auto s1 = model.prior_step(prev, onehot, r5);
  auto s2 = model.prior_step(prev, onehot, r6);
  CHECK((s1.z.value() - s2.z.value()).cwiseAbs().maxCoeff() == 0.0);

  // different observations with identical history move the posterior mean
  Mat<double> obs2 = obs;
  obs2(0, 0) = -1.0;
  auto feat2 = model.encode_obs(obs2, delta, mask);
  Rng r7(3);
  auto post2 = model.posterior_step(prev, onehot, feat2, r7, true);
  CHECK((post.mean.value().col(0) - post2.mean.value().col(0)).cwiseAbs().maxCoeff() > 1e-9);

  CHECK_THROWS_AS(model.action_onehot({cfg.action_count}), std::invalid_argument);
}

TEST_CASE("the learned initial state enters only through the first step") {
  auto cfg = tiny_config();
  WorldModel<double> model(cfg, unit_stats(3), 7);
  Episode ep = toy_episode(5, Outcome::kSurvived);
  Rng rng(0);
  const auto before = model.replay_posterior(ep, rng, true);
  model.params().find("h0").mutable_value().setConstant(0.7);
  const auto after = model.replay_posterior(ep, rng, true);
  CHECK((before.features - after.features).cwiseAbs().maxCoeff() > 1e-9);

  // with an explicitly provided belief the h0 parameter is irrelevant
  LatentBelief<double> explicit_belief;
  explicit_belief.h = Tensor<double>::constant(Mat<double>::Ones(cfg.deter_dim, 1) * 0.1);
  explicit_belief.z = Tensor<double>::constant(Mat<double>::Zero(cfg.stoch_dim, 1));
  Rng r1(4);
  auto a = model.prior_step(explicit_belief, model.action_onehot({0}), r1, true);
  model.params().find("h0").mutable_value().setConstant(-0.3);
  Rng r2(4);
  auto b = model.prior_step(explicit_belief, model.action_onehot({0}), r2, true);
  CHECK((a.h.value() - b.h.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("head loss edge cases") {
  auto cfg = tiny_config();
  WorldModel<double> model(cfg, unit_stats(3), 3);

  // continuation logit 0 on target continue=1 -> ln 2
  auto logits = Tensor<double>::constant(Mat<double>::Zero(1, 1));
  auto loss = bernoulli_nll(logits, Mat<double>(Mat<double>::Ones(1, 1)), Mat<double>(Mat<double>::Ones(1, 1)));
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // perfect reward logits: one-hot style peak on the true bucket
  const auto& codec = model.codec();
  Mat<double> target = codec.encode(codec.centers()(5) > 0 ? symexp(codec.centers()(5)) : 0.0);
  Mat<double> peak = Mat<double>::Zero(cfg.bucket_count, 1);
  int bucket = 0;
  target.col(0).maxCoeff(&bucket);
  target.setZero();
  target(bucket, 0) = 1.0;
  peak(bucket, 0) = 50.0;
  auto ce = cross_entropy_cols(Tensor<double>::constant(peak), target, Eigen::RowVectorXd(Eigen::RowVectorXd::Ones(1)));
  CHECK(ce.item() < 1e-8);
}

TEST_CASE("fully missing steps contribute zero reconstruction loss and gradient") {
  auto cfg = tiny_config();
  WorldModel<double> model(cfg, unit_stats(3), 3);
  Episode ep = toy_episode(4, Outcome::kSurvived);
  // blank out one step entirely
  ep.steps[2].mask.setZero();
  ep.steps[2].obs.setConstant(std::numeric_limits<double>::quiet_NaN());

  Rng rng(8);
  auto batch = model.make_batch({ep}, 1, 4, rng);
  CHECK(batch.masks[2].cwiseAbs().sum() == 0.0);

  // reconstruction term sees an all-zero mask at that step; the loss value
  // is finite and the masked entries contribute exactly zero
  Rng lr(3);
  auto losses = model.window_loss(batch, lr);
  CHECK(std::isfinite(losses.recon));
}

TEST_CASE("perturbing a missing observation entry changes nothing, bitwise") {
  auto cfg = tiny_config();
  WorldModel<double> model(cfg, unit_stats(3), 12);
  Episode ep = toy_episode(5, Outcome::kDeceased);
  ep.steps[1].mask(1) = 0.0;
  ep.steps[1].obs(1) = std::numeric_limits<double>::quiet_NaN();

  Episode perturbed = ep;
  perturbed.steps[1].obs(1) = 123.456;  // planted under mask 0

  auto run = [&](const Episode& episode) {
    Rng rng(55);
    auto batch = model.make_batch({episode}, 1, 5, rng);
    model.params().zero_grad();
    Rng lr(66);
    auto losses = model.window_loss(batch, lr);
    losses.total.backward();
    std::vector<Mat<double>> grads;
    for (const auto& [name, t] : model.params().items) grads.push_back(t.grad_or_zero());
    return std::make_pair(losses.total.item(), grads);
  };

  const auto [loss_a, grads_a] = run(ep);
  const auto [loss_b, grads_b] = run(perturbed);
  CHECK(loss_a == loss_b);
  for (std::size_t i = 0; i < grads_a.size(); ++i)
    CHECK((grads_a[i] - grads_b[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full window loss passes the finite-difference gradient check") {
  auto cfg = tiny_config();
  WorldModel<double> model(cfg, unit_stats(3), 21);
  Episode ep = toy_episode(4, Outcome::kSurvived);
  Rng brng(17);
  auto batch = model.make_batch({ep}, 2, 4, brng);
  auto loss_fn = [&] {
    Rng rng(1234);  // fixed sampling stream keeps the loss deterministic
    return model.window_loss(batch, rng).total;
  };
  const double err = grad_check<double>(loss_fn, model.params().tensors());
  INFO("window loss grad error " << err);
  CHECK(err < 1e-4);
}

TEST_CASE("imagination honors contracts") {
  auto cfg = tiny_config();
  WorldModel<double> model(cfg, unit_stats(3), 9);
  Mat<double> h0 = Mat<double>::Zero(cfg.deter_dim, 3);
  Mat<double> z0 = Mat<double>::Zero(cfg.stoch_dim, 3);
  auto constant_actor = [](const Mat<double>& states) {
    return std::vector<int>(static_cast<std::size_t>(states.cols()), 1);
  };

  Rng r0(3);
  CHECK_THROWS_AS(model.imagine(h0, z0, constant_actor, 0, r0), std::invalid_argument);

  Rng r1(3);
  auto roll = model.imagine(h0, z0, constant_actor, 1, r1);
  CHECK(roll.states.size() == 1);

  Rng r2(3);
  auto roll8a = model.imagine(h0, z0, constant_actor, 8, r2);
  Rng r3(3);
  auto roll8b = model.imagine(h0, z0, constant_actor, 8, r3);
  for (int i = 0; i < 8; ++i) {
    CHECK((roll8a.states[static_cast<std::size_t>(i)] - roll8b.states[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff() == 0.0);
    // decoded rewards stay inside the codec's value range
    CHECK(roll8a.rewards[static_cast<std::size_t>(i)].minCoeff() >= model.codec().min_value() - 1e-9);
    CHECK(roll8a.rewards[static_cast<std::size_t>(i)].maxCoeff() <= model.codec().max_value() + 1e-9);
    CHECK(roll8a.continues[static_cast<std::size_t>(i)].minCoeff() >= 0.0);
    CHECK(roll8a.continues[static_cast<std::size_t>(i)].maxCoeff() <= 1.0);
  }
}

TEST_CASE("training reduces the loss on a small synthetic set") {
  SimConfig sim = make_default_sim_config("sepsis", 31);
  ClinicianPolicy policy(sim, sim.behavior);
  auto data = simulate(sim, policy, 60);

  WorldModelConfig<float> cfg;
  cfg.feature_dim = sim.feature_dim;
  cfg.action_count = sim.action_count();
  cfg.embed_width = 8;
  cfg.deter_dim = 32;
  cfg.stoch_dim = 8;
  cfg.hidden = 32;
  cfg.dyn_hidden = 32;
  cfg.bucket_count = 31;
  NormStats stats = NormStats::fit(data.episodes.episodes, sim.feature_dim);
  WorldModel<float> model(cfg, stats, 5);
  WorldTrainConfig tc;
  tc.epochs = 4;
  tc.steps_per_epoch = 12;
  tc.batch_size = 16;
  tc.batch_length = 30;
  tc.lr = 3e-4;
  tc.seed = 2;
  const auto trace = model.train(data.episodes.episodes, tc);
  REQUIRE(trace.size() == 4);
  CHECK(trace.back().total < trace.front().total);
  CHECK(std::isfinite(trace.back().total));

  CHECK_THROWS_AS(model.train({}, tc), std::invalid_argument);
}

TEST_CASE("checkpoint roundtrip preserves parameters and predictions") {
  auto cfg = tiny_config();
  WorldModel<double> model(cfg, unit_stats(3), 77);
  Episode ep = toy_episode(4, Outcome::kSurvived);
  const std::string path = "/tmp/medrl_wm_ck.bin";
  model.save(path, "meta-test");
  auto loaded = WorldModel<double>::load(path);
  Rng r1(3), r2(3);
  const auto a = model.replay_posterior(ep, r1, true);
  const auto b = loaded.replay_posterior(ep, r2, true);
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}
