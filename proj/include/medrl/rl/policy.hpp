#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "medrl/core/adam.hpp"
#include "medrl/core/checkpoint.hpp"
#include "medrl/core/codec.hpp"
#include "medrl/rl/nn.hpp"
#include "medrl/rl/worldmodel.hpp"

namespace medrl {

/// Bootstrapped lambda-returns by backward recursion:
///   R_t = r_t + gamma * c_t * ((1 - lambda) * v_t + lambda * R_{t+1}),
/// with R at the end anchored to `bootstrap`. Callers align the inputs so
/// r_t / c_t / v_t describe the successor of the state being targeted.
inline std::vector<double> lambda_returns(const std::vector<double>& rewards, const std::vector<double>& continues,
                                          const std::vector<double>& values, double lambda, double gamma,
                                          double bootstrap) {
  if (rewards.size() != continues.size() || rewards.size() != values.size())
    throw std::invalid_argument("lambda_returns: sequence lengths disagree");
  if (lambda < 0.0 || lambda > 1.0 || gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("lambda_returns: lambda and gamma must lie in [0, 1]");
  std::vector<double> out(rewards.size());
  double next = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    const double gt = gamma * continues[i];
    out[i] = rewards[i] + gt * ((1.0 - lambda) * values[i] + lambda * next);
    next = out[i];
  }
  return out;
}

struct PolicyTrainConfig {
  int real_window = 50;      // T
  int imagined_suffix = 10;  // tau (phase 1)
  int imagine_horizon = 15;  // H (phase 2)
  int steps = 600;
  int batch_size = 16;
  double lr = 1e-4;
  double clip_norm = 100.0;
  int phase2_stride = 1;
  std::uint64_t seed = 0;
};

struct PolicyTraceRow {
  int step = 0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double mean_return_target = 0.0;
  double mean_sequence_length = 0.0;
};

/// Actor (softmax over treatments) and distributional critic over latent
/// features, with an EMA target critic for stable bootstrap values. Trains
/// in two phases: hybrid real-prefix / imagined-suffix sequences, then pure
/// long-horizon imagination.
template <typename S>
class PolicyBundle {
 public:
  struct Config {
    int action_count = 0;
    int feature_width = 0;
    int hidden = 512;
    int bucket_count = 255;
    double bucket_limit = 20.0;
    double ema_rate = 0.02;
    double entropy_coef = 3e-4;
    double lambda = 0.95;
    double gamma = 0.99;
    double retnorm_decay = 0.99;
  };

  PolicyBundle(Config config, std::uint64_t seed)
      : config_(config), codec_(config.bucket_count, static_cast<S>(config.bucket_limit)) {
    if (config_.action_count <= 0 || config_.feature_width <= 0)
      throw std::invalid_argument("PolicyBundle: action_count and feature_width must be positive");
    if (config_.ema_rate <= 0.0 || config_.ema_rate > 1.0)
      throw std::invalid_argument("PolicyBundle: ema_rate must be in (0, 1]");
    Rng rng(seed ^ 0xac7051feULL);
    actor_ = Mlp<S>::init(config_.feature_width, config_.hidden, 2, config_.action_count, rng, actor_params_, "actor");
    critic_ = Mlp<S>::init(config_.feature_width, config_.hidden, 2, config_.bucket_count, rng, critic_params_, "critic");
    Rng dummy(0);
    target_critic_ = Mlp<S>::init(config_.feature_width, config_.hidden, 2, config_.bucket_count, dummy,
                                  target_params_, "critic");
    sync_target();
  }

  const Config& config() const { return config_; }
  ParamMap<S>& actor_params() { return actor_params_; }
  ParamMap<S>& critic_params() { return critic_params_; }
  const ParamMap<S>& target_params() const { return target_params_; }

  // -- acting ----------------------------------------------------------------

  Tensor<S> actor_logits(const Mat<S>& states) const { return actor_(Tensor<S>::constant(states)); }

  Mat<S> action_probs(const Mat<S>& states) const {
    NoGradGuard guard;
    return detail::softmax_cols_value<S>(actor_(Tensor<S>::constant(states)).value());
  }

  /// Greedy mode returns the argmax logit (ties favor the lowest id);
  /// sample mode draws from the softmax.
  int act(const Eigen::VectorX<S>& features, bool greedy, Rng& rng) const {
    NoGradGuard guard;
    Mat<S> logits = actor_(Tensor<S>::constant(Mat<S>(features))).value();
    if (greedy) {
      Eigen::Index best = 0;
      logits.col(0).maxCoeff(&best);
      return static_cast<int>(best);
    }
    Mat<S> probs = detail::softmax_cols_value<S>(logits);
    std::vector<double> w(probs.rows());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) w[static_cast<std::size_t>(i)] = static_cast<double>(probs(i, 0));
    return rng.categorical(w);
  }

  std::vector<int> sample_actions(const Mat<S>& states, Rng& rng) const {
    NoGradGuard guard;
    Mat<S> probs = action_probs(states);
    std::vector<int> out(static_cast<std::size_t>(states.cols()));
    for (Eigen::Index b = 0; b < states.cols(); ++b) {
      std::vector<double> w(probs.rows());
      for (Eigen::Index i = 0; i < probs.rows(); ++i) w[static_cast<std::size_t>(i)] = static_cast<double>(probs(i, b));
      out[static_cast<std::size_t>(b)] = rng.categorical(w);
    }
    return out;
  }

  // -- values ------------------------------------------------------------------

  /// Decoded expected return under the critic's two-hot distribution.
  Eigen::RowVectorXd values(const Mat<S>& states, bool use_target) const {
    NoGradGuard guard;
    const Mat<S> logits = (use_target ? target_critic_ : critic_)(Tensor<S>::constant(states)).value();
    Eigen::RowVectorXd out(logits.cols());
    for (Eigen::Index b = 0; b < logits.cols(); ++b)
      out(b) = static_cast<double>(codec_.decode_logits(logits.col(b)));
    return out;
  }

  // -- losses ------------------------------------------------------------------

  /// REINFORCE with a learned baseline: -sum_i adv_i * log pi(a_i | s_i)
  /// minus an entropy bonus, averaged over items. Advantages arrive as
  /// constants; no gradient flows through them or into the states.
  Tensor<S> actor_loss(const Mat<S>& states, const std::vector<int>& actions,
                       const std::vector<double>& advantages) const {
    const auto n = static_cast<Eigen::Index>(actions.size());
    if (states.cols() != n || advantages.size() != actions.size())
      throw std::invalid_argument("actor_loss: batch sizes disagree");
    Tensor<S> logits = actor_(Tensor<S>::constant(states));
    Mat<S> weighted = Mat<S>::Zero(config_.action_count, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = actions[static_cast<std::size_t>(i)];
      if (a < 0 || a >= config_.action_count) throw std::invalid_argument("actor_loss: action id out of range");
      weighted(a, i) = static_cast<S>(advantages[static_cast<std::size_t>(i)]);
    }
    Tensor<S> log_probs = log_softmax_cols(logits);
    Tensor<S> pg = affine(sum(mul(log_probs, Tensor<S>::constant(std::move(weighted)))), S(-1), S(0));
    Tensor<S> entropy = sum(entropy_cols(logits));
    Tensor<S> loss = sub(pg, affine(entropy, static_cast<S>(config_.entropy_coef), S(0)));
    return affine(loss, S(1) / static_cast<S>(n), S(0));
  }

  /// Cross-entropy of the critic's return distribution against two-hot
  /// encoded symlog targets, averaged over items.
  Tensor<S> critic_loss(const Mat<S>& states, const std::vector<double>& targets) const {
    const auto n = static_cast<Eigen::Index>(targets.size());
    if (states.cols() != n) throw std::invalid_argument("critic_loss: batch sizes disagree");
    Mat<S> tgt(config_.bucket_count, n);
    for (Eigen::Index i = 0; i < n; ++i) tgt.col(i) = codec_.encode(static_cast<S>(targets[static_cast<std::size_t>(i)]));
    Tensor<S> logits = critic_(Tensor<S>::constant(states));
    Tensor<S> ce = cross_entropy_cols(logits, tgt, Eigen::RowVectorX<S>::Ones(n).eval());
    return affine(ce, S(1) / static_cast<S>(n), S(0));
  }

  /// EMA update of the target critic toward the live critic.
  void ema_update() {
    const S rate = static_cast<S>(config_.ema_rate);
    for (std::size_t i = 0; i < critic_params_.items.size(); ++i) {
      auto& tgt = target_params_.items[i].second;
      tgt.mutable_value() = (S(1) - rate) * tgt.value() + rate * critic_params_.items[i].second.value();
    }
  }

  void sync_target() {
    for (std::size_t i = 0; i < critic_params_.items.size(); ++i)
      target_params_.items[i].second.mutable_value() = critic_params_.items[i].second.value();
  }

  // -- phase training ------------------------------------------------------------

  /// Phase 1: posterior states over logged windows with the logged actions,
  /// an imagined suffix from each sequence end, and actor/critic updates on
  /// the full hybrid sequence. Rewards and continues for every step come
  /// from the world model's heads.
  std::vector<PolicyTraceRow> train_phase1(const std::vector<Episode>& episodes, const WorldModel<S>& world,
                                           const PolicyTrainConfig& cfg) {
    return train_common(episodes, world, cfg, /*phase2=*/false);
  }

  /// Phase 2: from every phase2_stride-th posterior state, roll the world
  /// model `imagine_horizon` steps with the current actor and train on the
  /// imagined sequences alone.
  std::vector<PolicyTraceRow> train_phase2(const std::vector<Episode>& episodes, const WorldModel<S>& world,
                                           const PolicyTrainConfig& cfg) {
    return train_common(episodes, world, cfg, /*phase2=*/true);
  }

  /// Number of loss terms built from logged (clinician) actions in the most
  /// recent training run; phase 2 must report zero.
  long logged_action_terms() const { return logged_action_terms_; }

  double return_scale() const { return retnorm_scale_; }

  // -- persistence ------------------------------------------------------------

  void save(const std::string& path, const std::string& meta = "") const {
    Checkpoint ck;
    ck.put("cfg", (Eigen::MatrixXd(10, 1) << config_.action_count, config_.feature_width, config_.hidden,
                   config_.bucket_count, config_.bucket_limit, config_.ema_rate, config_.entropy_coef, config_.lambda,
                   config_.gamma, config_.retnorm_decay)
                      .finished());
    ck.put("retnorm", (Eigen::MatrixXd(2, 1) << retnorm_scale_, retnorm_init_ ? 1.0 : 0.0).finished());
    ck.put_params(actor_params_, "actor/");
    ck.put_params(critic_params_, "critic/");
    ck.put_params(target_params_, "target/");
    ck.meta = meta;
    ck.save(path);
  }

  static PolicyBundle load(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    const Eigen::MatrixXd cfg_mat = ck.get("cfg");
    Config config;
    config.action_count = static_cast<int>(cfg_mat(0));
    config.feature_width = static_cast<int>(cfg_mat(1));
    config.hidden = static_cast<int>(cfg_mat(2));
    config.bucket_count = static_cast<int>(cfg_mat(3));
    config.bucket_limit = cfg_mat(4);
    config.ema_rate = cfg_mat(5);
    config.entropy_coef = cfg_mat(6);
    config.lambda = cfg_mat(7);
    config.gamma = cfg_mat(8);
    config.retnorm_decay = cfg_mat(9);
    PolicyBundle bundle(config, 0);
    ck.load_params(bundle.actor_params_, "actor/");
    ck.load_params(bundle.critic_params_, "critic/");
    ck.load_params(bundle.target_params_, "target/");
    const Eigen::MatrixXd rn = ck.get("retnorm");
    bundle.retnorm_scale_ = rn(0);
    bundle.retnorm_init_ = rn(1) != 0.0;
    return bundle;
  }

 private:
  // One flattened training item: a state column with the action taken
  // there, its lambda-return target, and the baseline value.
  struct Items {
    std::vector<Eigen::VectorX<S>> states;
    std::vector<int> actions;
    std::vector<double> returns;
    std::vector<double> baselines;
  };

  std::vector<PolicyTraceRow> train_common(const std::vector<Episode>& episodes, const WorldModel<S>& world,
                                           const PolicyTrainConfig& cfg, bool phase2) {
    if (episodes.empty()) throw std::invalid_argument("PolicyBundle: empty dataset");
    if (world.config().feature_width() != config_.feature_width)
      throw std::invalid_argument("PolicyBundle: feature width disagrees with the world model");
    Rng rng(cfg.seed ^ (phase2 ? 0xfade2222ULL : 0xfade1111ULL));
    typename AdamOptimizer<S>::Options actor_opts{static_cast<S>(cfg.lr), S(0.9), S(0.999), S(1e-8),
                                                  static_cast<S>(cfg.clip_norm)};
    typename AdamOptimizer<S>::Options critic_opts = actor_opts;
    AdamOptimizer<S> actor_opt(actor_params_.tensors(), actor_opts);
    AdamOptimizer<S> critic_opt(critic_params_.tensors(), critic_opts);
    logged_action_terms_ = 0;

    std::vector<PolicyTraceRow> trace;
    for (int step = 0; step < cfg.steps; ++step) {
      WindowBatch<S> batch = world.make_batch(episodes, cfg.batch_size, cfg.real_window, rng);
      const auto roll = posterior_roll(world, batch, rng);
      Items items;
      double seq_len_sum = 0.0;
      int seq_count = 0;
      if (!phase2) {
        build_phase1_items(world, batch, roll, cfg, rng, items, seq_len_sum, seq_count);
      } else {
        build_phase2_items(world, batch, roll, cfg, rng, items, seq_len_sum, seq_count);
      }
      if (items.actions.empty()) continue;

      // return normalization: EMA of the 5th-95th percentile spread
      std::vector<double> sorted = items.returns;
      std::sort(sorted.begin(), sorted.end());
      const double p5 = sorted[static_cast<std::size_t>(0.05 * (sorted.size() - 1))];
      const double p95 = sorted[static_cast<std::size_t>(0.95 * (sorted.size() - 1))];
      const double range = p95 - p5;
      retnorm_scale_ = retnorm_init_ ? config_.retnorm_decay * retnorm_scale_ + (1.0 - config_.retnorm_decay) * range
                                     : range;
      retnorm_init_ = true;
      const double scale = std::max(1.0, retnorm_scale_);

      Mat<S> states(config_.feature_width, static_cast<Eigen::Index>(items.states.size()));
      for (std::size_t i = 0; i < items.states.size(); ++i) states.col(static_cast<Eigen::Index>(i)) = items.states[i];
      std::vector<double> advantages(items.returns.size());
      double mean_ret = 0.0;
      for (std::size_t i = 0; i < items.returns.size(); ++i) {
        advantages[i] = (items.returns[i] - items.baselines[i]) / scale;
        mean_ret += items.returns[i];
      }
      mean_ret /= static_cast<double>(items.returns.size());

      actor_params_.zero_grad();
      Tensor<S> a_loss = actor_loss(states, items.actions, advantages);
      a_loss.backward();
      actor_opt.step();

      critic_params_.zero_grad();
      Tensor<S> c_loss = critic_loss(states, items.returns);
      c_loss.backward();
      critic_opt.step();
      ema_update();

      PolicyTraceRow row;
      row.step = step;
      row.actor_loss = static_cast<double>(a_loss.item());
      row.critic_loss = static_cast<double>(c_loss.item());
      {
        NoGradGuard guard;
        row.entropy = static_cast<double>(entropy_cols(actor_(Tensor<S>::constant(states))).value().mean());
      }
      row.mean_return_target = mean_ret;
      row.mean_sequence_length = seq_count ? seq_len_sum / seq_count : 0.0;
      trace.push_back(row);
    }
    return trace;
  }

  struct RolledStates {
    std::vector<Mat<S>> h, z;  // per step, deter x B / stoch x B
  };

  RolledStates posterior_roll(const WorldModel<S>& world, const WindowBatch<S>& batch, Rng& rng) const {
    NoGradGuard guard;
    RolledStates out;
    LatentBelief<S> belief = world.initial_belief(batch.batch);
    for (int t = 0; t < batch.window; ++t) {
      Tensor<S> obs_feat = world.encode_obs(batch.obs[static_cast<std::size_t>(t)],
                                            batch.deltas[static_cast<std::size_t>(t)],
                                            batch.masks[static_cast<std::size_t>(t)]);
      belief = world.posterior_step(belief, batch.prev_action[static_cast<std::size_t>(t)], obs_feat, rng, false);
      out.h.push_back(belief.h.value());
      out.z.push_back(belief.z.value());
    }
    return out;
  }

  std::function<std::vector<int>(const Mat<S>&)> imagination_actor(Rng& rng) {
    return [this, &rng](const Mat<S>& states) { return sample_actions(states, rng); };
  }

  void build_phase1_items(const WorldModel<S>& world, const WindowBatch<S>& batch, const RolledStates& roll,
                          const PolicyTrainConfig& cfg, Rng& rng, Items& items, double& seq_len_sum,
                          int& seq_count) {
    NoGradGuard guard;
    const int deter = world.config().deter_dim;
    const int stoch = world.config().stoch_dim;
    const int width = config_.feature_width;

    // per-column sequences: real posterior states followed by tau imagined
    std::vector<std::vector<Eigen::VectorX<S>>> seq_states(static_cast<std::size_t>(batch.batch));
    std::vector<std::vector<int>> seq_actions(static_cast<std::size_t>(batch.batch));
    std::vector<std::vector<bool>> seq_logged(static_cast<std::size_t>(batch.batch));
    for (int b = 0; b < batch.batch; ++b) {
      for (int t = 0; t < batch.length[static_cast<std::size_t>(b)]; ++t) {
        Eigen::VectorX<S> s(width);
        s.topRows(deter) = roll.h[static_cast<std::size_t>(t)].col(b);
        s.bottomRows(stoch) = roll.z[static_cast<std::size_t>(t)].col(b);
        seq_states[static_cast<std::size_t>(b)].push_back(std::move(s));
        seq_actions[static_cast<std::size_t>(b)].push_back(batch.action_id[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)]);
        seq_logged[static_cast<std::size_t>(b)].push_back(true);
      }
    }
    if (cfg.imagined_suffix > 0) {
      Mat<S> h_last(deter, batch.batch), z_last(stoch, batch.batch);
      for (int b = 0; b < batch.batch; ++b) {
        const int last = std::max(0, batch.length[static_cast<std::size_t>(b)] - 1);
        h_last.col(b) = roll.h[static_cast<std::size_t>(last)].col(b);
        z_last.col(b) = roll.z[static_cast<std::size_t>(last)].col(b);
      }
      const ImaginedRollout<S> rollout = world.imagine(h_last, z_last, imagination_actor(rng), cfg.imagined_suffix, rng);
      for (int i = 0; i < cfg.imagined_suffix; ++i) {
        for (int b = 0; b < batch.batch; ++b) {
          // the sampled action extends the PREVIOUS state's record
          if (i > 0) {
            seq_actions[static_cast<std::size_t>(b)].push_back(rollout.actions[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)]);
            seq_logged[static_cast<std::size_t>(b)].push_back(false);
          }
          seq_states[static_cast<std::size_t>(b)].push_back(rollout.states[static_cast<std::size_t>(i)].col(b));
        }
      }
      // pad the action lists so sizes match (last state's action is unused)
      for (int b = 0; b < batch.batch; ++b)
        while (seq_actions[static_cast<std::size_t>(b)].size() < seq_states[static_cast<std::size_t>(b)].size()) {
          seq_actions[static_cast<std::size_t>(b)].push_back(0);
          seq_logged[static_cast<std::size_t>(b)].push_back(false);
        }
    }
    finalize_sequences(world, seq_states, seq_actions, seq_logged, items, seq_len_sum, seq_count);
  }

  void build_phase2_items(const WorldModel<S>& world, const WindowBatch<S>& batch, const RolledStates& roll,
                          const PolicyTrainConfig& cfg, Rng& rng, Items& items, double& seq_len_sum,
                          int& seq_count) {
    NoGradGuard guard;
    const int deter = world.config().deter_dim;
    const int stoch = world.config().stoch_dim;
    const int width = config_.feature_width;
    const int stride = std::max(1, cfg.phase2_stride);

    std::vector<std::pair<int, int>> starts;  // (t, b)
    for (int b = 0; b < batch.batch; ++b)
      for (int t = 0; t < batch.length[static_cast<std::size_t>(b)]; t += stride) starts.emplace_back(t, b);
    if (starts.empty()) return;

    Mat<S> h0(deter, static_cast<Eigen::Index>(starts.size()));
    Mat<S> z0(stoch, static_cast<Eigen::Index>(starts.size()));
    for (std::size_t i = 0; i < starts.size(); ++i) {
      h0.col(static_cast<Eigen::Index>(i)) = roll.h[static_cast<std::size_t>(starts[i].first)].col(starts[i].second);
      z0.col(static_cast<Eigen::Index>(i)) = roll.z[static_cast<std::size_t>(starts[i].first)].col(starts[i].second);
    }
    const ImaginedRollout<S> rollout = world.imagine(h0, z0, imagination_actor(rng), cfg.imagine_horizon, rng);

    std::vector<std::vector<Eigen::VectorX<S>>> seq_states(starts.size());
    std::vector<std::vector<int>> seq_actions(starts.size());
    std::vector<std::vector<bool>> seq_logged(starts.size());
    for (std::size_t i = 0; i < starts.size(); ++i) {
      Eigen::VectorX<S> s(width);
      s.topRows(deter) = h0.col(static_cast<Eigen::Index>(i));
      s.bottomRows(stoch) = z0.col(static_cast<Eigen::Index>(i));
      seq_states[i].push_back(std::move(s));
      // every reinforced action is imagined; logged actions never enter
      for (int j = 0; j < cfg.imagine_horizon; ++j) {
        seq_actions[i].push_back(rollout.actions[static_cast<std::size_t>(j)][i]);
        seq_logged[i].push_back(false);
        seq_states[i].push_back(rollout.states[static_cast<std::size_t>(j)].col(static_cast<Eigen::Index>(i)));
      }
      seq_actions[i].push_back(0);  // unused terminal slot
      seq_logged[i].push_back(false);
    }
    finalize_sequences(world, seq_states, seq_actions, seq_logged, items, seq_len_sum, seq_count);
  }

  /// Shared tail: head-predicted rewards/continues at every state, target
  /// critic values, lambda-return targets, and the flattened items.
  void finalize_sequences(const WorldModel<S>& world, const std::vector<std::vector<Eigen::VectorX<S>>>& seq_states,
                          const std::vector<std::vector<int>>& seq_actions,
                          const std::vector<std::vector<bool>>& seq_logged, Items& items, double& seq_len_sum,
                          int& seq_count) {
    NoGradGuard guard;
    // flatten all states once for batched head/value evaluation
    std::size_t total = 0;
    for (const auto& seq : seq_states) total += seq.size();
    if (total == 0) return;
    Mat<S> all(config_.feature_width, static_cast<Eigen::Index>(total));
    std::size_t cursor = 0;
    for (const auto& seq : seq_states)
      for (const auto& s : seq) all.col(static_cast<Eigen::Index>(cursor++)) = s;

    const Eigen::RowVectorX<S> rewards = world.decode_rewards(world.reward_logits(Tensor<S>::constant(all)).value());
    const Mat<S> cont_logits = world.continue_logit(Tensor<S>::constant(all)).value();
    const Eigen::RowVectorX<S> continues = (S(1) / (S(1) + (-cont_logits.array()).exp())).matrix().row(0);
    const Eigen::RowVectorXd target_values = values(all, /*use_target=*/true);

    cursor = 0;
    for (std::size_t q = 0; q < seq_states.size(); ++q) {
      const std::size_t len = seq_states[q].size();
      if (len < 2) {
        cursor += len;
        continue;
      }
      seq_len_sum += static_cast<double>(len);
      ++seq_count;
      std::vector<double> r_in(len - 1), c_in(len - 1), v_in(len - 1);
      for (std::size_t t = 0; t + 1 < len; ++t) {
        const std::size_t succ = cursor + t + 1;
        r_in[t] = static_cast<double>(rewards(static_cast<Eigen::Index>(succ)));
        c_in[t] = static_cast<double>(continues(static_cast<Eigen::Index>(succ)));
        v_in[t] = target_values(static_cast<Eigen::Index>(succ));
      }
      const double bootstrap = target_values(static_cast<Eigen::Index>(cursor + len - 1));
      const std::vector<double> targets = lambda_returns(r_in, c_in, v_in, config_.lambda, config_.gamma, bootstrap);
      for (std::size_t t = 0; t + 1 < len; ++t) {
        items.states.push_back(seq_states[q][t]);
        items.actions.push_back(seq_actions[q][t]);
        items.returns.push_back(targets[t]);
        items.baselines.push_back(target_values(static_cast<Eigen::Index>(cursor + t)));
        if (seq_logged[q][t]) ++logged_action_terms_;
      }
      cursor += len;
    }
  }

  Config config_;
  TwoHotCodec<S> codec_;
  ParamMap<S> actor_params_, critic_params_, target_params_;
  Mlp<S> actor_, critic_, target_critic_;
  double retnorm_scale_ = 1.0;
  bool retnorm_init_ = false;
  long logged_action_terms_ = 0;
};

}  // namespace medrl
