#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "medrl/core/adam.hpp"
#include "medrl/core/checkpoint.hpp"
#include "medrl/core/codec.hpp"
#include "medrl/core/random.hpp"
#include "medrl/core/tensor.hpp"
#include "medrl/data/episode.hpp"
#include "medrl/rl/afi.hpp"
#include "medrl/rl/nn.hpp"

namespace medrl {

template <typename S>
struct WorldModelConfig {
  int feature_dim = 0;
  int action_count = 0;
  int embed_width = 32;       // AFI k
  bool mask_channel = false;
  bool use_afi = true;        // false: zero-impute linear encoder, no intervals
  int deter_dim = 256;        // recurrent state h
  int stoch_dim = 32;         // stochastic latent z
  int hidden = 512;           // prediction-head MLP width
  int dyn_hidden = 256;       // posterior/prior MLP width
  double std_floor = 0.1;
  double free_bits = 1.0;     // nats per step
  int bucket_count = 255;
  double bucket_limit = 20.0;
  double w_reward = 1.0, w_continue = 1.0, w_recon = 1.0, w_kl = 1.0;

  int feature_width() const { return deter_dim + stoch_dim; }
  int action_input() const { return action_count + 1; }  // extra null action at t = 1
};

/// Recurrent deterministic state plus a stochastic Gaussian latent; the
/// feature vector consumed by heads and the policy is concat(h, z).
template <typename S>
struct LatentBelief {
  Tensor<S> h;
  Tensor<S> z;
  Tensor<S> mean;
  Tensor<S> std_dev;

  Tensor<S> features() const { return vstack(h, z); }
  Eigen::Index batch() const { return h.cols(); }
};

/// Diagonal-Gaussian KL(q || p) per column, clamped below by the free-bits
/// floor. Throws on nonpositive standard deviations.
template <typename S>
Tensor<S> kl_divergence(const LatentBelief<S>& posterior, const LatentBelief<S>& prior, S free_bits) {
  if ((posterior.std_dev.value().array() <= S(0)).any() || (prior.std_dev.value().array() <= S(0)).any())
    throw std::domain_error("kl_divergence: nonpositive standard deviation");
  Tensor<S> log_ratio = sub(log_t(prior.std_dev), log_t(posterior.std_dev));
  Tensor<S> dmean = sub(posterior.mean, prior.mean);
  Tensor<S> denom = affine(square(prior.std_dev), S(2), S(0));
  Tensor<S> quad = div(add(square(posterior.std_dev), square(dmean)), denom);
  Tensor<S> per_elem = affine(add(log_ratio, quad), S(1), S(-0.5));
  return clamp_min(colwise_sum(per_elem), free_bits);
}

/// Imagined continuation produced by rolling the prior with an actor.
/// Element i holds the action sampled at the previous state, the resulting
/// state features, and the decoded reward / continue probability there.
template <typename S>
struct ImaginedRollout {
  std::vector<Mat<S>> states;                    // s_dim x B
  std::vector<std::vector<int>> actions;         // B, taken at the preceding state
  std::vector<Eigen::RowVectorX<S>> rewards;     // decoded two-hot expectation
  std::vector<Eigen::RowVectorX<S>> continues;   // sigmoid of the continuation logit
};

/// One training batch: contiguous windows of fixed length with padding
/// masks. Episodes shorter than the window contribute zero loss beyond
/// their end.
template <typename S>
struct WindowBatch {
  int window = 0, batch = 0;
  std::vector<Mat<S>> obs, deltas, masks;            // D x B (obs zero-filled, normalized)
  std::vector<Mat<S>> prev_action;                   // (A+1) x B one-hot of a_{t-1}
  std::vector<Mat<S>> reward_tgt;                    // buckets x B two-hot targets
  std::vector<Eigen::RowVectorX<S>> reward_weight;   // 1 x B
  std::vector<Mat<S>> cont_tgt;                      // 1 x B
  std::vector<Eigen::RowVectorX<S>> valid;           // 1 x B
  std::vector<Mat<S>> recon_tgt;                     // D x B, symlog of normalized obs
  std::vector<std::vector<int>> action_id;           // logged action at each step (-1 when padded)
  std::vector<int> length;                           // valid steps per column
  double valid_total = 0.0;
};

template <typename S>
struct WorldModelLosses {
  Tensor<S> total;
  double reward = 0.0, cont = 0.0, recon = 0.0, kl = 0.0;
};

struct WorldTrainConfig {
  int epochs = 10;
  int steps_per_epoch = 0;  // 0: ceil(n_episodes / batch_size)
  int batch_size = 64;
  int batch_length = 50;
  double lr = 1e-4;
  double clip_norm = 100.0;
  std::uint64_t seed = 0;
};

struct LossTraceRow {
  int epoch = 0;
  double reward = 0.0, cont = 0.0, recon = 0.0, kl = 0.0, total = 0.0;
};

template <typename S>
class WorldModel {
 public:
  WorldModel(WorldModelConfig<S> config, NormStats stats, std::uint64_t seed)
      : config_(config), stats_(std::move(stats)), codec_(config.bucket_count, S(config.bucket_limit)) {
    if (config_.feature_dim <= 0 || config_.action_count <= 0)
      throw std::invalid_argument("WorldModel: feature_dim and action_count must be positive");
    Rng rng(seed ^ 0x77a91d5eULL);
    afi_ = AfiParams<S>::init(config_.feature_dim, config_.embed_width, rng, params_, config_.mask_channel);
    const int obs_width = afi_.output_width();
    gru_ = GruCell<S>::init(config_.stoch_dim + config_.action_input(), config_.deter_dim, rng, params_, "gru");
    posterior_net_ = Mlp<S>::init(config_.deter_dim + obs_width, config_.dyn_hidden, 1, 2 * config_.stoch_dim, rng,
                                  params_, "posterior");
    prior_net_ = Mlp<S>::init(config_.deter_dim, config_.dyn_hidden, 1, 2 * config_.stoch_dim, rng, params_, "prior");
    reward_head_ = Mlp<S>::init(config_.feature_width(), config_.hidden, 2, config_.bucket_count, rng, params_, "reward");
    cont_head_ = Mlp<S>::init(config_.feature_width(), config_.hidden, 2, 1, rng, params_, "continue");
    recon_head_ = Mlp<S>::init(config_.feature_width(), config_.hidden, 2, config_.feature_dim, rng, params_, "recon");
    h0_ = params_.add("h0", Mat<S>::Zero(config_.deter_dim, 1));
  }

  const WorldModelConfig<S>& config() const { return config_; }
  const NormStats& stats() const { return stats_; }
  const TwoHotCodec<S>& codec() const { return codec_; }
  ParamMap<S>& params() { return params_; }
  const ParamMap<S>& params() const { return params_; }

  // -- encoding ------------------------------------------------------------

  /// Processed observation vector for a batch of steps (zero-filled
  /// normalized values, raw-hour intervals, masks).
  Tensor<S> encode_obs(const Mat<S>& obs_filled, const Mat<S>& delta, const Mat<S>& mask) const {
    Tensor<S> o = Tensor<S>::constant(obs_filled);
    Tensor<S> d = Tensor<S>::constant(delta);
    Tensor<S> m = Tensor<S>::constant(mask);
    return config_.use_afi ? afi::encode_batch(o, d, m, afi_) : afi::encode_plain(o, afi_);
  }

  int obs_feature_width() const { return afi_.output_width(); }

  // -- latent dynamics -----------------------------------------------------

  LatentBelief<S> initial_belief(Eigen::Index batch) const {
    LatentBelief<S> b;
    b.h = broadcast_cols(h0_, batch);
    b.z = Tensor<S>::constant(Mat<S>::Zero(config_.stoch_dim, batch));
    b.mean = Tensor<S>::constant(Mat<S>::Zero(config_.stoch_dim, batch));
    b.std_dev = Tensor<S>::constant(Mat<S>::Ones(config_.stoch_dim, batch));
    return b;
  }

  Mat<S> action_onehot(const std::vector<int>& ids) const {
    Mat<S> onehot = Mat<S>::Zero(config_.action_input(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t b = 0; b < ids.size(); ++b) {
      const int a = ids[b];
      if (a < -1 || a >= config_.action_count)
        throw std::invalid_argument("WorldModel: action id out of range: " + std::to_string(a));
      onehot(a < 0 ? config_.action_count : a, static_cast<Eigen::Index>(b)) = S(1);
    }
    return onehot;
  }

  /// Shared recurrent update; posterior and prior produce identical h from
  /// identical (z, a) inputs by construction.
  Tensor<S> recurrent_update(const LatentBelief<S>& prev, const Mat<S>& prev_action_onehot) const {
    Tensor<S> input = vstack(prev.z, Tensor<S>::constant(prev_action_onehot));
    return gru_(input, prev.h);
  }

  LatentBelief<S> posterior_step(const LatentBelief<S>& prev, const Mat<S>& prev_action_onehot,
                                 const Tensor<S>& obs_feat, Rng& rng, bool deterministic = false) const {
    Tensor<S> h = recurrent_update(prev, prev_action_onehot);
    return belief_from_stats(h, posterior_net_(vstack(h, obs_feat)), rng, deterministic);
  }

  LatentBelief<S> prior_step(const LatentBelief<S>& prev, const Mat<S>& prev_action_onehot, Rng& rng,
                             bool deterministic = false) const {
    Tensor<S> h = recurrent_update(prev, prev_action_onehot);
    return belief_from_stats(h, prior_net_(h), rng, deterministic);
  }

  /// Prior distribution parameters on top of an already-computed h.
  LatentBelief<S> prior_from_h(const Tensor<S>& h, Rng& rng, bool deterministic = false) const {
    return belief_from_stats(h, prior_net_(h), rng, deterministic);
  }

  // -- heads ---------------------------------------------------------------

  Tensor<S> reward_logits(const Tensor<S>& features) const { return reward_head_(features); }
  Tensor<S> continue_logit(const Tensor<S>& features) const { return cont_head_(features); }
  Tensor<S> reconstruction(const Tensor<S>& features) const { return recon_head_(features); }

  Eigen::RowVectorX<S> decode_rewards(const Mat<S>& reward_logits_value) const {
    Eigen::RowVectorX<S> out(reward_logits_value.cols());
    for (Eigen::Index b = 0; b < reward_logits_value.cols(); ++b)
      out(b) = codec_.decode_logits(reward_logits_value.col(b));
    return out;
  }

  // -- batching ------------------------------------------------------------

  WindowBatch<S> make_batch(const std::vector<Episode>& episodes, int batch_size, int window, Rng& rng) const {
    if (episodes.empty()) throw std::invalid_argument("WorldModel::make_batch: empty dataset");
    WindowBatch<S> wb;
    wb.window = window;
    wb.batch = batch_size;
    const int d = config_.feature_dim;
    for (int t = 0; t < window; ++t) {
      wb.obs.push_back(Mat<S>::Zero(d, batch_size));
      wb.deltas.push_back(Mat<S>::Zero(d, batch_size));
      wb.masks.push_back(Mat<S>::Zero(d, batch_size));
      wb.prev_action.push_back(Mat<S>::Zero(config_.action_input(), batch_size));
      wb.reward_tgt.push_back(Mat<S>::Zero(config_.bucket_count, batch_size));
      wb.reward_weight.push_back(Eigen::RowVectorX<S>::Zero(batch_size));
      wb.cont_tgt.push_back(Mat<S>::Zero(1, batch_size));
      wb.valid.push_back(Eigen::RowVectorX<S>::Zero(batch_size));
      wb.recon_tgt.push_back(Mat<S>::Zero(d, batch_size));
      wb.action_id.emplace_back(batch_size, -1);
    }
    wb.length.assign(batch_size, 0);

    for (int b = 0; b < batch_size; ++b) {
      const Episode& ep = episodes[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(episodes.size())))];
      const int len = ep.length();
      const int max_start = std::max(0, len - window);
      const int start = max_start > 0 ? rng.uniform_int(max_start + 1) : 0;
      const Eigen::MatrixXd deltas = compute_deltas(ep);
      const int copy = std::min(window, len - start);
      wb.length[b] = copy;
      for (int t = 0; t < copy; ++t) {
        const int idx = start + t;
        const auto& step = ep.steps[static_cast<std::size_t>(idx)];
        for (int f = 0; f < d; ++f) {
          if (step.mask(f) == 1.0) {
            const double norm = (step.obs(f) - stats_.mean(f)) / stats_.std_dev(f);
            wb.obs[t](f, b) = static_cast<S>(norm);
            wb.masks[t](f, b) = S(1);
            wb.recon_tgt[t](f, b) = static_cast<S>(symlog(norm));
          }
          wb.deltas[t](f, b) = static_cast<S>(deltas(idx, f));
        }
        const int prev_action = idx > 0 ? ep.steps[static_cast<std::size_t>(idx - 1)].action : -1;
        wb.prev_action[t](prev_action < 0 ? config_.action_count : prev_action, b) = S(1);
        wb.action_id[t][static_cast<std::size_t>(b)] = step.action;
        wb.valid[t](b) = S(1);
        wb.cont_tgt[t](0, b) = step.terminal ? S(0) : S(1);
        if (idx > 0) {
          const auto& arrival = ep.steps[static_cast<std::size_t>(idx - 1)].reward;
          if (arrival) {
            wb.reward_tgt[t].col(b) = codec_.encode(static_cast<S>(*arrival));
            wb.reward_weight[t](b) = S(1);
          }
        }
        wb.valid_total += 1.0;
      }
    }
    return wb;
  }

  // -- losses --------------------------------------------------------------

  WorldModelLosses<S> window_loss(const WindowBatch<S>& wb, Rng& rng) const {
    const S denom = static_cast<S>(std::max(wb.valid_total, 1.0));
    LatentBelief<S> belief = initial_belief(wb.batch);
    Tensor<S> l_rew = Tensor<S>::scalar_const(S(0));
    Tensor<S> l_con = Tensor<S>::scalar_const(S(0));
    Tensor<S> l_rec = Tensor<S>::scalar_const(S(0));
    Tensor<S> l_kl = Tensor<S>::scalar_const(S(0));
    for (int t = 0; t < wb.window; ++t) {
      Tensor<S> obs_feat = encode_obs(wb.obs[static_cast<std::size_t>(t)], wb.deltas[static_cast<std::size_t>(t)],
                                      wb.masks[static_cast<std::size_t>(t)]);
      Tensor<S> h = recurrent_update(belief, wb.prev_action[static_cast<std::size_t>(t)]);
      LatentBelief<S> posterior = belief_from_stats(h, posterior_net_(vstack(h, obs_feat)), rng, false);
      LatentBelief<S> prior = belief_from_stats(h, prior_net_(h), rng, true);

      Tensor<S> features = posterior.features();
      l_rew = add(l_rew, cross_entropy_cols(reward_head_(features), wb.reward_tgt[static_cast<std::size_t>(t)],
                                            wb.reward_weight[static_cast<std::size_t>(t)]));
      l_con = add(l_con, bernoulli_nll(cont_head_(features), wb.cont_tgt[static_cast<std::size_t>(t)],
                                       Mat<S>(wb.valid[static_cast<std::size_t>(t)])));
      Tensor<S> rec_err = square(sub(recon_head_(features), Tensor<S>::constant(wb.recon_tgt[static_cast<std::size_t>(t)])));
      l_rec = add(l_rec, sum(mul(rec_err, Tensor<S>::constant(wb.masks[static_cast<std::size_t>(t)]))));
      Tensor<S> kl_row = kl_divergence(posterior, prior, static_cast<S>(config_.free_bits));
      l_kl = add(l_kl, sum(mul(kl_row, Tensor<S>::constant(Mat<S>(wb.valid[static_cast<std::size_t>(t)])))));
      belief = posterior;
    }
    WorldModelLosses<S> out;
    l_rew = affine(l_rew, S(1) / denom, S(0));
    l_con = affine(l_con, S(1) / denom, S(0));
    l_rec = affine(l_rec, S(1) / denom, S(0));
    l_kl = affine(l_kl, S(1) / denom, S(0));
    out.reward = static_cast<double>(l_rew.item());
    out.cont = static_cast<double>(l_con.item());
    out.recon = static_cast<double>(l_rec.item());
    out.kl = static_cast<double>(l_kl.item());
    Tensor<S> total = add(add(affine(l_rew, static_cast<S>(config_.w_reward), S(0)),
                              affine(l_con, static_cast<S>(config_.w_continue), S(0))),
                          add(affine(l_rec, static_cast<S>(config_.w_recon), S(0)),
                              affine(l_kl, static_cast<S>(config_.w_kl), S(0))));
    out.total = total;
    return out;
  }

  // -- training ------------------------------------------------------------

  std::vector<LossTraceRow> train(const std::vector<Episode>& episodes, const WorldTrainConfig& cfg) {
    if (episodes.empty()) throw std::invalid_argument("WorldModel::train: empty dataset");
    Rng rng(cfg.seed ^ 0x1234abcdULL);
    typename AdamOptimizer<S>::Options opts;
    opts.lr = static_cast<S>(cfg.lr);
    opts.clip_norm = static_cast<S>(cfg.clip_norm);
    AdamOptimizer<S> optimizer(params_.tensors(), opts);
    const int steps = cfg.steps_per_epoch > 0
                          ? cfg.steps_per_epoch
                          : std::max(1, static_cast<int>((episodes.size() + cfg.batch_size - 1) / cfg.batch_size));
    std::vector<LossTraceRow> trace;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      LossTraceRow row;
      row.epoch = epoch;
      for (int s = 0; s < steps; ++s) {
        WindowBatch<S> batch = make_batch(episodes, cfg.batch_size, cfg.batch_length, rng);
        optimizer.zero_grad();
        WorldModelLosses<S> losses = window_loss(batch, rng);
        losses.total.backward();
        optimizer.step();
        row.reward += losses.reward;
        row.cont += losses.cont;
        row.recon += losses.recon;
        row.kl += losses.kl;
        row.total += static_cast<double>(losses.total.item());
      }
      row.reward /= steps;
      row.cont /= steps;
      row.recon /= steps;
      row.kl /= steps;
      row.total /= steps;
      trace.push_back(row);
    }
    return trace;
  }

  // -- imagination ---------------------------------------------------------

  /// Rolls the prior transition with actions sampled from `actor` for
  /// `horizon` steps starting at (h, z) column states. Runs without
  /// gradient recording; policy losses re-evaluate what they need.
  ImaginedRollout<S> imagine(const Mat<S>& h0, const Mat<S>& z0,
                             const std::function<std::vector<int>(const Mat<S>&)>& actor, int horizon,
                             Rng& rng) const {
    if (horizon < 1) throw std::invalid_argument("WorldModel::imagine: horizon must be >= 1");
    NoGradGuard guard;
    ImaginedRollout<S> out;
    LatentBelief<S> belief;
    belief.h = Tensor<S>::constant(h0);
    belief.z = Tensor<S>::constant(z0);
    Mat<S> features(config_.feature_width(), h0.cols());
    features.topRows(config_.deter_dim) = h0;
    features.bottomRows(config_.stoch_dim) = z0;
    for (int i = 0; i < horizon; ++i) {
      const std::vector<int> actions = actor(features);
      LatentBelief<S> next = prior_step(belief, action_onehot(actions), rng, false);
      features.topRows(config_.deter_dim) = next.h.value();
      features.bottomRows(config_.stoch_dim) = next.z.value();
      Tensor<S> feat = next.features();
      out.states.push_back(features);
      out.actions.push_back(actions);
      out.rewards.push_back(decode_rewards(reward_head_(feat).value()));
      Mat<S> cont = cont_head_(feat).value();
      out.continues.push_back((S(1) / (S(1) + (-cont.array()).exp())).matrix().row(0));
      belief = next;
    }
    return out;
  }

  // -- evaluation helpers ----------------------------------------------------

  struct Replay {
    Mat<S> features;   // s_dim x T posterior features
    Mat<S> h;          // deter x T
    Mat<S> z;          // stoch x T
  };

  /// Posterior replay of a logged episode (no gradients). Deterministic
  /// mode uses the posterior mean as the sample.
  Replay replay_posterior(const Episode& episode, Rng& rng, bool deterministic = true) const {
    NoGradGuard guard;
    const int n = episode.length();
    Replay out;
    out.features.resize(config_.feature_width(), n);
    out.h.resize(config_.deter_dim, n);
    out.z.resize(config_.stoch_dim, n);
    const Eigen::MatrixXd deltas = compute_deltas(episode);
    LatentBelief<S> belief = initial_belief(1);
    for (int t = 0; t < n; ++t) {
      const auto& step = episode.steps[static_cast<std::size_t>(t)];
      Mat<S> obs = Mat<S>::Zero(config_.feature_dim, 1);
      Mat<S> mask = Mat<S>::Zero(config_.feature_dim, 1);
      Mat<S> delta(config_.feature_dim, 1);
      for (int f = 0; f < config_.feature_dim; ++f) {
        delta(f, 0) = static_cast<S>(deltas(t, f));
        if (step.mask(f) == 1.0) {
          mask(f, 0) = S(1);
          obs(f, 0) = static_cast<S>((step.obs(f) - stats_.mean(f)) / stats_.std_dev(f));
        }
      }
      Tensor<S> obs_feat = encode_obs(obs, delta, mask);
      const int prev = t > 0 ? episode.steps[static_cast<std::size_t>(t - 1)].action : -1;
      belief = posterior_step(belief, action_onehot({prev}), obs_feat, rng, deterministic);
      out.h.col(t) = belief.h.value().col(0);
      out.z.col(t) = belief.z.value().col(0);
      out.features.col(t).topRows(config_.deter_dim) = belief.h.value().col(0);
      out.features.col(t).bottomRows(config_.stoch_dim) = belief.z.value().col(0);
    }
    return out;
  }

  /// One-step-ahead observation predictions in symlog space of normalized
  /// features: row t predicts step t from the posterior at t-1 and the
  /// logged action, decoding the prior mean. Row 0 is NaN.
  Eigen::MatrixXd one_step_predictions(const Episode& episode, Rng& rng) const {
    NoGradGuard guard;
    const int n = episode.length();
    Eigen::MatrixXd preds =
        Eigen::MatrixXd::Constant(n, config_.feature_dim, std::numeric_limits<double>::quiet_NaN());
    const Eigen::MatrixXd deltas = compute_deltas(episode);
    LatentBelief<S> belief = initial_belief(1);
    for (int t = 0; t < n; ++t) {
      const auto& step = episode.steps[static_cast<std::size_t>(t)];
      const int prev = t > 0 ? episode.steps[static_cast<std::size_t>(t - 1)].action : -1;
      const Mat<S> prev_onehot = action_onehot({prev});
      if (t > 0) {
        LatentBelief<S> prior = prior_step(belief, prev_onehot, rng, true);
        const Mat<S> rec = recon_head_(prior.features()).value();
        for (int f = 0; f < config_.feature_dim; ++f) preds(t, f) = static_cast<double>(rec(f, 0));
      }
      Mat<S> obs = Mat<S>::Zero(config_.feature_dim, 1);
      Mat<S> mask = Mat<S>::Zero(config_.feature_dim, 1);
      Mat<S> delta(config_.feature_dim, 1);
      for (int f = 0; f < config_.feature_dim; ++f) {
        delta(f, 0) = static_cast<S>(deltas(t, f));
        if (step.mask(f) == 1.0) {
          mask(f, 0) = S(1);
          obs(f, 0) = static_cast<S>((step.obs(f) - stats_.mean(f)) / stats_.std_dev(f));
        }
      }
      Tensor<S> obs_feat = encode_obs(obs, delta, mask);
      belief = posterior_step(belief, prev_onehot, obs_feat, rng, true);
    }
    return preds;
  }

  /// Symlog target for an observed feature value, matching the
  /// reconstruction head's training target.
  double symlog_target(double raw, int feature) const {
    return symlog((raw - stats_.mean(feature)) / stats_.std_dev(feature));
  }

  /// Mean squared error of decoded reward predictions against labeled
  /// arrival rewards, in symlog space.
  double reward_prediction_mse(const std::vector<Episode>& episodes, Rng& rng) const {
    NoGradGuard guard;
    double err = 0.0;
    long count = 0;
    for (const auto& ep : episodes) {
      const Replay replay = replay_posterior(ep, rng, true);
      for (int t = 1; t < ep.length(); ++t) {
        const auto& arrival = ep.steps[static_cast<std::size_t>(t - 1)].reward;
        if (!arrival) continue;
        const Mat<S> logits = reward_head_(Tensor<S>::constant(Mat<S>(replay.features.col(t)))).value();
        const double pred = static_cast<double>(codec_.decode_logits(logits.col(0)));
        const double diff = symlog(pred) - symlog(*arrival);
        err += diff * diff;
        ++count;
      }
    }
    return count ? err / static_cast<double>(count) : 0.0;
  }

  // -- persistence -----------------------------------------------------------

  void save(const std::string& path, const std::string& meta = "") const {
    Checkpoint ck;
    ck.put("cfg/dims", (Eigen::MatrixXd(12, 1) << config_.feature_dim, config_.action_count, config_.embed_width,
                        config_.mask_channel ? 1 : 0, config_.use_afi ? 1 : 0, config_.deter_dim, config_.stoch_dim,
                        config_.hidden, config_.dyn_hidden, config_.bucket_count, config_.std_floor,
                        config_.bucket_limit)
                           .finished());
    ck.put("cfg/loss", (Eigen::MatrixXd(5, 1) << config_.free_bits, config_.w_reward, config_.w_continue,
                        config_.w_recon, config_.w_kl)
                           .finished());
    ck.put("norm/mean", stats_.mean);
    ck.put("norm/std", stats_.std_dev);
    ck.put_params(params_, "wm/");
    ck.meta = meta;
    ck.save(path);
  }

  static WorldModel load(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    const Eigen::MatrixXd dims = ck.get("cfg/dims");
    const Eigen::MatrixXd loss = ck.get("cfg/loss");
    WorldModelConfig<S> config;
    config.feature_dim = static_cast<int>(dims(0));
    config.action_count = static_cast<int>(dims(1));
    config.embed_width = static_cast<int>(dims(2));
    config.mask_channel = dims(3) != 0;
    config.use_afi = dims(4) != 0;
    config.deter_dim = static_cast<int>(dims(5));
    config.stoch_dim = static_cast<int>(dims(6));
    config.hidden = static_cast<int>(dims(7));
    config.dyn_hidden = static_cast<int>(dims(8));
    config.bucket_count = static_cast<int>(dims(9));
    config.std_floor = dims(10);
    config.bucket_limit = dims(11);
    config.free_bits = loss(0);
    config.w_reward = loss(1);
    config.w_continue = loss(2);
    config.w_recon = loss(3);
    config.w_kl = loss(4);
    NormStats stats;
    stats.mean = ck.get("norm/mean");
    stats.std_dev = ck.get("norm/std");
    WorldModel model(config, std::move(stats), /*seed=*/0);
    ck.load_params(model.params_, "wm/");
    return model;
  }

 private:
  LatentBelief<S> belief_from_stats(const Tensor<S>& h, const Tensor<S>& stats, Rng& rng, bool deterministic) const {
    LatentBelief<S> belief;
    belief.h = h;
    belief.mean = rows(stats, 0, config_.stoch_dim);
    Tensor<S> raw_std = rows(stats, config_.stoch_dim, config_.stoch_dim);
    belief.std_dev = affine(softplus(raw_std), S(1), static_cast<S>(config_.std_floor));
    if (deterministic) {
      belief.z = belief.mean;
    } else {
      Mat<S> eps(config_.stoch_dim, h.cols());
      for (Eigen::Index j = 0; j < eps.cols(); ++j)
        for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = static_cast<S>(rng.normal());
      belief.z = add(belief.mean, mul(belief.std_dev, Tensor<S>::constant(std::move(eps))));
    }
    return belief;
  }

  WorldModelConfig<S> config_;
  NormStats stats_;
  TwoHotCodec<S> codec_;
  ParamMap<S> params_;
  AfiParams<S> afi_;
  GruCell<S> gru_;
  Mlp<S> posterior_net_, prior_net_;
  Mlp<S> reward_head_, cont_head_, recon_head_;
  Tensor<S> h0_;
};

}  // namespace medrl
