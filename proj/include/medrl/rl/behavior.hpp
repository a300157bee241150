#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "medrl/core/adam.hpp"
#include "medrl/core/checkpoint.hpp"
#include "medrl/core/tensor.hpp"
#include "medrl/data/episode.hpp"
#include "medrl/rl/afi.hpp"
#include "medrl/rl/nn.hpp"

namespace medrl {

struct BehaviorTrainConfig {
  double lr = 1e-4;
  int max_epochs = 200;
  int patience = 10;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

struct BehaviorFitReport {
  int epochs_run = 0;
  double best_val_loss = 0.0;
  double holdout_accuracy = 0.0;
  bool degenerate_actions = false;  // single logged action class
};

/// Supervised clinician surrogate: a single recurrent (LSTM) layer over
/// zero-filled normalized observations concatenated with masks, with a
/// linear head over action logits. Output probabilities are floored before
/// use in importance ratios.
template <typename S>
class BehaviorPolicy {
 public:
  struct Config {
    int feature_dim = 0;
    int action_count = 0;
    int hidden = 16;
    double prob_floor = 1e-4;
  };

  BehaviorPolicy(Config config, NormStats stats, std::uint64_t seed)
      : config_(config), stats_(std::move(stats)) {
    Rng rng(seed ^ 0xbe4a71ULL);
    cell_ = LstmCell<S>::init(2 * config_.feature_dim, config_.hidden, rng, params_, "lstm");
    head_ = Linear<S>::init(config_.hidden, config_.action_count, rng, params_, "head");
  }

  const Config& config() const { return config_; }
  ParamMap<S>& params() { return params_; }

  /// Per-step action distributions for an episode (rows = steps). The
  /// distribution at step t conditions on observations 1..t.
  Eigen::MatrixXd probs(const Episode& episode) const {
    NoGradGuard guard;
    const Mat<S> logits = forward_episode(episode).value();
    Eigen::MatrixXd out(episode.length(), config_.action_count);
    // epsilon mixture keeps every probability at or above the floor while
    // still summing to one
    const double floor = config_.prob_floor;
    const double keep = 1.0 - floor * config_.action_count;
    if (keep <= 0.0) throw std::logic_error("BehaviorPolicy: prob_floor too large for the action count");
    for (int t = 0; t < episode.length(); ++t) {
      Eigen::VectorX<S> col = logits.col(t);
      Eigen::VectorX<S> p = (col.array() - col.maxCoeff()).exp();
      p /= p.sum();
      out.row(t) = (keep * p.template cast<double>().array() + floor).transpose();
    }
    return out;
  }

  /// Cross-entropy training with validation-plateau early stopping
  /// (patience in epochs) on a held-out split. Reports top-1 accuracy on
  /// the validation episodes.
  BehaviorFitReport fit(const std::vector<Episode>& train, const std::vector<Episode>& val,
                        const BehaviorTrainConfig& cfg) {
    if (train.empty() || val.empty()) throw std::invalid_argument("BehaviorPolicy::fit: empty split");
    BehaviorFitReport report;
    report.degenerate_actions = single_action_class(train);

    Rng rng(cfg.seed ^ 0xf17beacULL);
    AdamOptimizer<S> opt(params_.tensors(), static_cast<S>(cfg.lr));
    double best = std::numeric_limits<double>::infinity();
    std::vector<Mat<double>> best_params;
    int since_best = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      // one pass over shuffled training episodes in minibatches
      std::vector<int> order(train.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
      for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
        params_.zero_grad();
        Tensor<S> loss = Tensor<S>::scalar_const(S(0));
        long steps = 0;
        for (std::size_t i = at; i < end; ++i) {
          const Episode& ep = train[static_cast<std::size_t>(order[i])];
          loss = add(loss, episode_ce(ep));
          steps += ep.length();
        }
        loss = affine(loss, S(1) / static_cast<S>(std::max<long>(steps, 1)), S(0));
        loss.backward();
        opt.step();
      }
      report.epochs_run = epoch + 1;
      const double val_loss = evaluate_ce(val);
      if (val_loss < best - 1e-6) {
        best = val_loss;
        since_best = 0;
        best_params.clear();
        for (const auto& [name, t] : params_.items) best_params.push_back(t.value().template cast<double>());
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
    if (!best_params.empty()) {
      std::size_t i = 0;
      for (auto& [name, t] : params_.items) t.mutable_value() = best_params[i++].cast<S>();
    }
    report.best_val_loss = best;
    report.holdout_accuracy = accuracy(val);
    return report;
  }

  double accuracy(const std::vector<Episode>& episodes) const {
    NoGradGuard guard;
    long hit = 0, total = 0;
    for (const auto& ep : episodes) {
      const Eigen::MatrixXd p = probs(ep);
      for (int t = 0; t < ep.length(); ++t) {
        Eigen::Index best = 0;
        p.row(t).maxCoeff(&best);
        hit += (static_cast<int>(best) == ep.steps[static_cast<std::size_t>(t)].action) ? 1 : 0;
        ++total;
      }
    }
    return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
  }

  double evaluate_ce(const std::vector<Episode>& episodes) const {
    NoGradGuard guard;
    double total = 0.0;
    long steps = 0;
    for (const auto& ep : episodes) {
      total += static_cast<double>(episode_ce(ep).item());
      steps += ep.length();
    }
    return steps ? total / static_cast<double>(steps) : 0.0;
  }

  void save(const std::string& path, const std::string& meta = "") const {
    Checkpoint ck;
    ck.put("cfg", (Eigen::MatrixXd(4, 1) << config_.feature_dim, config_.action_count, config_.hidden,
                   config_.prob_floor)
                      .finished());
    ck.put("norm/mean", stats_.mean);
    ck.put("norm/std", stats_.std_dev);
    ck.put_params(params_, "bp/");
    ck.meta = meta;
    ck.save(path);
  }

  static BehaviorPolicy load(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    const Eigen::MatrixXd cfg_mat = ck.get("cfg");
    Config config;
    config.feature_dim = static_cast<int>(cfg_mat(0));
    config.action_count = static_cast<int>(cfg_mat(1));
    config.hidden = static_cast<int>(cfg_mat(2));
    config.prob_floor = cfg_mat(3);
    NormStats stats;
    stats.mean = ck.get("norm/mean");
    stats.std_dev = ck.get("norm/std");
    BehaviorPolicy bp(config, std::move(stats), 0);
    ck.load_params(bp.params_, "bp/");
    return bp;
  }

 private:
  Mat<S> step_input(const EpisodeStep& step) const {
    Mat<S> x = Mat<S>::Zero(2 * config_.feature_dim, 1);
    for (int f = 0; f < config_.feature_dim; ++f) {
      if (step.mask(f) == 1.0) {
        x(f, 0) = static_cast<S>((step.obs(f) - stats_.mean(f)) / stats_.std_dev(f));
        x(config_.feature_dim + f, 0) = S(1);
      }
    }
    return x;
  }

  Tensor<S> forward_episode(const Episode& episode) const {
    typename LstmCell<S>::State state{Tensor<S>::constant(Mat<S>::Zero(config_.hidden, 1)),
                                      Tensor<S>::constant(Mat<S>::Zero(config_.hidden, 1))};
    std::vector<Tensor<S>> hs;
    for (const auto& step : episode.steps) {
      state = cell_(Tensor<S>::constant(step_input(step)), state);
      hs.push_back(state.h);
    }
    Tensor<S> h_all = hs.front();
    for (std::size_t i = 1; i < hs.size(); ++i) h_all = hstack(h_all, hs[i]);
    return head_(h_all);
  }

  Tensor<S> episode_ce(const Episode& episode) const {
    Tensor<S> logits = forward_episode(episode);
    Mat<S> targets = Mat<S>::Zero(config_.action_count, episode.length());
    for (int t = 0; t < episode.length(); ++t) targets(episode.steps[static_cast<std::size_t>(t)].action, t) = S(1);
    return cross_entropy_cols(logits, targets, Eigen::RowVectorX<S>::Ones(episode.length()).eval());
  }

  static bool single_action_class(const std::vector<Episode>& episodes) {
    int seen = -1;
    for (const auto& ep : episodes)
      for (const auto& step : ep.steps) {
        if (seen < 0) seen = step.action;
        if (step.action != seen) return false;
      }
    return true;
  }

  Config config_;
  NormStats stats_;
  ParamMap<S> params_;
  LstmCell<S> cell_;
  Linear<S> head_;
};

}  // namespace medrl
