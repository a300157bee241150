#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "medrl/core/tensor.hpp"

namespace medrl {

/// Adam with optional global-norm gradient clipping. Moments live in the
/// optimizer, aligned with the parameter list given at construction.
template <typename Scalar>
class AdamOptimizer {
 public:
  struct Options {
    Scalar lr = Scalar(1e-4);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);
    Scalar clip_norm = Scalar(100);  // <= 0 disables clipping
  };

  AdamOptimizer(std::vector<Tensor<Scalar>> params, Options opts) : params_(std::move(params)), opts_(opts) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
      v_.push_back(Mat<Scalar>::Zero(p.rows(), p.cols()));
    }
  }

  AdamOptimizer(std::vector<Tensor<Scalar>> params, Scalar lr) : AdamOptimizer(std::move(params), Options{.lr = lr}) {}

  /// Applies one update from the gradients accumulated on the parameters.
  void step() {
    ++step_count_;
    Scalar scale = Scalar(1);
    if (opts_.clip_norm > Scalar(0)) {
      double sq = 0.0;
      for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& g = params_[i].grad();
        if (g.size() == 0) continue;
        if (g.rows() != params_[i].rows() || g.cols() != params_[i].cols())
          throw std::invalid_argument("AdamOptimizer::step: gradient shape mismatch");
        sq += static_cast<double>(g.squaredNorm());
      }
      const double norm = std::sqrt(sq);
      if (norm > static_cast<double>(opts_.clip_norm)) scale = opts_.clip_norm / static_cast<Scalar>(norm);
    }
    const Scalar bc1 = Scalar(1) - std::pow(opts_.beta1, static_cast<Scalar>(step_count_));
    const Scalar bc2 = Scalar(1) - std::pow(opts_.beta2, static_cast<Scalar>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Mat<Scalar> g = params_[i].grad_or_zero() * scale;
      m_[i] = opts_.beta1 * m_[i] + (Scalar(1) - opts_.beta1) * g;
      v_[i] = opts_.beta2 * v_[i] + (Scalar(1) - opts_.beta2) * g.cwiseProduct(g);
      Mat<Scalar> mhat = m_[i] / bc1;
      Mat<Scalar> vhat = v_[i] / bc2;
      params_[i].mutable_value() -=
          (opts_.lr * mhat.array() / (vhat.array().sqrt() + opts_.eps)).matrix();
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::int64_t step_count() const { return step_count_; }
  const Options& options() const { return opts_; }
  void set_lr(Scalar lr) { opts_.lr = lr; }

 private:
  std::vector<Tensor<Scalar>> params_;
  Options opts_;
  std::vector<Mat<Scalar>> m_, v_;
  std::int64_t step_count_ = 0;
};

}  // namespace medrl
