#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "medrl/core/random.hpp"

namespace medrl {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;

namespace detail {
inline std::atomic<std::uint64_t> node_counter{0};
inline thread_local bool grad_recording_enabled = true;
}  // namespace detail

/// RAII guard that disables tape recording on the current thread. Forward
/// passes under the guard produce constant tensors (no graph, no closures),
/// which is what evaluation rollouts and data preparation want.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_recording_enabled) { detail::grad_recording_enabled = false; }
  ~NoGradGuard() { detail::grad_recording_enabled = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline bool grad_enabled() { return detail::grad_recording_enabled; }

/// Dense matrix-shaped tensor participating in reverse-mode differentiation.
///
/// Values and gradients are Eigen matrices; vectors are n-by-1 columns and a
/// scalar is 1-by-1. Each differentiable operation appends a node to an
/// implicit tape (creation order doubles as topological order), and
/// backward() walks that order in reverse from a scalar loss. Recording is
/// single-threaded per tape; tensors are safe to read concurrently.
template <typename Scalar>
class Tensor {
 public:
  struct Node {
    Mat<Scalar> value;
    Mat<Scalar> grad;  // lazily allocated, same shape as value when present
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    // Pulls the node's accumulated gradient into its parents.
    std::function<void(const Mat<Scalar>&)> backward;

    void ensure_grad() {
      if (grad.rows() != value.rows() || grad.cols() != value.cols())
        grad = Mat<Scalar>::Zero(value.rows(), value.cols());
    }
  };

  Tensor() = default;

  static Tensor parameter(Mat<Scalar> value) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->value = std::move(value);
    t.node_->requires_grad = true;
    t.node_->id = detail::node_counter.fetch_add(1, std::memory_order_relaxed);
    return t;
  }

  static Tensor constant(Mat<Scalar> value) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->value = std::move(value);
    t.node_->id = detail::node_counter.fetch_add(1, std::memory_order_relaxed);
    return t;
  }

  static Tensor scalar_const(Scalar v) {
    Mat<Scalar> m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  bool defined() const { return node_ != nullptr; }
  const Mat<Scalar>& value() const { return node_->value; }
  Mat<Scalar>& mutable_value() { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }
  std::vector<Eigen::Index> shape() const { return {rows(), cols()}; }
  bool requires_grad() const { return node_->requires_grad; }

  Scalar item() const {
    if (size() != 1) throw std::invalid_argument("Tensor::item: tensor is not scalar");
    return node_->value(0, 0);
  }

  /// Accumulated gradient; zero-shaped until a backward pass touches it.
  const Mat<Scalar>& grad() const { return node_->grad; }
  Mat<Scalar> grad_or_zero() const {
    if (node_->grad.size() == 0) return Mat<Scalar>::Zero(rows(), cols());
    return node_->grad;
  }
  void zero_grad() { node_->grad.setZero(node_->value.rows(), node_->value.cols()); }

  /// Reverse-mode accumulation from this scalar into every reachable
  /// parameter. Creation order is a topological order of the recorded graph,
  /// so a reverse id sweep propagates gradients parent-ward exactly once.
  void backward() const {
    if (size() != 1) throw std::invalid_argument("Tensor::backward: root must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
      Node* n = stack.back();
      stack.pop_back();
      order.push_back(n);
      for (const auto& p : n->parents) {
        if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
      }
    }
    std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->id > b->id; });
    node_->ensure_grad();
    node_->grad(0, 0) += Scalar(1);
    for (Node* n : order) {
      if (n->backward) n->backward(n->grad);
    }
  }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> make_op(Mat<Scalar> value, std::vector<Tensor<Scalar>> parents,
                       std::function<void(const Mat<Scalar>&)> backward) {
  bool track = grad_recording_enabled;
  if (track) {
    track = false;
    for (const auto& p : parents)
      if (p.requires_grad()) track = true;
  }
  if (!track) return Tensor<Scalar>::constant(std::move(value));
  Tensor<Scalar> out = Tensor<Scalar>::constant(std::move(value));
  auto node = out.node();
  node->requires_grad = true;
  node->parents.reserve(parents.size());
  for (auto& p : parents) node->parents.push_back(p.node());
  node->backward = std::move(backward);
  return out;
}

template <typename Scalar>
void accumulate(const std::shared_ptr<typename Tensor<Scalar>::Node>& n, const Mat<Scalar>& g) {
  if (!n->requires_grad) return;
  n->ensure_grad();
  n->grad += g;
}

template <typename Scalar>
void check_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "add");
  auto an = a.node(), bn = b.node();
  return detail::make_op<S>(a.value() + b.value(), {a, b}, [an, bn](const Mat<S>& g) {
    detail::accumulate<S>(an, g);
    detail::accumulate<S>(bn, g);
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "sub");
  auto an = a.node(), bn = b.node();
  return detail::make_op<S>(a.value() - b.value(), {a, b}, [an, bn](const Mat<S>& g) {
    detail::accumulate<S>(an, g);
    detail::accumulate<S>(bn, Mat<S>(-g));
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "mul");
  auto an = a.node(), bn = b.node();
  Mat<S> av = a.value(), bv = b.value();
  return detail::make_op<S>(av.cwiseProduct(bv), {a, b}, [an, bn, av, bv](const Mat<S>& g) {
    detail::accumulate<S>(an, g.cwiseProduct(bv));
    detail::accumulate<S>(bn, g.cwiseProduct(av));
  });
}

template <typename S>
Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "div");
  auto an = a.node(), bn = b.node();
  Mat<S> av = a.value(), bv = b.value();
  Mat<S> out = av.cwiseQuotient(bv);
  Mat<S> outv = out;
  return detail::make_op<S>(std::move(out), {a, b}, [an, bn, bv, outv](const Mat<S>& g) {
    detail::accumulate<S>(an, g.cwiseQuotient(bv));
    detail::accumulate<S>(bn, Mat<S>(-g.cwiseProduct(outv).cwiseQuotient(bv)));
  });
}

/// alpha * a + beta, elementwise with scalar coefficients.
template <typename S>
Tensor<S> affine(const Tensor<S>& a, S alpha, S beta) {
  auto an = a.node();
  return detail::make_op<S>((a.value().array() * alpha + beta).matrix(), {a},
                            [an, alpha](const Mat<S>& g) { detail::accumulate<S>(an, Mat<S>(g * alpha)); });
}

// ---------------------------------------------------------------------------
// Linear algebra and shape ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions disagree");
  auto an = a.node(), bn = b.node();
  Mat<S> av = a.value(), bv = b.value();
  return detail::make_op<S>(av * bv, {a, b}, [an, bn, av, bv](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>(g * bv.transpose()));
    detail::accumulate<S>(bn, Mat<S>(av.transpose() * g));
  });
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  auto an = a.node();
  return detail::make_op<S>(a.value().transpose(), {a},
                            [an](const Mat<S>& g) { detail::accumulate<S>(an, Mat<S>(g.transpose())); });
}

template <typename S>
Tensor<S> vstack(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("vstack: column counts disagree");
  Mat<S> out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.value();
  out.bottomRows(b.rows()) = b.value();
  auto an = a.node(), bn = b.node();
  const Eigen::Index ra = a.rows(), rb = b.rows();
  return detail::make_op<S>(std::move(out), {a, b}, [an, bn, ra, rb](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>(g.topRows(ra)));
    detail::accumulate<S>(bn, Mat<S>(g.bottomRows(rb)));
  });
}

template <typename S>
Tensor<S> hstack(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("hstack: row counts disagree");
  Mat<S> out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  auto an = a.node(), bn = b.node();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return detail::make_op<S>(std::move(out), {a, b}, [an, bn, ca, cb](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>(g.leftCols(ca)));
    detail::accumulate<S>(bn, Mat<S>(g.rightCols(cb)));
  });
}

template <typename S>
Tensor<S> rows(const Tensor<S>& a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > a.rows()) throw std::invalid_argument("rows: range out of bounds");
  auto an = a.node();
  const Eigen::Index nrows = a.rows();
  return detail::make_op<S>(a.value().middleRows(first, count), {a}, [an, first, count, nrows](const Mat<S>& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    an->grad.middleRows(first, count) += g;
  });
}

/// Replicate a column vector across `n` columns (bias broadcast).
template <typename S>
Tensor<S> broadcast_cols(const Tensor<S>& v, Eigen::Index n) {
  if (v.cols() != 1) throw std::invalid_argument("broadcast_cols: expected a column vector");
  auto vn = v.node();
  return detail::make_op<S>(v.value().replicate(1, n), {v},
                            [vn](const Mat<S>& g) { detail::accumulate<S>(vn, Mat<S>(g.rowwise().sum())); });
}

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  auto an = a.node();
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return detail::make_op<S>(std::move(out), {a}, [an, r, c](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>(Mat<S>::Constant(r, c, g(0, 0))));
  });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a) {
  return affine(sum(a), S(1) / static_cast<S>(a.size()), S(0));
}

/// Column sums: (R x C) -> (1 x C).
template <typename S>
Tensor<S> colwise_sum(const Tensor<S>& a) {
  auto an = a.node();
  const Eigen::Index r = a.rows();
  return detail::make_op<S>(a.value().colwise().sum(), {a}, [an, r](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>(g.replicate(r, 1)));
  });
}

template <typename S>
Tensor<S> clamp_min(const Tensor<S>& a, S lo) {
  auto an = a.node();
  Mat<S> av = a.value();
  return detail::make_op<S>(av.cwiseMax(lo), {a}, [an, av, lo](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>((av.array() > lo).template cast<S>().matrix().cwiseProduct(g)));
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> tanh_t(const Tensor<S>& a) {
  auto an = a.node();
  Mat<S> y = a.value().array().tanh().matrix();
  Mat<S> yv = y;
  return detail::make_op<S>(std::move(y), {a}, [an, yv](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>(((S(1) - yv.array().square()) * g.array()).matrix()));
  });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  auto an = a.node();
  Mat<S> y = (S(1) / (S(1) + (-a.value().array()).exp())).matrix();
  Mat<S> yv = y;
  return detail::make_op<S>(std::move(y), {a}, [an, yv](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>((yv.array() * (S(1) - yv.array()) * g.array()).matrix()));
  });
}

template <typename S>
Tensor<S> silu(const Tensor<S>& a) {
  auto an = a.node();
  Mat<S> av = a.value();
  Eigen::ArrayXX<S> sig = S(1) / (S(1) + (-av.array()).exp());
  Mat<S> y = (av.array() * sig).matrix();
  return detail::make_op<S>(std::move(y), {a}, [an, av, sig](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>((sig * (S(1) + av.array() * (S(1) - sig)) * g.array()).matrix()));
  });
}

template <typename S>
Tensor<S> softplus(const Tensor<S>& a) {
  auto an = a.node();
  Mat<S> av = a.value();
  Mat<S> y = (av.array().max(S(0)) + (-av.array().abs()).exp().log1p()).matrix();
  return detail::make_op<S>(std::move(y), {a}, [an, av](const Mat<S>& g) {
    Eigen::ArrayXX<S> sig = S(1) / (S(1) + (-av.array()).exp());
    detail::accumulate<S>(an, Mat<S>((sig * g.array()).matrix()));
  });
}

template <typename S>
Tensor<S> exp_t(const Tensor<S>& a) {
  auto an = a.node();
  Mat<S> y = a.value().array().exp().matrix();
  Mat<S> yv = y;
  return detail::make_op<S>(std::move(y), {a}, [an, yv](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>(g.cwiseProduct(yv)));
  });
}

template <typename S>
Tensor<S> log_t(const Tensor<S>& a) {
  auto an = a.node();
  Mat<S> av = a.value();
  if ((av.array() <= S(0)).any()) throw std::domain_error("log_t: nonpositive input");
  return detail::make_op<S>(av.array().log().matrix(), {a}, [an, av](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>(g.cwiseQuotient(av)));
  });
}

template <typename S>
Tensor<S> square(const Tensor<S>& a) {
  auto an = a.node();
  Mat<S> av = a.value();
  return detail::make_op<S>(av.array().square().matrix(), {a}, [an, av](const Mat<S>& g) {
    detail::accumulate<S>(an, Mat<S>((S(2) * av.array() * g.array()).matrix()));
  });
}

// ---------------------------------------------------------------------------
// Softmax-family ops (fused for numerical stability)
// ---------------------------------------------------------------------------

namespace detail {
template <typename S>
Mat<S> softmax_cols_value(const Mat<S>& x) {
  Mat<S> p = (x.rowwise() - x.colwise().maxCoeff()).array().exp().matrix();
  Eigen::RowVectorX<S> z = p.colwise().sum();
  return p.array().rowwise() / z.array();
}
}  // namespace detail

/// Per-column log-softmax over rows.
template <typename S>
Tensor<S> log_softmax_cols(const Tensor<S>& a) {
  auto an = a.node();
  const Mat<S>& x = a.value();
  Eigen::RowVectorX<S> m = x.colwise().maxCoeff();
  Mat<S> shifted = x.rowwise() - m;
  Eigen::RowVectorX<S> lse = shifted.array().exp().colwise().sum().log();
  Mat<S> ls = shifted.rowwise() - lse;
  Mat<S> p = ls.array().exp().matrix();
  return detail::make_op<S>(std::move(ls), {a}, [an, p](const Mat<S>& g) {
    Eigen::RowVectorX<S> gs = g.colwise().sum();
    detail::accumulate<S>(an, Mat<S>(g - (p.array().rowwise() * gs.array()).matrix()));
  });
}

/// Per-column softmax entropy: (A x B) logits -> (1 x B) nats.
template <typename S>
Tensor<S> entropy_cols(const Tensor<S>& logits) {
  auto an = logits.node();
  const Mat<S>& x = logits.value();
  Eigen::RowVectorX<S> m = x.colwise().maxCoeff();
  Mat<S> shifted = x.rowwise() - m;
  Eigen::RowVectorX<S> lse = shifted.array().exp().colwise().sum().log();
  Mat<S> ls = shifted.rowwise() - lse;
  Mat<S> p = ls.array().exp().matrix();
  Mat<S> h = -(p.cwiseProduct(ls)).colwise().sum();
  Mat<S> hv = h;
  return detail::make_op<S>(std::move(h), {logits}, [an, p, ls, hv](const Mat<S>& g) {
    // dH/dz = -p .* (log p + H), broadcast per column
    Mat<S> inner = ls.array().rowwise() + hv.row(0).array();
    Mat<S> dz = -(p.array() * inner.array()).matrix();
    detail::accumulate<S>(an, Mat<S>(dz.array().rowwise() * g.row(0).array()));
  });
}

/// Column-weighted cross-entropy of softmax(logits) against fixed target
/// probabilities: sum_b w_b * ( -sum_r T(r,b) * log softmax(logits)(r,b) ).
template <typename S>
Tensor<S> cross_entropy_cols(const Tensor<S>& logits, const Mat<S>& target_probs,
                             const Eigen::RowVectorX<S>& col_weights) {
  if (target_probs.rows() != logits.rows() || target_probs.cols() != logits.cols())
    throw std::invalid_argument("cross_entropy_cols: target shape mismatch");
  if (col_weights.size() != logits.cols()) throw std::invalid_argument("cross_entropy_cols: weight size mismatch");
  auto an = logits.node();
  const Mat<S>& x = logits.value();
  Eigen::RowVectorX<S> m = x.colwise().maxCoeff();
  Mat<S> shifted = x.rowwise() - m;
  Eigen::RowVectorX<S> lse = shifted.array().exp().colwise().sum().log();
  Mat<S> ls = shifted.rowwise() - lse;
  Mat<S> p = ls.array().exp().matrix();
  Eigen::RowVectorX<S> per_col = -(target_probs.cwiseProduct(ls)).colwise().sum();
  Mat<S> out(1, 1);
  out(0, 0) = per_col.dot(col_weights);
  return detail::make_op<S>(std::move(out), {logits}, [an, p, target_probs, col_weights](const Mat<S>& g) {
    Mat<S> dz = (p - target_probs).array().rowwise() * (col_weights.array() * g(0, 0));
    detail::accumulate<S>(an, dz);
  });
}

/// Elementwise-weighted Bernoulli negative log-likelihood on logits:
/// sum W .* ( softplus(-l) + (1 - T) .* l ).
template <typename S>
Tensor<S> bernoulli_nll(const Tensor<S>& logits, const Mat<S>& targets, const Mat<S>& weights) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols())
    throw std::invalid_argument("bernoulli_nll: target shape mismatch");
  if (weights.rows() != logits.rows() || weights.cols() != logits.cols())
    throw std::invalid_argument("bernoulli_nll: weight shape mismatch");
  auto an = logits.node();
  Mat<S> lv = logits.value();
  Eigen::ArrayXX<S> sp_neg = (-lv.array()).max(S(0)) + (-(-lv.array()).abs()).exp().log1p();
  Mat<S> out(1, 1);
  out(0, 0) = (weights.array() * (sp_neg + (S(1) - targets.array()) * lv.array())).sum();
  return detail::make_op<S>(std::move(out), {logits}, [an, lv, targets, weights](const Mat<S>& g) {
    Eigen::ArrayXX<S> sig = S(1) / (S(1) + (-lv.array()).exp());
    detail::accumulate<S>(an, Mat<S>((weights.array() * (sig - targets.array()) * g(0, 0)).matrix()));
  });
}

// ---------------------------------------------------------------------------
// Layer normalization (per column, over rows)
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias, S eps = S(1e-3)) {
  if (gain.rows() != x.rows() || gain.cols() != 1 || bias.rows() != x.rows() || bias.cols() != 1)
    throw std::invalid_argument("layer_norm: gain/bias must be column vectors matching rows");
  auto xn = x.node(), gn = gain.node(), bn = bias.node();
  const Mat<S>& xv = x.value();
  const Eigen::Index n = xv.rows();
  Eigen::RowVectorX<S> mu = xv.colwise().mean();
  Mat<S> centered = xv.rowwise() - mu;
  Eigen::RowVectorX<S> var = centered.array().square().colwise().sum() / static_cast<S>(n);
  Eigen::RowVectorX<S> inv_std = (var.array() + eps).rsqrt();
  Mat<S> xhat = centered.array().rowwise() * inv_std.array();
  Mat<S> y = (xhat.array().colwise() * gain.value().col(0).array()).colwise() + bias.value().col(0).array();
  Mat<S> gv = gain.value();
  return detail::make_op<S>(std::move(y), {x, gain, bias}, [xn, gn, bn, xhat, inv_std, gv, n](const Mat<S>& g) {
    detail::accumulate<S>(gn, Mat<S>(g.cwiseProduct(xhat).rowwise().sum()));
    detail::accumulate<S>(bn, Mat<S>(g.rowwise().sum()));
    if (!xn->requires_grad) return;
    Mat<S> dxhat = g.array().colwise() * gv.col(0).array();
    Eigen::RowVectorX<S> mean_d = dxhat.colwise().sum() / static_cast<S>(n);
    Eigen::RowVectorX<S> mean_dx = dxhat.cwiseProduct(xhat).colwise().sum() / static_cast<S>(n);
    Mat<S> dx = ((dxhat.rowwise() - mean_d) - (xhat.array().rowwise() * mean_dx.array()).matrix()).array().rowwise() *
                inv_std.array();
    detail::accumulate<S>(xn, dx);
  });
}

// ---------------------------------------------------------------------------
// Factorization-machine interaction and per-feature embedding scaling
// ---------------------------------------------------------------------------

/// Pairwise-interaction pooling over rows of E (features x width):
/// 0.5 * ((sum_d e_d)^2 - sum_d e_d^2), returned as a (width x 1) column.
/// Algebraically equals sum_{i<j} e_i .* e_j.
template <typename S>
Tensor<S> fm_rows(const Tensor<S>& e) {
  auto en = e.node();
  Mat<S> ev = e.value();
  Eigen::RowVectorX<S> s = ev.colwise().sum();
  Eigen::RowVectorX<S> q = ev.array().square().colwise().sum();
  Mat<S> out = (S(0.5) * (s.array().square() - q.array())).matrix().transpose();
  return detail::make_op<S>(std::move(out), {e}, [en, ev, s](const Mat<S>& g) {
    // dFM/dE(d,:) = g^T .* (s - E(d,:))
    Mat<S> diff = (-ev).rowwise() + s;
    detail::accumulate<S>(en, Mat<S>(diff.array().rowwise() * g.col(0).transpose().array()));
  });
}

/// diag(v) * W — scales row d of W by v(d). Used for value/interval
/// embeddings where a scalar feature multiplies its embedding row.
template <typename S>
Tensor<S> rowscale(const Tensor<S>& w, const Tensor<S>& v) {
  if (v.cols() != 1 || v.rows() != w.rows()) throw std::invalid_argument("rowscale: v must be (rows(W) x 1)");
  auto wn = w.node(), vn = v.node();
  Mat<S> wv = w.value(), vv = v.value();
  Mat<S> out = wv.array().colwise() * vv.col(0).array();
  return detail::make_op<S>(std::move(out), {w, v}, [wn, vn, wv, vv](const Mat<S>& g) {
    detail::accumulate<S>(wn, Mat<S>(g.array().colwise() * vv.col(0).array()));
    detail::accumulate<S>(vn, Mat<S>(g.cwiseProduct(wv).rowwise().sum()));
  });
}

// ---------------------------------------------------------------------------
// Parameter initialization helpers
// ---------------------------------------------------------------------------

template <typename S>
Mat<S> glorot_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<S>(rng.uniform(-bound, bound));
  return m;
}

template <typename S>
Mat<S> normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Mat<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<S>(rng.normal(0.0, stddev));
  return m;
}

/// Ordered name -> tensor registry shared by optimizers and checkpoints.
template <typename S>
struct ParamMap {
  std::vector<std::pair<std::string, Tensor<S>>> items;

  Tensor<S> add(const std::string& name, Mat<S> init) {
    Tensor<S> t = Tensor<S>::parameter(std::move(init));
    items.emplace_back(name, t);
    return t;
  }

  std::vector<Tensor<S>> tensors() const {
    std::vector<Tensor<S>> out;
    out.reserve(items.size());
    for (const auto& [k, v] : items) out.push_back(v);
    return out;
  }

  Tensor<S> find(const std::string& name) const {
    for (const auto& [k, v] : items)
      if (k == name) return v;
    throw std::invalid_argument("ParamMap::find: no parameter named " + name);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : items) n += static_cast<std::size_t>(v.size());
    return n;
  }

  void zero_grad() {
    for (auto& [k, v] : items) v.zero_grad();
  }
};

}  // namespace medrl
