#pragma once

#include <string>
#include <vector>

#include "medrl/core/random.hpp"
#include "medrl/core/tensor.hpp"

namespace medrl {

template <typename S>
struct Linear {
  Tensor<S> w;  // out x in
  Tensor<S> b;  // out x 1

  static Linear init(Eigen::Index in, Eigen::Index out, Rng& rng, ParamMap<S>& params, const std::string& name) {
    Linear l;
    l.w = params.add(name + "/w", glorot_uniform<S>(rng, out, in));
    l.b = params.add(name + "/b", Mat<S>::Zero(out, 1));
    return l;
  }

  Tensor<S> operator()(const Tensor<S>& x) const { return add(matmul(w, x), broadcast_cols(b, x.cols())); }
};

/// Linear -> LayerNorm -> SiLU.
template <typename S>
struct DenseBlock {
  Linear<S> linear;
  Tensor<S> ln_gain, ln_bias;

  static DenseBlock init(Eigen::Index in, Eigen::Index out, Rng& rng, ParamMap<S>& params, const std::string& name) {
    DenseBlock blk;
    blk.linear = Linear<S>::init(in, out, rng, params, name);
    blk.ln_gain = params.add(name + "/ln_gain", Mat<S>::Ones(out, 1));
    blk.ln_bias = params.add(name + "/ln_bias", Mat<S>::Zero(out, 1));
    return blk;
  }

  Tensor<S> operator()(const Tensor<S>& x) const { return silu(layer_norm(linear(x), ln_gain, ln_bias)); }
};

/// MLP with `n_hidden` DenseBlocks and a plain linear output head.
template <typename S>
struct Mlp {
  std::vector<DenseBlock<S>> blocks;
  Linear<S> out;

  static Mlp init(Eigen::Index in, Eigen::Index hidden, int n_hidden, Eigen::Index out_dim, Rng& rng,
                  ParamMap<S>& params, const std::string& name) {
    Mlp mlp;
    Eigen::Index width = in;
    for (int i = 0; i < n_hidden; ++i) {
      mlp.blocks.push_back(DenseBlock<S>::init(width, hidden, rng, params, name + "/h" + std::to_string(i)));
      width = hidden;
    }
    mlp.out = Linear<S>::init(width, out_dim, rng, params, name + "/out");
    return mlp;
  }

  Tensor<S> operator()(Tensor<S> x) const {
    for (const auto& blk : blocks) x = blk(x);
    return out(x);
  }
};

/// GRU cell, update-gate convention h' = u .* h + (1-u) .* n with the reset
/// gate applied after the hidden matmul so all three gates share one GEMM.
template <typename S>
struct GruCell {
  Eigen::Index hidden = 0;
  Tensor<S> w_x, w_h;  // (3h x in), (3h x h)
  Tensor<S> b_x, b_h;  // (3h x 1)

  static GruCell init(Eigen::Index in, Eigen::Index h, Rng& rng, ParamMap<S>& params, const std::string& name) {
    GruCell cell;
    cell.hidden = h;
    cell.w_x = params.add(name + "/w_x", glorot_uniform<S>(rng, 3 * h, in));
    cell.w_h = params.add(name + "/w_h", glorot_uniform<S>(rng, 3 * h, h));
    cell.b_x = params.add(name + "/b_x", Mat<S>::Zero(3 * h, 1));
    cell.b_h = params.add(name + "/b_h", Mat<S>::Zero(3 * h, 1));
    return cell;
  }

  Tensor<S> operator()(const Tensor<S>& x, const Tensor<S>& h) const {
    const Eigen::Index batch = x.cols();
    Tensor<S> gx = add(matmul(w_x, x), broadcast_cols(b_x, batch));
    Tensor<S> gh = add(matmul(w_h, h), broadcast_cols(b_h, batch));
    Tensor<S> reset = sigmoid(add(rows(gx, 0, hidden), rows(gh, 0, hidden)));
    Tensor<S> update = sigmoid(add(rows(gx, hidden, hidden), rows(gh, hidden, hidden)));
    Tensor<S> cand = tanh_t(add(rows(gx, 2 * hidden, hidden), mul(reset, rows(gh, 2 * hidden, hidden))));
    return add(mul(update, h), mul(affine(update, S(-1), S(1)), cand));
  }
};

/// LSTM cell (input/forget/cell/output gate packing).
template <typename S>
struct LstmCell {
  Eigen::Index hidden = 0;
  Tensor<S> w_x, w_h;  // (4h x in), (4h x h)
  Tensor<S> b;         // (4h x 1)

  static LstmCell init(Eigen::Index in, Eigen::Index h, Rng& rng, ParamMap<S>& params, const std::string& name) {
    LstmCell cell;
    cell.hidden = h;
    cell.w_x = params.add(name + "/w_x", glorot_uniform<S>(rng, 4 * h, in));
    cell.w_h = params.add(name + "/w_h", glorot_uniform<S>(rng, 4 * h, h));
    Mat<S> bias = Mat<S>::Zero(4 * h, 1);
    bias.middleRows(h, h).setOnes();  // forget-gate bias
    cell.b = params.add(name + "/b", std::move(bias));
    return cell;
  }

  struct State {
    Tensor<S> h, c;
  };

  State operator()(const Tensor<S>& x, const State& prev) const {
    const Eigen::Index batch = x.cols();
    Tensor<S> gates = add(add(matmul(w_x, x), matmul(w_h, prev.h)), broadcast_cols(b, batch));
    Tensor<S> in_gate = sigmoid(rows(gates, 0, hidden));
    Tensor<S> forget = sigmoid(rows(gates, hidden, hidden));
    Tensor<S> cand = tanh_t(rows(gates, 2 * hidden, hidden));
    Tensor<S> out_gate = sigmoid(rows(gates, 3 * hidden, hidden));
    Tensor<S> c = add(mul(forget, prev.c), mul(in_gate, cand));
    return {mul(out_gate, tanh_t(c)), c};
  }
};

}  // namespace medrl
