#pragma once

#include <stdexcept>
#include <string>

#include "medrl/core/random.hpp"
#include "medrl/core/tensor.hpp"

namespace medrl {

/// Adaptive feature integration: each feature contributes a value embedding
/// scaled by its (zero-filled) observation and an interval embedding scaled
/// by the time since it was last observed. A factorization-machine pooling
/// over features captures pairwise interactions, and a linear skip path
/// plus sigmoid produces the processed observation vector.
///
/// An optional mask channel embeds the mask bits as a third block (off by
/// default; the intervals already carry the missingness signal).
template <typename Scalar>
struct AfiParams {
  int feature_dim = 0;   // D
  int embed_width = 0;   // k
  bool mask_channel = false;

  Tensor<Scalar> w_value;     // D x k
  Tensor<Scalar> w_interval;  // D x k
  Tensor<Scalar> w_mask;      // D x k, only when mask_channel
  Tensor<Scalar> w_linear;    // out x D skip projection
  Tensor<Scalar> b_linear;    // out x 1

  int output_width() const { return (mask_channel ? 3 : 2) * embed_width; }

  static AfiParams init(int feature_dim, int embed_width, Rng& rng, ParamMap<Scalar>& params,
                        bool mask_channel = false, const std::string& prefix = "afi/") {
    AfiParams p;
    p.feature_dim = feature_dim;
    p.embed_width = embed_width;
    p.mask_channel = mask_channel;
    p.w_value = params.add(prefix + "w_value", glorot_uniform<Scalar>(rng, feature_dim, embed_width));
    p.w_interval = params.add(prefix + "w_interval", glorot_uniform<Scalar>(rng, feature_dim, embed_width));
    if (mask_channel) p.w_mask = params.add(prefix + "w_mask", glorot_uniform<Scalar>(rng, feature_dim, embed_width));
    p.w_linear = params.add(prefix + "w_linear", glorot_uniform<Scalar>(rng, p.output_width(), feature_dim));
    p.b_linear = params.add(prefix + "b_linear", Mat<Scalar>::Zero(p.output_width(), 1));
    return p;
  }
};

namespace afi {

/// Zero-fills missing entries so they contribute nothing to projections;
/// the mask is the source of truth for missingness.
template <typename S>
Mat<S> zero_fill(const Mat<S>& obs, const Mat<S>& mask) {
  return (mask.array() == S(1)).select(obs, Mat<S>::Zero(obs.rows(), obs.cols()));
}

/// Per-feature joint embedding E = [E_o | E_delta] of one step: row d is
/// the concatenation of o_d * w_value[d] and delta_d * w_interval[d].
template <typename S>
Tensor<S> embed(const Tensor<S>& obs_filled, const Tensor<S>& delta, const AfiParams<S>& params) {
  if (obs_filled.rows() != params.feature_dim || obs_filled.cols() != 1 || delta.rows() != params.feature_dim ||
      delta.cols() != 1)
    throw std::invalid_argument("afi::embed: inputs must be (D x 1)");
  Tensor<S> e = hstack(rowscale(params.w_value, obs_filled), rowscale(params.w_interval, delta));
  if (params.mask_channel) throw std::invalid_argument("afi::embed: mask channel uses embed_with_mask");
  return e;
}

template <typename S>
Tensor<S> embed_with_mask(const Tensor<S>& obs_filled, const Tensor<S>& delta, const Tensor<S>& mask,
                          const AfiParams<S>& params) {
  Tensor<S> e = hstack(rowscale(params.w_value, obs_filled), rowscale(params.w_interval, delta));
  return hstack(e, rowscale(params.w_mask, mask));
}

/// Pairwise-interaction pooling over the feature rows of E; equals
/// sum_{i<j} e_i .* e_j elementwise.
template <typename S>
Tensor<S> fm(const Tensor<S>& e) {
  return fm_rows(e);
}

/// Full single-step encoder: sigmoid(Linear(o) + FM(E)). Output components
/// lie in (0, 1).
template <typename S>
Tensor<S> encode(const Tensor<S>& obs_filled, const Tensor<S>& delta, const Tensor<S>& mask,
                 const AfiParams<S>& params) {
  Tensor<S> e = params.mask_channel ? embed_with_mask(obs_filled, delta, mask, params)
                                    : embed(obs_filled, delta, params);
  Tensor<S> interactions = fm(e);
  Tensor<S> skip = add(matmul(params.w_linear, obs_filled), params.b_linear);
  return sigmoid(add(skip, interactions));
}

/// Batched encoder over columns; algebraically identical to encoding each
/// column with encode(). Uses the sum-square identity per embedding block,
/// so the cost is three matmuls per block instead of a D x width tensor per
/// sample.
template <typename S>
Tensor<S> encode_batch(const Tensor<S>& obs_filled, const Tensor<S>& delta, const Tensor<S>& mask,
                       const AfiParams<S>& params) {
  const Eigen::Index batch = obs_filled.cols();
  if (obs_filled.rows() != params.feature_dim || delta.rows() != params.feature_dim)
    throw std::invalid_argument("afi::encode_batch: inputs must be (D x B)");

  auto block = [&](const Tensor<S>& w, const Tensor<S>& x) {
    Tensor<S> wt_x = matmul(transpose(w), x);              // k x B
    Tensor<S> sq_term = matmul(transpose(square(w)), square(x));
    return affine(sub(square(wt_x), sq_term), S(0.5), S(0));
  };

  Tensor<S> interactions = vstack(block(params.w_value, obs_filled), block(params.w_interval, delta));
  if (params.mask_channel) interactions = vstack(interactions, block(params.w_mask, mask));
  Tensor<S> skip = add(matmul(params.w_linear, obs_filled), broadcast_cols(params.b_linear, batch));
  return sigmoid(add(skip, interactions));
}

/// Zero-impute baseline without interval or interaction terms (the
/// imputation-style encoder the full model is compared against).
template <typename S>
Tensor<S> encode_plain(const Tensor<S>& obs_filled, const AfiParams<S>& params) {
  const Eigen::Index batch = obs_filled.cols();
  return sigmoid(add(matmul(params.w_linear, obs_filled), broadcast_cols(params.b_linear, batch)));
}

}  // namespace afi

}  // namespace medrl
