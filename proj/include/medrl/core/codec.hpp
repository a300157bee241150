#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace medrl {

/// symlog(x) = sign(x) * ln(1 + |x|). Compresses large magnitudes while
/// staying identity-like near zero; exact inverse is symexp.
template <typename Scalar>
Scalar symlog(Scalar x) {
  if (!std::isfinite(x)) throw std::domain_error("symlog: non-finite input");
  return x >= Scalar(0) ? std::log1p(x) : -std::log1p(-x);
}

template <typename Scalar>
Scalar symexp(Scalar y) {
  if (!std::isfinite(y)) throw std::domain_error("symexp: non-finite input");
  return y >= Scalar(0) ? std::expm1(y) : -std::expm1(-y);
}

/// Two-hot distributional codec over a monotone grid of bucket centers laid
/// out uniformly in symlog space, symmetric about zero. encode() places mass
/// on the two buckets bracketing symlog(v); decode() is symexp of the
/// probability-weighted center, so decode(encode(v)) == v inside the range.
template <typename Scalar>
class TwoHotCodec {
 public:
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;

  explicit TwoHotCodec(int bucket_count = 255, Scalar value_limit = Scalar(20)) {
    if (bucket_count < 2) throw std::invalid_argument("TwoHotCodec: bucket_count must be >= 2");
    if (!(value_limit > Scalar(0))) throw std::invalid_argument("TwoHotCodec: value_limit must be positive");
    const Scalar hi = symlog(value_limit);
    centers_ = Vec::LinSpaced(bucket_count, -hi, hi);
  }

  int bucket_count() const { return static_cast<int>(centers_.size()); }
  const Vec& centers() const { return centers_; }
  Scalar min_value() const { return symexp(centers_(0)); }
  Scalar max_value() const { return symexp(centers_(centers_.size() - 1)); }

  /// Probability vector with at most two adjacent nonzero entries.
  Vec encode(Scalar v) const {
    const int n = bucket_count();
    Scalar x = symlog(v);
    x = std::clamp(x, centers_(0), centers_(n - 1));
    Vec p = Vec::Zero(n);
    // index of the last center <= x
    const Scalar* begin = centers_.data();
    int hi = static_cast<int>(std::upper_bound(begin, begin + n, x) - begin);
    if (hi <= 0) {
      p(0) = Scalar(1);
      return p;
    }
    if (hi >= n) {
      p(n - 1) = Scalar(1);
      return p;
    }
    const int lo = hi - 1;
    const Scalar width = centers_(hi) - centers_(lo);
    const Scalar w_hi = (x - centers_(lo)) / width;
    p(lo) = Scalar(1) - w_hi;
    p(hi) = w_hi;
    return p;
  }

  /// Expects a normalized probability vector; tolerance 1e-6 on the sum.
  Scalar decode(const Vec& p) const {
    if (p.size() != centers_.size()) throw std::invalid_argument("TwoHotCodec::decode: size mismatch");
    const Scalar total = p.sum();
    if (std::abs(total - Scalar(1)) > Scalar(1e-6))
      throw std::invalid_argument("TwoHotCodec::decode: probabilities not normalized");
    return symexp(Scalar(p.dot(centers_)));
  }

  /// Expected value of a softmax distribution given raw logits.
  Scalar decode_logits(const Vec& logits) const {
    if (logits.size() != centers_.size()) throw std::invalid_argument("TwoHotCodec::decode_logits: size mismatch");
    const Scalar m = logits.maxCoeff();
    Vec p = (logits.array() - m).exp();
    p /= p.sum();
    return symexp(Scalar(p.dot(centers_)));
  }

 private:
  Vec centers_;
};

}  // namespace medrl
