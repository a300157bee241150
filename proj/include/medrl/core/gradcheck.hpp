#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "medrl/core/tensor.hpp"

namespace medrl {

/// Compares reverse-mode gradients of a scalar-valued function against
/// central finite differences. `f` must be deterministic (re-seed any
/// randomness inside) and must rebuild its graph from the current parameter
/// values on every call. Returns max over elements of
/// |g_ad - g_fd| / (|g_ad| + |g_fd| + 1e-8). Intended for 64-bit mode.
template <typename Scalar>
double grad_check(const std::function<Tensor<Scalar>()>& f, const std::vector<Tensor<Scalar>>& params,
                  double step = 1e-5) {
  const double v0 = static_cast<double>(f().item());
  const double v1 = static_cast<double>(f().item());
  if (v0 != v1) throw std::runtime_error("grad_check: function is not deterministic");

  for (auto p : params) p.zero_grad();
  Tensor<Scalar> loss = f();
  loss.backward();
  std::vector<Mat<Scalar>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad_or_zero());

  double max_err = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<Scalar> p = params[k];
    Mat<Scalar>& vals = p.mutable_value();
    for (Eigen::Index j = 0; j < vals.cols(); ++j) {
      for (Eigen::Index i = 0; i < vals.rows(); ++i) {
        const Scalar saved = vals(i, j);
        vals(i, j) = saved + static_cast<Scalar>(step);
        const double fp = static_cast<double>(f().item());
        vals(i, j) = saved - static_cast<Scalar>(step);
        const double fm = static_cast<double>(f().item());
        vals(i, j) = saved;
        const double fd = (fp - fm) / (2.0 * step);
        const double ad = static_cast<double>(analytic[k](i, j));
        const double err = std::abs(ad - fd) / (std::abs(ad) + std::abs(fd) + 1e-8);
        if (err > max_err) max_err = err;
      }
    }
  }
  for (auto p : params) p.zero_grad();
  return max_err;
}

}  // namespace medrl
