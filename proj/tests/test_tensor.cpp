#include <doctest.h>

#include <cmath>

#include "medrl/core/adam.hpp"
#include "medrl/core/gradcheck.hpp"
#include "medrl/core/random.hpp"
#include "medrl/core/tensor.hpp"

using namespace medrl;

namespace {

Mat<double> random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Mat<double> m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("elementwise ops match expected values") {
  auto a = Tensor<double>::constant((Mat<double>(2, 2) << 1, 2, 3, 4).finished());
  auto b = Tensor<double>::constant((Mat<double>(2, 2) << 5, 6, 7, 8).finished());
  CHECK(add(a, b).value()(1, 1) == 12.0);
  CHECK(sub(b, a).value()(0, 0) == 4.0);
  CHECK(mul(a, b).value()(1, 0) == 21.0);
  CHECK(div(b, a).value()(0, 1) == 3.0);
  CHECK(affine(a, 2.0, 1.0).value()(1, 1) == 9.0);
  CHECK_THROWS_AS(add(a, Tensor<double>::constant(Mat<double>::Zero(3, 2))), std::invalid_argument);
}

TEST_CASE("backward through a small expression gives exact gradients") {
  // f(x) = x*x at x=3 -> df/dx = 6
  auto x = Tensor<double>::parameter(Mat<double>::Constant(1, 1, 3.0));
  auto loss = mul(x, x);
  loss.backward();
  CHECK(x.grad()(0, 0) == doctest::Approx(6.0).epsilon(1e-14));

  // constant function: zero gradient everywhere
  auto y = Tensor<double>::parameter(Mat<double>::Constant(1, 1, 2.0));
  auto c = Tensor<double>::scalar_const(7.0);
  auto loss2 = add(mul(y, Tensor<double>::scalar_const(0.0)), c);
  loss2.backward();
  CHECK(y.grad_or_zero()(0, 0) == 0.0);
}

TEST_CASE("grad_check validates every differentiable op") {
  Rng rng(17);
  auto check = [&](const char* name, auto make_loss, std::vector<Tensor<double>> params) {
    const double err = grad_check<double>(make_loss, params);
    INFO("op " << name << " grad error " << err);
    CHECK(err < 1e-4);
  };

  auto a = Tensor<double>::parameter(random_mat(rng, 3, 4));
  auto b = Tensor<double>::parameter(random_mat(rng, 3, 4));
  check("add/mul/sub", [&] { return sum(mul(add(a, b), sub(a, b))); }, {a, b});
  check("div", [&] { return sum(div(a, affine(square(b), 1.0, 1.0))); }, {a, b});

  auto w = Tensor<double>::parameter(random_mat(rng, 4, 3));
  auto x = Tensor<double>::parameter(random_mat(rng, 3, 5));
  check("matmul", [&] { return sum(matmul(w, x)); }, {w, x});
  check("transpose", [&] { return sum(square(transpose(x))); }, {x});
  check("vstack/rows", [&] { return sum(square(rows(vstack(w, transpose(x)), 2, 4))); }, {w, x});
  check("hstack", [&] { return sum(square(hstack(a, b))); }, {a, b});

  auto v = Tensor<double>::parameter(random_mat(rng, 4, 1));
  check("broadcast_cols", [&] { return sum(square(add(matmul(w, x), broadcast_cols(v, 5)))); }, {w, v});
  check("colwise_sum", [&] { return sum(square(colwise_sum(a))); }, {a});
  check("clamp_min", [&] { return sum(clamp_min(a, 0.1)); }, {a});

  check("tanh", [&] { return sum(tanh_t(a)); }, {a});
  check("sigmoid", [&] { return sum(sigmoid(a)); }, {a});
  check("silu", [&] { return sum(silu(a)); }, {a});
  check("softplus", [&] { return sum(softplus(a)); }, {a});
  check("exp", [&] { return sum(exp_t(a)); }, {a});
  auto pos = Tensor<double>::parameter((random_mat(rng, 3, 3).array().abs() + 0.5).matrix());
  check("log", [&] { return sum(log_t(pos)); }, {pos});
  check("square", [&] { return sum(square(a)); }, {a});

  auto logits = Tensor<double>::parameter(random_mat(rng, 5, 4));
  check("log_softmax", [&] { return sum(mul(log_softmax_cols(logits), logits)); }, {logits});
  check("entropy", [&] { return sum(entropy_cols(logits)); }, {logits});

  Mat<double> targets = random_mat(rng, 5, 4).array().abs().matrix();
  for (int j = 0; j < 4; ++j) targets.col(j) /= targets.col(j).sum();
  Eigen::RowVectorXd colw = Eigen::RowVectorXd::LinSpaced(4, 0.5, 2.0);
  check("cross_entropy_cols", [&] { return cross_entropy_cols(logits, targets, colw); }, {logits});

  Mat<double> bern_t = (random_mat(rng, 3, 4).array() > 0).cast<double>().matrix();
  Mat<double> bern_w = Mat<double>::Constant(3, 4, 0.7);
  check("bernoulli_nll", [&] { return bernoulli_nll(a, bern_t, bern_w); }, {a});

  auto gain = Tensor<double>::parameter((random_mat(rng, 3, 1).array().abs() + 0.5).matrix());
  auto bias = Tensor<double>::parameter(random_mat(rng, 3, 1));
  check("layer_norm", [&] { return sum(square(layer_norm(a, gain, bias))); }, {a, gain, bias});

  auto e = Tensor<double>::parameter(random_mat(rng, 5, 6));
  check("fm_rows", [&] { return sum(square(fm_rows(e))); }, {e});

  auto w2 = Tensor<double>::parameter(random_mat(rng, 5, 3));
  auto scale = Tensor<double>::parameter(random_mat(rng, 5, 1));
  check("rowscale", [&] { return sum(square(rowscale(w2, scale))); }, {w2, scale});
}

TEST_CASE("grad_check rejects nondeterministic functions") {
  auto p = Tensor<double>::parameter(Mat<double>::Constant(1, 1, 1.0));
  int calls = 0;
  auto f = [&]() {
    ++calls;
    return affine(p, 1.0, static_cast<double>(calls));
  };
  CHECK_THROWS_AS(grad_check<double>(f, {p}), std::runtime_error);
}

TEST_CASE("gradient accumulates across reuse of the same tensor") {
  auto x = Tensor<double>::parameter(Mat<double>::Constant(1, 1, 2.0));
  auto y = add(mul(x, x), x);  // x^2 + x -> 2x + 1 = 5
  y.backward();
  CHECK(x.grad()(0, 0) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("NoGradGuard suppresses graph recording") {
  auto x = Tensor<double>::parameter(Mat<double>::Constant(1, 1, 2.0));
  NoGradGuard guard;
  auto y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("adam first step moves a scalar by about lr") {
  auto p = Tensor<double>::parameter(Mat<double>::Constant(1, 1, 1.0));
  AdamOptimizer<double> opt({p}, 1e-3);
  p.zero_grad();
  auto loss = p;  // d loss / d p = 1
  loss.backward();
  opt.step();
  // bias-corrected first step: lr * 1 / (1 + eps)
  CHECK(p.value()(0, 0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
}

TEST_CASE("adam leaves parameters untouched under zero gradient") {
  Rng rng(3);
  auto p = Tensor<double>::parameter(random_mat(rng, 3, 3));
  const Mat<double> before = p.value();
  AdamOptimizer<double> opt({p}, 1e-2);
  opt.zero_grad();
  opt.step();
  CHECK((p.value() - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("global-norm clipping rescales large gradients") {
  auto p = Tensor<double>::parameter(Mat<double>::Zero(1, 1));
  AdamOptimizer<double>::Options opts;
  opts.lr = 1.0;
  opts.clip_norm = 100.0;
  AdamOptimizer<double> opt({p}, opts);
  p.zero_grad();
  affine(p, 1000.0, 0.0).backward();
  CHECK(p.grad()(0, 0) == doctest::Approx(1000.0));
  opt.step();
  // with g clipped to 100, first Adam step is -lr * sign(g) after bias correction
  CHECK(p.value()(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("adam rejects mismatched gradient shapes") {
  auto p = Tensor<double>::parameter(Mat<double>::Zero(2, 2));
  AdamOptimizer<double> opt({p}, 1e-3);
  p.node()->grad = Mat<double>::Zero(3, 3);  // corrupt the slot deliberately
  CHECK_THROWS_AS(opt.step(), std::invalid_argument);
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(a.next_u64() != c.next_u64());
  Rng d(7);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += d.normal();
  mean /= n;
  CHECK(std::abs(mean) < 0.03);
}
