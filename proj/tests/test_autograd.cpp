#include <gtest/gtest.h>

#include "meshmamba/error.hpp"
#include "meshmamba/nn/autograd.hpp"
#include "meshmamba/nn/parameters.hpp"
#include "meshmamba/rng.hpp"
#include "test_util.hpp"

using namespace meshmamba;
using namespace meshmamba::nn;
using meshmamba::testkit::gradient_check;

namespace {

Var leaf(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return Var(std::move(m), true);
}

Matrix weights_like(const Var& v, Rng& rng) {
  Matrix w(v.rows(), v.cols());
  for (double& x : w.data) x = rng.uniform(-1, 1);
  return w;
}

// Projects the op output on fixed random weights so every output entry
// contributes to the checked scalar.
template <typename F>
double check_op(F op, std::vector<Var> leaves, std::uint64_t seed = 1) {
  Rng rng(seed);
  const Matrix w = weights_like(op(), rng);
  return gradient_check([&] { return weighted_sum(op(), w); }, leaves).max_rel;
}

}  // namespace

TEST(Autograd, Matmul) {
  Rng rng(1);
  Var a = leaf(3, 4, rng), b = leaf(4, 2, rng);
  EXPECT_LT(check_op([&] { return matmul(a, b); }, {a, b}), 1e-7);
}

TEST(Autograd, AddAndBroadcasts) {
  Rng rng(2);
  Var a = leaf(3, 4, rng), b = leaf(3, 4, rng), r = leaf(1, 4, rng);
  EXPECT_LT(check_op([&] { return add(a, b); }, {a, b}), 1e-7);
  EXPECT_LT(check_op([&] { return add_row(a, r); }, {a, r}), 1e-7);
  EXPECT_LT(check_op([&] { return mul_row(a, r); }, {a, r}), 1e-7);
  EXPECT_LT(check_op([&] { return scale(a, -2.5); }, {a}), 1e-7);
}

TEST(Autograd, Activations) {
  Rng rng(3);
  Var a = leaf(4, 5, rng, -3, 3);
  EXPECT_LT(check_op([&] { return silu(a); }, {a}), 1e-6);
  EXPECT_LT(check_op([&] { return softplus(a); }, {a}), 1e-6);
  EXPECT_LT(check_op([&] { return softmax_rows(a); }, {a}), 1e-6);
  EXPECT_LT(check_op([&] { return standardize_rows(a, 1e-5); }, {a}), 1e-5);
}

TEST(Autograd, ReluAwayFromKink) {
  Rng rng(4);
  Var a = leaf(3, 3, rng);
  for (double& v : a.mutable_value().data)
    if (std::abs(v) < 0.1) v = 0.5;
  EXPECT_LT(check_op([&] { return relu(a); }, {a}), 1e-7);
}

TEST(Autograd, ShapeOps) {
  Rng rng(5);
  Var a = leaf(5, 3, rng), b = leaf(2, 3, rng), c = leaf(5, 2, rng);
  EXPECT_LT(check_op([&] { return concat_rows({a, b}); }, {a, b}), 1e-7);
  EXPECT_LT(check_op([&] { return concat_cols({a, c}); }, {a, c}), 1e-7);
  EXPECT_LT(check_op([&] { return slice_rows(a, 1, 4); }, {a}), 1e-7);
  EXPECT_LT(check_op([&] { return reverse_rows(a); }, {a}), 1e-7);
  EXPECT_LT(check_op([&] { return gather_rows(a, {4, 0, 0, 2}); }, {a}), 1e-7);
}

TEST(Autograd, Segments) {
  Rng rng(6);
  Var a = leaf(6, 3, rng);
  const std::vector<std::vector<int>> seg{{0, 1, 2}, {2, 3}, {5, 5, 4}};
  EXPECT_LT(check_op([&] { return segment_mean(a, seg); }, {a}), 1e-7);
  EXPECT_LT(check_op([&] { return segment_max(a, seg); }, {a}), 1e-7);
}

TEST(Autograd, SegmentMaxRoutesToFirst) {
  Var a(Matrix(3, 1, std::vector<double>{2.0, 2.0, 1.0}), true);
  Var y = segment_max(a, {{0, 1, 2}});
  weighted_sum(y, Matrix(1, 1, 1.0)).backward();
  EXPECT_EQ(a.grad().data, (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(Autograd, Sparse) {
  Rng rng(7);
  auto s = std::make_shared<SparseMatrix>();
  s->cols = 4;
  s->append_row({{0, 0.5}, {3, 0.5}});
  s->append_row({});
  s->append_row({{1, 1.0}, {2, -2.0}, {3, 0.25}});
  Var a = leaf(4, 3, rng);
  EXPECT_LT(check_op([&] { return spmm(s, a); }, {a}), 1e-7);
}

TEST(Autograd, L1Loss) {
  Rng rng(8);
  Var a = leaf(4, 2, rng);
  Matrix target(4, 2);
  for (std::size_t i = 0; i < target.size(); ++i) target.data[i] = a.value().data[i] + (i % 2 ? 0.3 : -0.3);
  EXPECT_LT(gradient_check([&] { return l1_loss(a, target); }, {a}).max_rel, 1e-7);
}

TEST(Autograd, SharedSubexpressionAccumulates) {
  Var x(Matrix(1, 1, 3.0), true);
  Var y = matmul(x, x);           // x^2
  Var z = add(y, scale(x, 4.0));  // x^2 + 4x
  weighted_sum(z, Matrix(1, 1, 1.0)).backward();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 10.0);
}

TEST(Autograd, Composite) {
  Rng rng(9);
  Var x = leaf(6, 4, rng), w = leaf(4, 4, rng), r = leaf(1, 4, rng);
  auto f = [&] {
    Var h = silu(add_row(matmul(x, w), r));
    Var n = standardize_rows(h, 1e-5);
    return concat_rows({slice_rows(n, 0, 1), reverse_rows(softmax_rows(n))});
  };
  EXPECT_LT(check_op(f, {x, w, r}), 1e-5);
}

TEST(Autograd, NoGradRecordsNothing) {
  Var a(Matrix(2, 2, 1.0), true);
  NoGradGuard guard;
  Var b = matmul(a, a);
  EXPECT_FALSE(b.requires_grad());
  EXPECT_TRUE(b.node()->inputs.empty());
}

TEST(Autograd, ShapeMismatchIsError) {
  Var a(Matrix(2, 3)), b(Matrix(2, 3));
  EXPECT_THROW(matmul(a, b), Error);
}

TEST(Autograd, FlopCounting) {
  reset_flops();
  Var a(Matrix(3, 4)), b(Matrix(4, 5));
  matmul(a, b);
  EXPECT_EQ(flop_count(), 2u * 3 * 4 * 5);
}

TEST(AdamW, FirstStepMatchesClosedForm) {
  ParameterSet params;
  Var p = params.add("p", Matrix(1, 2, std::vector<double>{1.0, -2.0}));
  p.node()->grad = Matrix(1, 2, std::vector<double>{0.5, -0.1});
  AdamW opt({0.9, 0.999, 1e-8, 0.01});
  opt.step(params, 0.1);
  // Bias-corrected first step: m_hat = g, v_hat = g^2, so the update is sign(g).
  EXPECT_NEAR(p.value()(0, 0), 1.0 - 0.1 * (0.5 / (0.5 + 1e-8) + 0.01 * 1.0), 1e-12);
  EXPECT_NEAR(p.value()(0, 1), -2.0 - 0.1 * (-0.1 / (0.1 + 1e-8) + 0.01 * -2.0), 1e-12);
}

TEST(AdamW, MinimizesQuadratic) {
  ParameterSet params;
  Var p = params.add("p", Matrix(1, 3, std::vector<double>{3.0, -1.0, 0.5}));
  AdamW opt({0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 2000; ++i) {
    params.zero_grad();
    Var sq = mul_row(p, p);
    weighted_sum(sq, Matrix(1, 3, 1.0)).backward();
    opt.step(params, 0.01);
  }
  for (double v : p.value().data) EXPECT_NEAR(v, 0.0, 1e-2);
}

TEST(AdamW, NonFiniteGradientIsNumericError) {
  ParameterSet params;
  Var p = params.add("bad", Matrix(1, 1, 1.0));
  p.node()->grad = Matrix(1, 1, std::nan(""));
  AdamW opt;
  try {
    opt.step(params, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
  }
}
