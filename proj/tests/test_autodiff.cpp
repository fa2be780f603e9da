#include "doctest.h"

#include <functional>

#include "lgmrec/autodiff.hpp"
#include "lgmrec/error.hpp"
#include "lgmrec/optim.hpp"
#include "support.hpp"

using namespace lgmrec;
using testing::error_code;

namespace {

using Builder = std::function<ad::Var(ad::Tape&, std::vector<ad::Var>&)>;

// Scalar = Σ W ⊙ f(params), with fixed random weights W so every output entry matters.
double gradient_error(const ParamSet& init, const Builder& f, std::uint64_t seed = 99) {
  const auto loss_graph = [&](ad::Tape& t, const ParamSet& p) {
    std::vector<ad::Var> leaves;
    for (std::size_t k = 0; k < p.size(); ++k) leaves.push_back(t.parameter(k, p[k]));
    const ad::Var out = f(t, leaves);
    const DenseMatrix& v = t.value(out);
    if (v.rows() == 1 && v.cols() == 1) return out;
    Rng rng(seed);
    const ad::Var w = t.constant(testing::random_dense(v.rows(), v.cols(), rng));
    return ad::sum(t, ad::mul(t, out, w));
  };
  ad::Tape t;
  const ad::Var root = loss_graph(t, init);
  const auto grads = t.parameter_gradients(t.backward(root), init.values());
  const auto loss = [&](const ParamSet& p) {
    ad::Tape t2;
    return t2.value(loss_graph(t2, p))(0, 0);
  };
  return finite_difference_check(loss, init, grads).max_rel_error;
}

ParamSet one(DenseMatrix m) {
  ParamSet p;
  p.add("x", std::move(m));
  return p;
}

ParamSet two(DenseMatrix a, DenseMatrix b) {
  ParamSet p;
  p.add("a", std::move(a));
  p.add("b", std::move(b));
  return p;
}

}  // namespace

TEST_CASE("elementwise and shape ops pass the gradient check") {
  Rng rng(5);
  const auto a = testing::random_dense(4, 3, rng);
  const auto b = testing::random_dense(4, 3, rng);
  const auto c = testing::random_dense(3, 2, rng);
  const auto sp = testing::random_sparse(5, 4, 0.5, rng);
  const double tol = 1e-6;

  CHECK(gradient_error(two(a, b), [](ad::Tape& t, auto& x) { return ad::add(t, x[0], x[1]); }) < tol);
  CHECK(gradient_error(two(a, b), [](ad::Tape& t, auto& x) { return ad::sub(t, x[0], x[1]); }) < tol);
  CHECK(gradient_error(two(a, b), [](ad::Tape& t, auto& x) { return ad::mul(t, x[0], x[1]); }) < tol);
  CHECK(gradient_error(one(a), [](ad::Tape& t, auto& x) { return ad::scale(t, x[0], -2.5); }) < tol);
  CHECK(gradient_error(one(a), [&](ad::Tape& t, auto& x) { return ad::add_constant(t, x[0], b); }) < tol);
  CHECK(gradient_error(one(a), [](ad::Tape& t, auto& x) { return ad::transpose(t, x[0]); }) < tol);
  CHECK(gradient_error(two(a, c), [](ad::Tape& t, auto& x) { return ad::matmul(t, x[0], x[1]); }) < tol);
  CHECK(gradient_error(two(a, b), [](ad::Tape& t, auto& x) {
          return ad::matmul(t, x[0], x[1], true, false);
        }) < tol);
  CHECK(gradient_error(two(a, b), [](ad::Tape& t, auto& x) {
          return ad::matmul(t, x[0], x[1], false, true);
        }) < tol);
  CHECK(gradient_error(one(a), [&](ad::Tape& t, auto& x) { return ad::spmm(t, sp, x[0]); }) < tol);
  CHECK(gradient_error(one(a), [](ad::Tape& t, auto& x) { return ad::row_l2_normalize(t, x[0]); }) < tol);
  CHECK(gradient_error(one(a), [](ad::Tape& t, auto& x) { return ad::softmax_rows(t, x[0], 0.3); }) < tol);
  CHECK(gradient_error(one(a), [](ad::Tape& t, auto& x) { return ad::softplus(t, x[0]); }) < tol);
  CHECK(gradient_error(one(a), [](ad::Tape& t, auto& x) { return ad::sum_squares(t, x[0]); }) < tol);
  CHECK(gradient_error(two(a, b), [](ad::Tape& t, auto& x) { return ad::row_dot(t, x[0], x[1]); }) < tol);
  CHECK(gradient_error(one(a), [](ad::Tape& t, auto& x) {
          const std::size_t rows[] = {3, 0, 3};
          return ad::gather_rows(t, x[0], rows);
        }) < tol);
  CHECK(gradient_error(one(a), [](ad::Tape& t, auto& x) { return ad::slice_rows(t, x[0], 1, 2); }) < tol);
  CHECK(gradient_error(two(a, b), [](ad::Tape& t, auto& x) {
          const ad::Var parts[] = {x[0], x[1], x[0]};
          return ad::vstack(t, parts);
        }) < tol);
  const auto sq = testing::random_dense(4, 4, rng, 3.0);
  CHECK(gradient_error(one(sq), [](ad::Tape& t, auto& x) { return ad::diag_cross_entropy(t, x[0]); }) < tol);
}

TEST_CASE("dropout with a frozen mask has the masked gradient") {
  Rng rng(6);
  const auto a = testing::random_dense(5, 4, rng);
  const auto err = gradient_error(one(a), [](ad::Tape& t, auto& x) {
    Rng r(7);  // same mask on every evaluation
    return ad::dropout(t, x[0], 0.4, r, true);
  });
  CHECK(err < 1e-6);
}

TEST_CASE("dropout in eval mode is the identity node") {
  ad::Tape t;
  Rng rng(1);
  const ad::Var x = t.constant(DenseMatrix::from_rows({{1, 2}}));
  CHECK(ad::dropout(t, x, 0.5, rng, false).id == x.id);
  CHECK(ad::dropout(t, x, 0.0, rng, true).id == x.id);
  CHECK(error_code([&] { ad::dropout(t, x, 1.0, rng, true); }) == ErrorCode::kConfig);
}

TEST_CASE("dropout mask keeps the expectation") {
  Rng rng(8);
  const auto m = ad::dropout_mask(200, 200, 0.3, rng);
  double s = 0.0;
  std::size_t zeros = 0;
  for (double v : m.values()) {
    s += v;
    zeros += v == 0.0 ? 1 : 0;
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.7)));
  }
  CHECK(s / static_cast<double>(m.size()) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(static_cast<double>(zeros) / static_cast<double>(m.size()) == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("softplus is stable at the extremes") {
  ad::Tape t;
  const auto v = t.value(ad::softplus(t, t.constant(DenseMatrix::from_rows({{-800, 0, 800}}))));
  CHECK(v(0, 0) == 0.0);
  CHECK(v(0, 1) == doctest::Approx(std::log(2.0)));
  CHECK(v(0, 2) == 800.0);
}

TEST_CASE("backward needs a scalar root and non-finite values abort") {
  ad::Tape t;
  const ad::Var x = t.parameter(0, DenseMatrix(2, 2, 1.0));
  CHECK(error_code([&] { t.backward(x); }) == ErrorCode::kUsage);
  const ad::Var big = t.constant(DenseMatrix(1, 1, 1e308));
  CHECK(error_code([&] { ad::scale(t, big, 10.0); }) == ErrorCode::kNumeric);
}

TEST_CASE("leaves sharing a slot accumulate; unreached slots are zero") {
  ad::Tape t;
  const DenseMatrix v = DenseMatrix::from_rows({{2.0}});
  const ad::Var a = t.parameter(0, v);
  const ad::Var b = t.parameter(0, v);
  t.parameter(1, v);
  const ad::Var root = ad::sum(t, ad::mul(t, a, b));  // x*x through two leaves
  const std::vector<DenseMatrix> shapes{v, v};
  const auto g = t.parameter_gradients(t.backward(root), shapes);
  CHECK(g[0](0, 0) == doctest::Approx(4.0));
  CHECK(g[1](0, 0) == 0.0);
}

TEST_CASE("row normalization of a zero row has zero gradient") {
  ad::Tape t;
  const ad::Var x = t.parameter(0, DenseMatrix::from_rows({{0, 0}, {1, 2}}));
  const auto g = t.backward(ad::sum(t, ad::row_l2_normalize(t, x)));
  CHECK(g[x](0, 0) == 0.0);
  CHECK(g[x](0, 1) == 0.0);
}

TEST_CASE("adam first step moves each entry by lr against the gradient sign") {
  std::vector<DenseMatrix> p{DenseMatrix::from_rows({{1.0, -1.0, 0.5}})};
  const std::vector<DenseMatrix> g{DenseMatrix::from_rows({{0.3, -2.0, 0.0}})};
  auto state = AdamState::zeros_like(p);
  adam_step(p, g, state, {.lr = 0.1});
  CHECK(p[0](0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p[0](0, 1) == doctest::Approx(-0.9).epsilon(1e-6));
  CHECK(p[0](0, 2) == 0.5);
  CHECK(state.step == 1);
}

TEST_CASE("adam matches a hand-rolled second step") {
  // m2 = 0.9*0.1*g1 + 0.1*g2, v2 = 0.999*0.001*g1^2 + 0.001*g2^2
  const double g1 = 0.5, g2 = -0.25, lr = 0.01;
  std::vector<DenseMatrix> p{DenseMatrix(1, 1, 0.0)};
  auto state = AdamState::zeros_like(p);
  adam_step(p, std::vector<DenseMatrix>{DenseMatrix(1, 1, g1)}, state, {.lr = lr});
  adam_step(p, std::vector<DenseMatrix>{DenseMatrix(1, 1, g2)}, state, {.lr = lr});
  const double m1 = 0.1 * g1, v1 = 0.001 * g1 * g1;
  double x = -lr * (m1 / 0.1) / (std::sqrt(v1 / 0.001) + 1e-8);
  const double m2 = 0.9 * m1 + 0.1 * g2, v2 = 0.999 * v1 + 0.001 * g2 * g2;
  x -= lr * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
  CHECK(p[0](0, 0) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("adam with zero learning rate is a fixed point") {
  Rng rng(3);
  std::vector<DenseMatrix> p{testing::random_dense(3, 3, rng)};
  const auto before = p;
  auto state = AdamState::zeros_like(p);
  adam_step(p, std::vector<DenseMatrix>{testing::random_dense(3, 3, rng)}, state, {.lr = 0.0});
  CHECK(p == before);
  CHECK(error_code([&] {
          adam_step(p, std::vector<DenseMatrix>{DenseMatrix(2, 2)}, state, {});
        }) == ErrorCode::kDimension);
}

TEST_CASE("finite-difference check flags a wrong gradient") {
  ParamSet p = one(DenseMatrix::from_rows({{1.0, 2.0}}));
  const auto loss = [](const ParamSet& q) { return q[0](0, 0) * q[0](0, 0) + 3.0 * q[0](0, 1); };
  const std::vector<DenseMatrix> good{DenseMatrix::from_rows({{2.0, 3.0}})};
  const std::vector<DenseMatrix> bad{DenseMatrix::from_rows({{2.0, 4.0}})};
  CHECK(finite_difference_check(loss, p, good).max_rel_error < 1e-8);
  const auto r = finite_difference_check(loss, p, bad);
  CHECK(r.max_rel_error > 0.2);
  CHECK(r.worst_index == 1);
}

TEST_CASE("xavier init respects its bound") {
  Rng rng(4);
  const auto w = xavier_uniform(10, 6, rng);
  const double bound = std::sqrt(6.0 / 16.0);
  for (double v : w.values()) CHECK(std::abs(v) <= bound);
}
