#include "doctest.h"

#include "lgmrec/tensor.hpp"
#include "support.hpp"

using namespace lgmrec;
using testing::error_code;

TEST_CASE("dense matrix basics") {
  DenseMatrix m = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  CHECK(m.row(1)[0] == 4);
  m *= 2.0;
  CHECK(m(0, 1) == 4);
  CHECK(error_code([] { DenseMatrix(2, 2, std::vector<double>{1, 2, 3}); }) == ErrorCode::kDimension);
  DenseMatrix bad(1, 1);
  bad(0, 0) = NAN;
  CHECK_FALSE(bad.all_finite());
}

TEST_CASE("csr from triplets sums duplicates and sorts columns") {
  auto s = CsrMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}, {1, 2, 0.5}});
  CHECK(s.nnz() == 3);
  CHECK(s.at(1, 2) == 1.5);
  CHECK(s.at(0, 0) == 0.0);
  CHECK(s.col_idx()[1] == 0);
  CHECK(s.col_idx()[2] == 2);
  CHECK(error_code([] { CsrMatrix::from_triplets(1, 1, {{0, 3, 1.0}}); }).has_value());
}

TEST_CASE("csr constructor rejects broken invariants") {
  CHECK(error_code([] { CsrMatrix(2, 2, {0, 1}, {0}, {1.0}); }) == ErrorCode::kFormat);
  CHECK(error_code([] { CsrMatrix(1, 2, {0, 2}, {1, 0}, {1.0, 1.0}); }) == ErrorCode::kFormat);
}

TEST_CASE("identity is a fixed point of spmm") {
  Rng rng(1);
  const DenseMatrix d = testing::random_dense(5, 3, rng);
  CHECK(spmm(CsrMatrix::identity(5), d) == d);
}

TEST_CASE("spmm and its transpose match dense products") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = testing::random_sparse(6, 4, 0.4, rng);
    const auto d = testing::random_dense(4, 3, rng);
    const auto e = testing::random_dense(6, 3, rng);
    CHECK(testing::max_abs_diff(spmm(s, d), testing::naive_matmul(s.to_dense(), d)) < 1e-12);
    CHECK(testing::max_abs_diff(spmm_transposed(s, e),
                                testing::naive_matmul(testing::naive_transpose(s.to_dense()), e)) <
          1e-12);
    CHECK(s.transposed().to_dense() == testing::naive_transpose(s.to_dense()));
  }
  CHECK(error_code([] { spmm(CsrMatrix(2, 3), DenseMatrix(2, 2)); }) == ErrorCode::kDimension);
}

TEST_CASE("matmul with transposes") {
  Rng rng(3);
  const auto a = testing::random_dense(3, 4, rng);
  const auto b = testing::random_dense(4, 2, rng);
  const auto ref = testing::naive_matmul(a, b);
  CHECK(testing::max_abs_diff(matmul(a, b), ref) < 1e-12);
  CHECK(testing::max_abs_diff(matmul(testing::naive_transpose(a), b, true, false), ref) < 1e-12);
  CHECK(testing::max_abs_diff(matmul(a, testing::naive_transpose(b), false, true), ref) < 1e-12);
  CHECK(error_code([&] { matmul(a, a); }) == ErrorCode::kDimension);
}

TEST_CASE("row normalization leaves zero rows alone") {
  const auto n = row_l2_normalize(DenseMatrix::from_rows({{3, 4}, {0, 0}}));
  CHECK(n(0, 0) == doctest::Approx(0.6));
  CHECK(n(0, 1) == doctest::Approx(0.8));
  CHECK(n(1, 0) == 0.0);
}

TEST_CASE("softmax rows are distributions and stable for large logits") {
  const auto s = softmax_rows(DenseMatrix::from_rows({{1000, 1000}, {0, std::log(3.0)}}), 1.0);
  CHECK(s(0, 0) == doctest::Approx(0.5));
  CHECK(s(1, 1) == doctest::Approx(0.75));
  CHECK(error_code([] { softmax_rows(DenseMatrix(1, 1), 0.0); }) == ErrorCode::kConfig);
}
