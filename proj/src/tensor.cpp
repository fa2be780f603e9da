#include "lgmrec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lgmrec/error.hpp"

namespace lgmrec {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    fail(ErrorCode::kDimension, "dense matrix " + shape_str(rows, cols) + " given " +
                                    std::to_string(values_.size()) + " values");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCode::kDimension, "ragged row list");
    values.insert(values.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(values));
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  if (!same_shape(other)) {
    fail(ErrorCode::kDimension, "add " + shape_str(rows_, cols_) + " and " +
                                    shape_str(other.rows_, other.cols_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) noexcept {
  for (double& v : values_) v *= s;
  return *this;
}

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                     std::vector<std::size_t> col_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  validate();
}

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      fail(ErrorCode::kIndex, "triplet (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                                  ") outside " + shape_str(rows, cols));
    }
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> row_ptr(rows + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  col_idx.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
      values.back() += t.value;
      continue;
    }
    col_idx.push_back(t.col);
    values.push_back(t.value);
    ++row_ptr[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) row_ptr[r + 1] += row_ptr[r];
  return CsrMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  std::vector<std::size_t> row_ptr(n + 1);
  std::vector<std::size_t> col_idx(n);
  for (std::size_t i = 0; i <= n; ++i) row_ptr[i] = i;
  for (std::size_t i = 0; i < n; ++i) col_idx[i] = i;
  return CsrMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::vector<double>(n, 1.0));
}

double CsrMatrix::at(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) fail(ErrorCode::kIndex, "csr index out of range");
  const auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  const auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  const auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

DenseMatrix CsrMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) = values_[k];
  }
  return d;
}

CsrMatrix CsrMatrix::transposed() const {
  std::vector<std::size_t> row_ptr(cols_ + 1, 0);
  for (std::size_t c : col_idx_) ++row_ptr[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) row_ptr[c + 1] += row_ptr[c];
  std::vector<std::size_t> cursor(row_ptr.begin(), row_ptr.end() - 1);
  std::vector<std::size_t> col_idx(nnz());
  std::vector<double> values(nnz());
  // Row-major traversal keeps the new column indices sorted.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t dst = cursor[col_idx_[k]]++;
      col_idx[dst] = r;
      values[dst] = values_[k];
    }
  }
  return CsrMatrix(cols_, rows_, std::move(row_ptr), std::move(col_idx), std::move(values));
}

void CsrMatrix::validate() const {
  if (row_ptr_.size() != rows_ + 1) fail(ErrorCode::kFormat, "csr row_ptr length != rows+1");
  if (row_ptr_.front() != 0) fail(ErrorCode::kFormat, "csr row_ptr[0] != 0");
  if (row_ptr_.back() != col_idx_.size()) fail(ErrorCode::kFormat, "csr row_ptr[rows] != nnz");
  if (values_.size() != col_idx_.size()) fail(ErrorCode::kFormat, "csr values length != nnz");
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_ptr_[r] > row_ptr_[r + 1]) fail(ErrorCode::kFormat, "csr row_ptr decreasing");
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      if (col_idx_[k] >= cols_) fail(ErrorCode::kFormat, "csr column index out of range");
      if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1]) {
        fail(ErrorCode::kFormat, "csr column indices not strictly increasing in row " +
                                     std::to_string(r));
      }
    }
  }
}

DenseMatrix spmm(const CsrMatrix& s, const DenseMatrix& d) {
  if (s.cols() != d.rows()) {
    fail(ErrorCode::kDimension, "spmm " + shape_str(s.rows(), s.cols()) + " x " +
                                    shape_str(d.rows(), d.cols()));
  }
  DenseMatrix out(s.rows(), d.cols());
  const auto row_ptr = s.row_ptr();
  const auto col_idx = s.col_idx();
  const auto vals = s.values();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const auto src = d.row(col_idx[k]);
      const double v = vals[k];
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += v * src[c];
    }
  }
  return out;
}

DenseMatrix spmm_transposed(const CsrMatrix& s, const DenseMatrix& d) {
  if (s.rows() != d.rows()) {
    fail(ErrorCode::kDimension, "spmm_transposed " + shape_str(s.rows(), s.cols()) + "^T x " +
                                    shape_str(d.rows(), d.cols()));
  }
  DenseMatrix out(s.cols(), d.cols());
  const auto row_ptr = s.row_ptr();
  const auto col_idx = s.col_idx();
  const auto vals = s.values();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto src = d.row(r);
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      auto dst = out.row(col_idx[k]);
      const double v = vals[k];
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += v * src[c];
    }
  }
  return out;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, bool transpose_a,
                   bool transpose_b) {
  const std::size_t m = transpose_a ? a.cols() : a.rows();
  const std::size_t inner = transpose_a ? a.rows() : a.cols();
  const std::size_t inner_b = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (inner != inner_b) {
    fail(ErrorCode::kDimension, "matmul inner dimensions " + std::to_string(inner) + " and " +
                                    std::to_string(inner_b));
  }
  DenseMatrix out(m, n);
  if (!transpose_a && !transpose_b) {
    for (std::size_t i = 0; i < m; ++i) {
      auto dst = out.row(i);
      for (std::size_t k = 0; k < inner; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        const auto src = b.row(k);
        for (std::size_t j = 0; j < n; ++j) dst[j] += aik * src[j];
      }
    }
  } else if (!transpose_a && transpose_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto ar = a.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        const auto br = b.row(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < inner; ++k) acc += ar[k] * br[k];
        out(i, j) = acc;
      }
    }
  } else if (transpose_a && !transpose_b) {
    for (std::size_t k = 0; k < inner; ++k) {
      const auto ar = a.row(k);
      const auto br = b.row(k);
      for (std::size_t i = 0; i < m; ++i) {
        const double aki = ar[i];
        if (aki == 0.0) continue;
        auto dst = out.row(i);
        for (std::size_t j = 0; j < n; ++j) dst[j] += aki * br[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < inner; ++k) acc += a(k, i) * b(j, k);
        out(i, j) = acc;
      }
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

DenseMatrix row_l2_normalize(const DenseMatrix& d) {
  DenseMatrix out = d;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : row) v *= inv;
  }
  return out;
}

DenseMatrix softmax_rows(const DenseMatrix& d, double temperature) {
  if (!(temperature > 0.0)) fail(ErrorCode::kConfig, "softmax temperature must be positive");
  DenseMatrix out(d.rows(), d.cols());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    const auto src = d.row(r);
    auto dst = out.row(r);
    if (src.empty()) continue;
    const double mx = *std::max_element(src.begin(), src.end());
    double total = 0.0;
    for (std::size_t c = 0; c < src.size(); ++c) {
      dst[c] = std::exp((src[c] - mx) / temperature);
      total += dst[c];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

}  // namespace lgmrec
