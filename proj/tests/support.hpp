#pragma once
// Helpers shared by the unit and acceptance tests: random instances and
// deliberately naive reference implementations.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lgmrec/data.hpp"
#include "lgmrec/error.hpp"
#include "lgmrec/rng.hpp"
#include "lgmrec/tensor.hpp"

namespace testing {

using lgmrec::CsrMatrix;
using lgmrec::DenseMatrix;
using lgmrec::Rng;

inline DenseMatrix random_dense(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = scale * (2.0 * lgmrec::uniform01(rng) - 1.0);
  return m;
}

inline CsrMatrix random_sparse(std::size_t rows, std::size_t cols, double density, Rng& rng) {
  std::vector<lgmrec::Triplet> t;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (lgmrec::uniform01(rng) < density) t.push_back({r, c, 2.0 * lgmrec::uniform01(rng) - 1.0});
  return CsrMatrix::from_triplets(rows, cols, std::move(t));
}

/// Triple-loop product over dense copies.
inline DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline DenseMatrix naive_transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) return INFINITY;
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

/// Dense D^-1/2 A D^-1/2 over the bipartite graph, users first.
inline DenseMatrix naive_norm_adj(const std::vector<lgmrec::Interaction>& train, std::size_t nu,
                                  std::size_t ni) {
  const std::size_t n = nu + ni;
  DenseMatrix a(n, n);
  for (const auto& r : train) {
    a(r.user, nu + r.item) = 1.0;
    a(nu + r.item, r.user) = 1.0;
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (a(i, j) != 0.0) a(i, j) /= std::sqrt(deg[i] * deg[j]);
  return a;
}

/// Recall by explicit set intersection.
inline double brute_recall(const std::vector<std::size_t>& topn, const std::vector<std::size_t>& rel) {
  const std::set<std::size_t> r(rel.begin(), rel.end());
  std::set<std::size_t> hit;
  for (auto x : topn)
    if (r.count(x)) hit.insert(x);
  return static_cast<double>(hit.size()) / static_cast<double>(r.size());
}

/// NDCG from the gain vector and an explicitly sorted ideal gain vector.
inline double brute_ndcg(const std::vector<std::size_t>& topn, const std::vector<std::size_t>& rel) {
  const std::set<std::size_t> r(rel.begin(), rel.end());
  std::vector<double> gains;
  for (auto x : topn) gains.push_back(r.count(x) ? 1.0 : 0.0);
  std::vector<double> ideal(topn.size(), 0.0);
  for (std::size_t p = 0; p < std::min(topn.size(), r.size()); ++p) ideal[p] = 1.0;
  double dcg = 0.0;
  double idcg = 0.0;
  for (std::size_t p = 0; p < gains.size(); ++p) {
    const double disc = std::log(2.0) / std::log(static_cast<double>(p) + 2.0);
    dcg += gains[p] * disc;
    idcg += ideal[p] * disc;
  }
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

/// Small dataset with every user holding `per_user` random training items and one
/// valid and one test item, plus random features.
inline lgmrec::Dataset tiny_dataset(std::size_t nu, std::size_t ni, std::vector<std::size_t> dims,
                                    std::size_t per_user, std::uint64_t seed) {
  Rng rng(seed);
  lgmrec::Dataset d;
  d.num_users = nu;
  d.num_items = ni;
  for (std::size_t u = 0; u < nu; ++u) {
    std::vector<std::size_t> items(ni);
    std::iota(items.begin(), items.end(), 0);
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t k = 0; k < per_user; ++k) d.train.push_back({u, items[k]});
    if (per_user + 2 <= ni) {
      d.valid.push_back({u, items[per_user]});
      d.test.push_back({u, items[per_user + 1]});
    }
  }
  for (std::size_t m = 0; m < dims.size(); ++m) {
    d.modalities.push_back(m == 0 ? "v" : m == 1 ? "t" : "m" + std::to_string(m));
    d.features.push_back(random_dense(ni, dims[m], rng));
  }
  d.user_original.resize(nu);
  std::iota(d.user_original.begin(), d.user_original.end(), 0);
  d.item_original.resize(ni);
  std::iota(d.item_original.begin(), d.item_original.end(), 0);
  return d;
}

/// Error code thrown by `f`, or none.
template <class F>
std::optional<lgmrec::ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const lgmrec::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Fresh directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("lgmrec_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
