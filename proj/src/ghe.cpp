#include "lgmrec/ghe.hpp"

#include <cmath>
#include <optional>

#include "lgmrec/error.hpp"

namespace lgmrec::ghe {

Dependencies build_dependencies(ad::Tape& t, ad::Var raw_item_features, ad::Var hyperedges,
                                const CsrMatrix& user_item) {
  const ad::Var item = ad::matmul(t, raw_item_features, hyperedges, false, true);
  const ad::Var user = ad::spmm(t, user_item, item);
  return {item, user};
}

DenseMatrix gumbel_noise(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix noise(rows, cols);
  for (double& v : noise.values()) {
    const double delta = uniform_open01(rng);
    v = std::log(delta) - std::log1p(-delta);
  }
  return noise;
}

ad::Var gumbel_sharpen(ad::Tape& t, ad::Var logits, double temperature, Rng& rng, bool training) {
  if (!(temperature > 0.0)) fail(ErrorCode::kConfig, "Gumbel temperature must be positive");
  if (!training) return ad::softmax_rows(t, logits, temperature);
  const DenseMatrix& h = t.value(logits);
  const ad::Var noisy = ad::add_constant(t, logits, gumbel_noise(h.rows(), h.cols(), rng));
  return ad::softmax_rows(t, noisy, temperature);
}

GlobalEmbeddings hypergraph_propagate(ad::Tape& t, ad::Var h_item, ad::Var h_user,
                                      ad::Var item_init, std::size_t layers, double dropout,
                                      Rng& rng, bool training) {
  if (layers == 0) fail(ErrorCode::kConfig, "hypergraph propagation needs at least one layer");
  if (t.value(item_init).rows() != t.value(h_item).rows()) {
    fail(ErrorCode::kDimension, "item embeddings and item dependencies disagree on |I|");
  }
  const ad::Var h_item_t = ad::transpose(t, h_item);
  ad::Var items = item_init;
  ad::Var users = item_init;
  for (std::size_t h = 0; h < layers; ++h) {
    const ad::Var to_edges_i = ad::matmul(t, ad::dropout(t, h_item_t, dropout, rng, training), items);
    const ad::Var next_items =
        ad::matmul(t, ad::dropout(t, h_item, dropout, rng, training), to_edges_i);
    const ad::Var to_edges_u = ad::matmul(t, ad::dropout(t, h_item_t, dropout, rng, training), items);
    users = ad::matmul(t, ad::dropout(t, h_user, dropout, rng, training), to_edges_u);
    items = next_items;
  }
  return {users, items};
}

ad::Var aggregate_global(ad::Tape& t, std::span<const GlobalEmbeddings> per_modality) {
  if (per_modality.empty()) fail(ErrorCode::kUsage, "no modalities to aggregate");
  std::optional<ad::Var> total;
  for (const auto& g : per_modality) {
    const ad::Var parts[] = {g.users, g.items};
    const ad::Var stacked = ad::vstack(t, parts);
    total = total ? ad::add(t, *total, stacked) : stacked;
  }
  return *total;
}

DenseMatrix cosine_similarity(const DenseMatrix& a, const DenseMatrix& b) {
  return matmul(row_l2_normalize(a), row_l2_normalize(b), false, true);
}

ad::Var info_nce(ad::Tape& t, ad::Var anchors, ad::Var candidates,
                 std::span<const std::size_t> pool, double temperature) {
  if (pool.size() < 2) {
    fail(ErrorCode::kContrastiveDegenerate, "contrastive pool needs at least 2 entities, got " +
                                                std::to_string(pool.size()));
  }
  if (!(temperature > 0.0)) fail(ErrorCode::kConfig, "contrastive temperature must be positive");
  const ad::Var a = ad::row_l2_normalize(t, ad::gather_rows(t, anchors, pool));
  const ad::Var c = ad::row_l2_normalize(t, ad::gather_rows(t, candidates, pool));
  const ad::Var logits = ad::scale(t, ad::matmul(t, a, c, false, true), 1.0 / temperature);
  return ad::diag_cross_entropy(t, logits);
}

ContrastiveLoss hcl_loss(ad::Tape& t, const GlobalEmbeddings& first,
                         const GlobalEmbeddings& second, std::span<const std::size_t> user_pool,
                         std::span<const std::size_t> item_pool, double temperature) {
  return {info_nce(t, first.users, second.users, user_pool, temperature),
          info_nce(t, first.items, second.items, item_pool, temperature)};
}

}  // namespace lgmrec::ghe
