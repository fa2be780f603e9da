#pragma once

// Global hypergraph embedding: item/user to hyperedge dependencies learned from raw
// modal features, Gumbel sharpening, two-step hypergraph message passing and the
// cross-modal contrastive loss.

#include <span>

#include "lgmrec/autodiff.hpp"

namespace lgmrec::ghe {

struct Dependencies {
  ad::Var item;  // |I| x A
  ad::Var user;  // |U| x A
};

/// item = F · Vᵀ, user = A_u · item.
Dependencies build_dependencies(ad::Tape& t, ad::Var raw_item_features, ad::Var hyperedges,
                                const CsrMatrix& user_item);

/// Row softmax of (log δ - log(1-δ) + h) / τ with δ ~ U(0,1) per entry when training;
/// the noise term is zero otherwise.
ad::Var gumbel_sharpen(ad::Tape& t, ad::Var logits, double temperature, Rng& rng, bool training);

/// The logistic noise log δ - log(1-δ) for a rows x cols block.
DenseMatrix gumbel_noise(std::size_t rows, std::size_t cols, Rng& rng);

struct GlobalEmbeddings {
  ad::Var users;  // |U| x d
  ad::Var items;  // |I| x d
};

/// For h < layers: items ← Drop(H̃_i)·Drop(H̃_iᵀ)·items, users ← Drop(H̃_u)·Drop(H̃_iᵀ)·items.
/// Every dropout application draws its own mask.
GlobalEmbeddings hypergraph_propagate(ad::Tape& t, ad::Var h_item, ad::Var h_user,
                                      ad::Var item_init, std::size_t layers, double dropout,
                                      Rng& rng, bool training);

/// Sum over modalities of the stacked [users; items] globals.
ad::Var aggregate_global(ad::Tape& t, std::span<const GlobalEmbeddings> per_modality);

/// Cosine similarity matrix between rows of a and rows of b.
DenseMatrix cosine_similarity(const DenseMatrix& a, const DenseMatrix& b);

/// InfoNCE with anchors from `anchors` and candidates from `candidates`, restricted to
/// the rows in `pool`; the positive for anchor r is candidate r. Averaged over the pool.
ad::Var info_nce(ad::Tape& t, ad::Var anchors, ad::Var candidates,
                 std::span<const std::size_t> pool, double temperature);

struct ContrastiveLoss {
  ad::Var user;
  ad::Var item;
};

/// User- and item-side losses between the two modalities' globals, anchored on the first.
ContrastiveLoss hcl_loss(ad::Tape& t, const GlobalEmbeddings& first,
                         const GlobalEmbeddings& second, std::span<const std::size_t> user_pool,
                         std::span<const std::size_t> item_pool, double temperature);

}  // namespace lgmrec::ghe
