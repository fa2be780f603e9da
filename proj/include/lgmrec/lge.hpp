#pragma once

// Local graph embedding: collaborative propagation over ID embeddings and modality
// propagation over projected item features. The two pathways share no parameters.

#include "lgmrec/autodiff.hpp"

namespace lgmrec::lge {

/// Mean of E, ÂE, ..., Â^L E.
ad::Var collaborative_propagate(ad::Tape& t, ad::Var id_embeddings, const CsrMatrix& norm_adj,
                                std::size_t layers);

/// Raw item features (|I| x d_m) times the transform (d_m x d).
ad::Var transform_modal(ad::Tape& t, ad::Var raw_features, ad::Var transform);

/// Mean of neighbouring item rows per user. `user_item_mean` is the row-normalized
/// user-item matrix, so users without interactions come out as zero rows.
ad::Var init_user_modal(ad::Tape& t, const CsrMatrix& user_item_mean, ad::Var item_modal);

/// Â^K applied to the stacked [users; items] modal matrix; only the last layer is kept.
ad::Var modality_propagate(ad::Tape& t, ad::Var stacked, const CsrMatrix& norm_adj,
                           std::size_t layers);

}  // namespace lgmrec::lge
