#include "lgmrec/lge.hpp"

#include "lgmrec/error.hpp"

namespace lgmrec::lge {

ad::Var collaborative_propagate(ad::Tape& t, ad::Var id_embeddings, const CsrMatrix& norm_adj,
                                std::size_t layers) {
  if (layers == 0) return id_embeddings;
  ad::Var layer = id_embeddings;
  ad::Var total = id_embeddings;
  for (std::size_t l = 0; l < layers; ++l) {
    layer = ad::spmm(t, norm_adj, layer);
    total = ad::add(t, total, layer);
  }
  return ad::scale(t, total, 1.0 / static_cast<double>(layers + 1));
}

ad::Var transform_modal(ad::Tape& t, ad::Var raw_features, ad::Var transform) {
  return ad::matmul(t, raw_features, transform);
}

ad::Var init_user_modal(ad::Tape& t, const CsrMatrix& user_item_mean, ad::Var item_modal) {
  return ad::spmm(t, user_item_mean, item_modal);
}

ad::Var modality_propagate(ad::Tape& t, ad::Var stacked, const CsrMatrix& norm_adj,
                           std::size_t layers) {
  if (layers == 0) fail(ErrorCode::kConfig, "modality propagation needs at least one layer");
  ad::Var layer = stacked;
  for (std::size_t k = 0; k < layers; ++k) layer = ad::spmm(t, norm_adj, layer);
  return layer;
}

}  // namespace lgmrec::lge
