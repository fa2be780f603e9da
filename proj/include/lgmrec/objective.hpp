#pragma once

#include <optional>
#include <span>

#include "lgmrec/autodiff.hpp"

namespace lgmrec::objective {

struct Triple {
  std::size_t user;
  std::size_t pos;
  std::size_t neg;
  friend bool operator==(const Triple&, const Triple&) = default;
};

/// Terms absent from the inputs are dropped: E* = E_id + Σ Norm(E_m) + α·Norm(E_ghe).
struct FuseInputs {
  std::optional<ad::Var> collaborative;
  std::span<const ad::Var> modal;
  std::optional<ad::Var> global;
  double alpha = 0.0;
};

/// Throws kConfig when every term is absent.
ad::Var fuse(ad::Tape& t, const FuseInputs& in);

/// e*_u · e*_i with items stored after the users in `e_star`.
double score(const DenseMatrix& e_star, std::size_t num_users, std::size_t user, std::size_t item);

/// Σ softplus(r̂_neg - r̂_pos) + λ1 Σ ‖reg‖², summed over the batch.
ad::Var bpr_loss(ad::Tape& t, ad::Var e_star, std::size_t num_users,
                 std::span<const Triple> batch, double lambda1,
                 std::span<const ad::Var> regularized);

/// Ranking part only: Σ softplus(r̂_neg - r̂_pos).
ad::Var bpr_ranking_loss(ad::Tape& t, ad::Var e_star, std::size_t num_users,
                         std::span<const Triple> batch);

/// ranking + λ1 Σ ‖reg‖².
ad::Var regularize(ad::Tape& t, ad::Var ranking, double lambda1,
                   std::span<const ad::Var> regularized);

/// L = bpr + λ2 (hcl_u + hcl_i); the contrastive term is skipped when absent.
ad::Var total_loss(ad::Tape& t, ad::Var bpr, std::optional<ad::Var> hcl_user,
                   std::optional<ad::Var> hcl_item, double lambda2);

}  // namespace lgmrec::objective
