#include "lgmrec/objective.hpp"

#include <vector>

#include "lgmrec/error.hpp"

namespace lgmrec::objective {

ad::Var fuse(ad::Tape& t, const FuseInputs& in) {
  std::optional<ad::Var> total = in.collaborative;
  const auto accumulate = [&](ad::Var term) { total = total ? ad::add(t, *total, term) : term; };
  for (ad::Var m : in.modal) accumulate(ad::row_l2_normalize(t, m));
  if (in.global) accumulate(ad::scale(t, ad::row_l2_normalize(t, *in.global), in.alpha));
  if (!total) fail(ErrorCode::kConfig, "every fusion term is ablated");
  return *total;
}

double score(const DenseMatrix& e_star, std::size_t num_users, std::size_t user,
             std::size_t item) {
  if (user >= num_users || num_users + item >= e_star.rows()) {
    fail(ErrorCode::kIndex, "score index out of range");
  }
  const auto u = e_star.row(user);
  const auto i = e_star.row(num_users + item);
  double acc = 0.0;
  for (std::size_t c = 0; c < u.size(); ++c) acc += u[c] * i[c];
  return acc;
}

ad::Var bpr_ranking_loss(ad::Tape& t, ad::Var e_star, std::size_t num_users,
                         std::span<const Triple> batch) {
  if (batch.empty()) fail(ErrorCode::kUsage, "empty BPR batch");
  const std::size_t n = t.value(e_star).rows();
  std::vector<std::size_t> users;
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (const auto& tr : batch) {
    if (tr.user >= num_users || num_users + tr.pos >= n || num_users + tr.neg >= n) {
      fail(ErrorCode::kIndex, "triple index out of range");
    }
    users.push_back(tr.user);
    pos.push_back(num_users + tr.pos);
    neg.push_back(num_users + tr.neg);
  }
  const ad::Var eu = ad::gather_rows(t, e_star, users);
  const ad::Var ep = ad::gather_rows(t, e_star, pos);
  const ad::Var en = ad::gather_rows(t, e_star, neg);
  // -ln σ(x) = softplus(-x)
  const ad::Var neg_margin = ad::sub(t, ad::row_dot(t, eu, en), ad::row_dot(t, eu, ep));
  return ad::sum(t, ad::softplus(t, neg_margin));
}

ad::Var bpr_loss(ad::Tape& t, ad::Var e_star, std::size_t num_users,
                 std::span<const Triple> batch, double lambda1,
                 std::span<const ad::Var> regularized) {
  return regularize(t, bpr_ranking_loss(t, e_star, num_users, batch), lambda1, regularized);
}

ad::Var regularize(ad::Tape& t, ad::Var loss, double lambda1,
                   std::span<const ad::Var> regularized) {
  if (lambda1 == 0.0 || regularized.empty()) return loss;
  std::optional<ad::Var> reg;
  for (ad::Var r : regularized) {
    const ad::Var sq = ad::sum_squares(t, r);
    reg = reg ? ad::add(t, *reg, sq) : sq;
  }
  return ad::add(t, loss, ad::scale(t, *reg, lambda1));
}

ad::Var total_loss(ad::Tape& t, ad::Var bpr, std::optional<ad::Var> hcl_user,
                   std::optional<ad::Var> hcl_item, double lambda2) {
  std::optional<ad::Var> hcl;
  if (hcl_user) hcl = *hcl_user;
  if (hcl_item) hcl = hcl ? ad::add(t, *hcl, *hcl_item) : *hcl_item;
  if (!hcl) return bpr;
  return ad::add(t, bpr, ad::scale(t, *hcl, lambda2));
}

}  // namespace lgmrec::objective
