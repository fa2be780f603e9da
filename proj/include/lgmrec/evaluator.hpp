#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgmrec/data.hpp"
#include "lgmrec/model.hpp"

namespace lgmrec {

enum class SplitKind { kTrain, kValid, kTest };
SplitKind parse_split(std::string_view s);
std::string_view to_string(SplitKind s);

/// Top-n item ids by descending score, ties by ascending id. `mask` must be sorted.
/// Throws kTruncation when fewer than n candidates remain.
std::vector<std::size_t> rank_items(std::span<const double> scores,
                                    std::span<const std::size_t> mask, std::size_t n);
/// Same, scoring with e*_user · e*_item.
std::vector<std::size_t> rank_items(const DenseMatrix& e_star, std::size_t num_users,
                                    std::size_t user, std::span<const std::size_t> mask,
                                    std::size_t n);

/// Binary relevance; `relevant` must be nonempty.
double recall_at_n(std::span<const std::size_t> topn, std::span<const std::size_t> relevant);
/// DCG with 1/log2(p+1) discounts over IDCG truncated at min(n, |relevant|).
double ndcg_at_n(std::span<const std::size_t> topn, std::span<const std::size_t> relevant);

struct RankingMetrics {
  std::vector<std::size_t> cutoffs;
  std::vector<double> recall;
  std::vector<double> ndcg;
  std::size_t users = 0;

  /// Throws kUnavailable for a cutoff that was not evaluated.
  double recall_at(std::size_t n) const;
  double ndcg_at(std::size_t n) const;
};

struct EvalOptions {
  /// 0 reads LGMREC_THREADS (default 1).
  std::size_t threads = 0;
  /// Restrict to these users (in any order); empty means all.
  std::span<const std::size_t> users;
};

/// Averages per-user metrics over users with at least one relevant item in `split`.
/// Training items are masked except when evaluating the training split itself.
RankingMetrics evaluate(const DenseMatrix& e_star, const Dataset& data, SplitKind split,
                        std::span<const std::size_t> cutoffs, const EvalOptions& opts = {});

std::size_t threads_from_env();

struct GroupMetrics {
  std::size_t lower;  // inclusive training-interaction count
  std::optional<std::size_t> upper;  // inclusive; none for the open last bucket
  std::size_t population = 0;
  std::optional<RankingMetrics> metrics;  // none when no user in the bucket is evaluable
};

/// Buckets users by training-interaction count: [0, b0], (b0, b1], ..., (b_last, ∞).
std::vector<GroupMetrics> sparsity_group_report(const DenseMatrix& e_star, const Dataset& data,
                                                std::span<const std::size_t> boundaries,
                                                SplitKind split,
                                                std::span<const std::size_t> cutoffs,
                                                const EvalOptions& opts = {});
std::string format_group_report(std::span<const GroupMetrics> groups);

struct ItemAssignment {
  std::size_t item;
  std::size_t hyperedge;
  double score;
};

struct UserDependencies {
  std::size_t user;
  std::string modality;
  std::vector<double> hyperedge_scores;
  std::vector<ItemAssignment> items;
};

/// Eval-mode user-hyperedge rows and the argmax hyperedge of each interacted training item.
std::vector<UserDependencies> export_hyperedge_dependencies(const Model& model,
                                                            const ParamSet& params,
                                                            std::span<const std::size_t> users);
/// One JSON object per line.
std::string format_dependencies(std::span<const UserDependencies> deps, const Dataset& data);

/// Argmax hyperedge of every item in one modality (ties to the lowest index).
std::vector<std::size_t> item_hyperedges(const Model& model, const ParamSet& params,
                                         std::size_t modality);

/// Among item pairs sharing a label, the fraction assigned to the same cluster.
double pair_consistency(std::span<const std::size_t> clusters, std::span<const std::size_t> labels);
/// Fraction of all item pairs on which "same label" and "same cluster" agree.
double rand_index(std::span<const std::size_t> clusters, std::span<const std::size_t> labels);

}  // namespace lgmrec
