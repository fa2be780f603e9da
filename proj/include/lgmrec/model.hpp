#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lgmrec/autodiff.hpp"
#include "lgmrec/config.hpp"
#include "lgmrec/data.hpp"
#include "lgmrec/ghe.hpp"
#include "lgmrec/objective.hpp"
#include "lgmrec/params.hpp"

namespace lgmrec {

/// Stochastic state for one forward pass. Eval mode ignores the streams.
struct ForwardMode {
  bool training = false;
  Rng* dropout_rng = nullptr;
  Rng* gumbel_rng = nullptr;

  static ForwardMode eval() { return {}; }
};

/// Taped intermediates of one forward pass.
struct ForwardState {
  ad::Var e_star;
  ad::Var e_lge_id;
  std::vector<ad::Var> e_lge_modal;
  std::optional<ad::Var> e_ghe;
  std::vector<ghe::GlobalEmbeddings> globals;
  std::vector<ghe::Dependencies> sharpened;
  ad::Var id_leaf;
  /// Under shared user IDs, a second leaf for the same slot feeds the modal pathway.
  std::optional<ad::Var> modal_id_leaf;
  std::vector<ad::Var> transform_leaves;
  std::vector<ad::Var> hyperedge_leaves;
};

struct LossGraph {
  ForwardState forward;
  ad::Var total;
  ad::Var bpr;
  ad::Var ranking;
  std::optional<ad::Var> hcl_user;
  std::optional<ad::Var> hcl_item;
};

/// The LGMRec network bound to one dataset. Holds the graph operators and feature
/// constants; parameters live outside in a ParamSet.
class Model {
 public:
  Model(TrainConfig cfg, const Dataset& data);

  const TrainConfig& config() const noexcept { return cfg_; }
  const Dataset& data() const noexcept { return *data_; }
  const Graph& graph() const noexcept { return graph_; }
  std::size_t num_users() const noexcept { return data_->num_users; }
  std::size_t num_items() const noexcept { return data_->num_items; }

  /// Xavier-initialized parameters; only the pieces the ablation uses are allocated.
  ParamSet init_params(std::uint64_t seed) const;
  /// Throws kDimension when names or shapes disagree with this model.
  void check_params(const ParamSet& params) const;

  ForwardState forward(ad::Tape& t, const ParamSet& params, const ForwardMode& mode) const;

  LossGraph loss(ad::Tape& t, const ParamSet& params, std::span<const objective::Triple> batch,
                 const ForwardMode& mode) const;

  /// E* in eval mode.
  DenseMatrix embeddings(const ParamSet& params) const;

  struct SharpenedDependencies {
    DenseMatrix item;
    DenseMatrix user;
  };
  /// Eval-mode H̃_i and H̃_u for one modality. Throws kUnavailable without the hypergraph.
  SharpenedDependencies dependencies(const ParamSet& params, std::size_t modality) const;

 private:
  TrainConfig cfg_;
  const Dataset* data_;
  Graph graph_;
  std::vector<std::shared_ptr<const DenseMatrix>> features_;
};

}  // namespace lgmrec
