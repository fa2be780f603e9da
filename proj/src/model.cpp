#include "lgmrec/model.hpp"

#include <algorithm>

#include "lgmrec/error.hpp"
#include "lgmrec/lge.hpp"

namespace lgmrec {

namespace {

std::string transform_name(const std::string& m) { return "transform." + m; }
std::string hyperedge_name(const std::string& m) { return "hyperedges." + m; }

std::vector<std::size_t> unique_sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

Model::Model(TrainConfig cfg, const Dataset& data)
    : cfg_(std::move(cfg)), data_(&data), graph_(build_adjacency(data.train, data.num_users, data.num_items)) {
  cfg_.validate();
  data.validate();
  if (cfg_.has_contrastive() && data.modalities.size() != 2) {
    fail(ErrorCode::kConfig, "the contrastive loss pairs exactly two modalities; dataset has " +
                                 std::to_string(data.modalities.size()));
  }
  if ((cfg_.has_modal_transform() || cfg_.has_hypergraph()) && data.modalities.empty()) {
    fail(ErrorCode::kConfig, "multimodal variants need at least one modality");
  }
  if (!cfg_.fuses_collaborative() && !cfg_.fuses_modal() && !cfg_.has_hypergraph()) {
    fail(ErrorCode::kConfig, "every fusion term is ablated");
  }
  for (const auto& f : data.features) features_.push_back(std::make_shared<const DenseMatrix>(f));
}

ParamSet Model::init_params(std::uint64_t seed) const {
  Rng rng = make_stream(seed, Stream::kInit);
  ParamSet p;
  p.add("id_embeddings", xavier_uniform(num_users() + num_items(), cfg_.dim, rng));
  if (cfg_.has_modal_transform()) {
    for (std::size_t m = 0; m < data_->modalities.size(); ++m) {
      p.add(transform_name(data_->modalities[m]), xavier_uniform(features_[m]->cols(), cfg_.dim, rng));
    }
  }
  if (cfg_.has_hypergraph()) {
    for (std::size_t m = 0; m < data_->modalities.size(); ++m) {
      p.add(hyperedge_name(data_->modalities[m]),
            xavier_uniform(cfg_.hyperedges, features_[m]->cols(), rng));
    }
  }
  return p;
}

void Model::check_params(const ParamSet& params) const {
  const ParamSet expected = init_params(0);
  if (params.size() != expected.size()) {
    fail(ErrorCode::kDimension, "parameter set has " + std::to_string(params.size()) +
                                    " entries, model expects " + std::to_string(expected.size()));
  }
  for (std::size_t s = 0; s < expected.size(); ++s) {
    if (params.name(s) != expected.name(s) || !params[s].same_shape(expected[s])) {
      fail(ErrorCode::kDimension, "parameter '" + params.name(s) + "' does not match model slot '" +
                                      expected.name(s) + "'");
    }
  }
}

ForwardState Model::forward(ad::Tape& t, const ParamSet& params, const ForwardMode& mode) const {
  if (mode.training && (!mode.dropout_rng || !mode.gumbel_rng)) {
    fail(ErrorCode::kUsage, "training forward needs dropout and Gumbel streams");
  }
  const std::size_t nu = num_users();
  const std::size_t ni = num_items();
  const std::size_t n_mod = data_->modalities.size();
  ForwardState st;

  const std::size_t id_slot = params.slot("id_embeddings");
  st.id_leaf = t.parameter(id_slot, params[id_slot]);
  st.e_lge_id = lge::collaborative_propagate(t, st.id_leaf, graph_.norm_adj, cfg_.cge_layers);

  if (cfg_.has_modal_transform()) {
    std::optional<ad::Var> shared_users;
    if (cfg_.shares_user_ids()) {
      st.modal_id_leaf = t.parameter(id_slot, params[id_slot]);
      shared_users = ad::slice_rows(t, *st.modal_id_leaf, 0, nu);
    }
    for (std::size_t m = 0; m < n_mod; ++m) {
      const std::size_t slot = params.slot(transform_name(data_->modalities[m]));
      const ad::Var w = t.parameter(slot, params[slot]);
      st.transform_leaves.push_back(w);
      const ad::Var items = lge::transform_modal(t, t.constant(features_[m]), w);
      const ad::Var users =
          shared_users ? *shared_users : lge::init_user_modal(t, graph_.user_item_mean, items);
      const ad::Var parts[] = {users, items};
      st.e_lge_modal.push_back(
          lge::modality_propagate(t, ad::vstack(t, parts), graph_.norm_adj, cfg_.mge_layers));
    }
  }

  if (cfg_.has_hypergraph()) {
    Rng unused;
    Rng& drop_rng = mode.training ? *mode.dropout_rng : unused;
    Rng& gumbel_rng = mode.training ? *mode.gumbel_rng : unused;
    const ad::Var item_init = ad::slice_rows(t, st.e_lge_id, nu, ni);
    for (std::size_t m = 0; m < n_mod; ++m) {
      const std::size_t slot = params.slot(hyperedge_name(data_->modalities[m]));
      const ad::Var v = t.parameter(slot, params[slot]);
      st.hyperedge_leaves.push_back(v);
      const auto raw = ghe::build_dependencies(t, t.constant(features_[m]), v, graph_.user_item);
      ghe::Dependencies sharp{
          ghe::gumbel_sharpen(t, raw.item, cfg_.tau_gumbel, gumbel_rng, mode.training),
          ghe::gumbel_sharpen(t, raw.user, cfg_.tau_gumbel, gumbel_rng, mode.training)};
      st.sharpened.push_back(sharp);
      st.globals.push_back(ghe::hypergraph_propagate(t, sharp.item, sharp.user, item_init,
                                                     cfg_.hyper_layers, cfg_.dropout, drop_rng,
                                                     mode.training));
    }
    st.e_ghe = ghe::aggregate_global(t, st.globals);
  }

  objective::FuseInputs in;
  if (cfg_.fuses_collaborative()) in.collaborative = st.e_lge_id;
  in.modal = st.e_lge_modal;
  in.global = st.e_ghe;
  in.alpha = cfg_.alpha;
  st.e_star = objective::fuse(t, in);
  return st;
}

LossGraph Model::loss(ad::Tape& t, const ParamSet& params,
                      std::span<const objective::Triple> batch, const ForwardMode& mode) const {
  LossGraph g{forward(t, params, mode), {}, {}, {}, {}, {}};
  const std::size_t nu = num_users();

  std::vector<std::size_t> users;
  std::vector<std::size_t> pos_rows;
  std::vector<std::size_t> neg_rows;
  std::vector<std::size_t> items;
  for (const auto& tr : batch) {
    users.push_back(tr.user);
    pos_rows.push_back(nu + tr.pos);
    neg_rows.push_back(nu + tr.neg);
    items.push_back(tr.pos);
    items.push_back(tr.neg);
  }
  // Θ_batch: ID rows touched by the batch plus every transform and hyperedge matrix.
  std::vector<ad::Var> reg;
  reg.push_back(ad::gather_rows(t, g.forward.id_leaf, users));
  reg.push_back(ad::gather_rows(t, g.forward.id_leaf, pos_rows));
  reg.push_back(ad::gather_rows(t, g.forward.id_leaf, neg_rows));
  for (ad::Var w : g.forward.transform_leaves) reg.push_back(w);
  for (ad::Var v : g.forward.hyperedge_leaves) reg.push_back(v);

  g.ranking = objective::bpr_ranking_loss(t, g.forward.e_star, nu, batch);
  g.bpr = objective::regularize(t, g.ranking, cfg_.lambda1, reg);

  if (cfg_.has_contrastive()) {
    const auto user_pool = cfg_.hcl_pool == HclPool::kFull ? iota_vec(nu) : unique_sorted(users);
    const auto item_pool =
        cfg_.hcl_pool == HclPool::kFull ? iota_vec(num_items()) : unique_sorted(items);
    // A batch with a single distinct user has no negatives to contrast against.
    if (user_pool.size() < 2 || item_pool.size() < 2) {
      g.total = objective::total_loss(t, g.bpr, g.hcl_user, g.hcl_item, cfg_.lambda2);
      return g;
    }
    const auto hcl = ghe::hcl_loss(t, g.forward.globals[0], g.forward.globals[1], user_pool,
                                   item_pool, cfg_.tau_contrast);
    g.hcl_user = hcl.user;
    g.hcl_item = hcl.item;
  }
  g.total = objective::total_loss(t, g.bpr, g.hcl_user, g.hcl_item, cfg_.lambda2);
  return g;
}

DenseMatrix Model::embeddings(const ParamSet& params) const {
  ad::Tape t;
  const ForwardState st = forward(t, params, ForwardMode::eval());
  return t.value(st.e_star);
}

Model::SharpenedDependencies Model::dependencies(const ParamSet& params,
                                                 std::size_t modality) const {
  if (!cfg_.has_hypergraph()) {
    fail(ErrorCode::kUnavailable, "hyperedge dependencies are unavailable under ablation " +
                                      std::string(to_string(cfg_.ablation)));
  }
  if (modality >= data_->modalities.size()) fail(ErrorCode::kIndex, "modality out of range");
  ad::Tape t;
  const ForwardState st = forward(t, params, ForwardMode::eval());
  return {t.value(st.sharpened[modality].item), t.value(st.sharpened[modality].user)};
}

}  // namespace lgmrec
