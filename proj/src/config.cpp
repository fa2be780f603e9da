#include "lgmrec/config.hpp"

#include "lgmrec/error.hpp"

namespace lgmrec {

namespace {

constexpr std::pair<Ablation, std::string_view> kAblationNames[] = {
    {Ablation::kNone, "none"},     {Ablation::kNoMm, "no_mm"},   {Ablation::kNoLge, "no_lge"},
    {Ablation::kNoCge, "no_cge"},  {Ablation::kNoMge, "no_mge"}, {Ablation::kNoGhe, "no_ghe"},
    {Ablation::kNoHcl, "no_hcl"},  {Ablation::kSuid, "suid"},
};

}  // namespace

std::string_view to_string(Ablation a) {
  for (const auto& [v, name] : kAblationNames)
    if (v == a) return name;
  return "?";
}

Ablation parse_ablation(std::string_view s) {
  for (const auto& [v, name] : kAblationNames)
    if (name == s) return v;
  fail(ErrorCode::kConfig, "unknown ablation '" + std::string(s) + "'");
}

std::string_view to_string(HclPool p) { return p == HclPool::kBatch ? "batch" : "full"; }

HclPool parse_hcl_pool(std::string_view s) {
  if (s == "batch") return HclPool::kBatch;
  if (s == "full") return HclPool::kFull;
  fail(ErrorCode::kConfig, "unknown hcl_pool '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (dim == 0) fail(ErrorCode::kConfig, "dim must be positive");
  if (mge_layers == 0) fail(ErrorCode::kConfig, "mge_layers (K) must be >= 1");
  if (hyper_layers == 0) fail(ErrorCode::kConfig, "hyper_layers (H) must be >= 1");
  if (hyperedges == 0) fail(ErrorCode::kConfig, "hyperedges (A) must be >= 1");
  if (!(alpha >= 0.0)) fail(ErrorCode::kConfig, "alpha must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::kConfig, "dropout must be in [0,1)");
  if (!(tau_contrast > 0.0)) fail(ErrorCode::kConfig, "tau_contrast must be > 0");
  if (!(tau_gumbel > 0.0)) fail(ErrorCode::kConfig, "tau_gumbel must be > 0");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail(ErrorCode::kConfig, "lambdas must be >= 0");
  if (batch == 0) fail(ErrorCode::kConfig, "batch must be positive");
  if (!(lr >= 0.0)) fail(ErrorCode::kConfig, "lr must be >= 0");
  if (patience == 0) fail(ErrorCode::kConfig, "patience must be positive");
  if (max_epochs == 0) fail(ErrorCode::kConfig, "max_epochs must be positive");
}

bool TrainConfig::has_modal_transform() const {
  return ablation != Ablation::kNoMm && ablation != Ablation::kNoMge &&
         ablation != Ablation::kNoLge;
}

bool TrainConfig::has_hypergraph() const {
  return ablation != Ablation::kNoMm && ablation != Ablation::kNoGhe;
}

bool TrainConfig::has_contrastive() const {
  return has_hypergraph() && ablation != Ablation::kNoHcl;
}

bool TrainConfig::fuses_collaborative() const {
  return ablation != Ablation::kNoCge && ablation != Ablation::kNoLge;
}

bool TrainConfig::fuses_modal() const { return has_modal_transform(); }

TrainConfig preset_config(std::string_view preset) {
  TrainConfig c;
  if (preset == "baby") {
    c.cge_layers = 2, c.mge_layers = 2, c.hyper_layers = 1, c.hyperedges = 4;
    c.alpha = 0.3, c.dropout = 0.5;
  } else if (preset == "sports") {
    c.cge_layers = 4, c.mge_layers = 2, c.hyper_layers = 1, c.hyperedges = 4;
    c.alpha = 0.6, c.dropout = 0.4;
  } else if (preset == "clothing") {
    c.cge_layers = 3, c.mge_layers = 2, c.hyper_layers = 2, c.hyperedges = 64;
    c.alpha = 0.2, c.dropout = 0.2;
  } else if (preset == "synthetic") {
    c.cge_layers = 2, c.mge_layers = 2, c.hyper_layers = 1, c.hyperedges = 4;
    c.alpha = 0.3, c.dropout = 0.5;
    c.max_epochs = 200;
  } else {
    fail(ErrorCode::kConfig, "unknown preset '" + std::string(preset) + "'");
  }
  c.lambda1 = 1e-6;
  c.lambda2 = 1e-4;
  return c;
}

}  // namespace lgmrec
