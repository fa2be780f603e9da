#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace lgmrec {

enum class Ablation { kNone, kNoMm, kNoLge, kNoCge, kNoMge, kNoGhe, kNoHcl, kSuid };
enum class HclPool { kBatch, kFull };

std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view s);
std::string_view to_string(HclPool p);
HclPool parse_hcl_pool(std::string_view s);

/// Every model and optimization hyperparameter.
struct TrainConfig {
  std::size_t dim = 64;            // d
  std::size_t cge_layers = 2;      // L
  std::size_t mge_layers = 2;      // K
  std::size_t hyper_layers = 1;    // H
  std::size_t hyperedges = 4;      // A
  double alpha = 0.3;
  double dropout = 0.5;            // rho
  double tau_contrast = 0.2;
  double tau_gumbel = 0.2;
  double lambda1 = 1e-6;
  double lambda2 = 1e-4;
  std::size_t batch = 2048;
  double lr = 0.001;
  std::size_t patience = 20;
  std::size_t max_epochs = 1000;
  std::uint64_t seed = 2024;
  Ablation ablation = Ablation::kNone;
  HclPool hcl_pool = HclPool::kBatch;

  void validate() const;

  // Which pieces of the model exist under the configured ablation.
  bool has_modal_transform() const;
  bool has_hypergraph() const;
  bool has_contrastive() const;
  bool fuses_collaborative() const;
  bool fuses_modal() const;
  bool shares_user_ids() const { return ablation == Ablation::kSuid; }
};

/// Published per-dataset defaults for `baby`, `sports`, `clothing`; small defaults for `synthetic`.
TrainConfig preset_config(std::string_view preset);

}  // namespace lgmrec
