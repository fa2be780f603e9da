#include "lgmrec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "lgmrec/error.hpp"
#include "lgmrec/evaluator.hpp"

namespace lgmrec {

TripleSampler::TripleSampler(std::span<const Interaction> train, std::size_t num_users,
                             std::size_t num_items)
    : num_items_(num_items), items_(num_users) {
  for (const auto& r : train) {
    if (r.user >= num_users || r.item >= num_items) fail(ErrorCode::kIndex, "interaction out of range");
    items_[r.user].push_back(r.item);
  }
  for (auto& v : items_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  // Users who interacted with every item cannot be given a negative; they are skipped.
  for (const auto& r : train)
    if (items_[r.user].size() < num_items_) positives_.push_back(r);
  if (positives_.empty()) fail(ErrorCode::kEmptyDataset, "no user has a non-interacted item");
}

bool TripleSampler::interacted(std::size_t user, std::size_t item) const {
  const auto& v = items_.at(user);
  return std::binary_search(v.begin(), v.end(), item);
}

std::size_t TripleSampler::negative_for(std::size_t user, Rng& rng) const {
  if (items_.at(user).size() >= num_items_) fail(ErrorCode::kUsage, "user has no negative item");
  for (;;) {
    const std::size_t j = uniform_index(rng, num_items_);
    if (!interacted(user, j)) return j;
  }
}

std::vector<objective::Triple> TripleSampler::sample(std::size_t batch, Rng& rng) const {
  std::vector<objective::Triple> out;
  out.reserve(batch);
  for (std::size_t k = 0; k < batch; ++k) {
    const auto& r = positives_[uniform_index(rng, positives_.size())];
    out.push_back({r.user, r.item, negative_for(r.user, rng)});
  }
  return out;
}

std::vector<std::vector<objective::Triple>> TripleSampler::epoch(std::size_t batch,
                                                                 Rng& rng) const {
  if (batch == 0) fail(ErrorCode::kConfig, "batch size must be positive");
  std::vector<std::size_t> order(positives_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<objective::Triple>> out;
  for (std::size_t begin = 0; begin < order.size(); begin += batch) {
    const std::size_t end = std::min(order.size(), begin + batch);
    std::vector<objective::Triple> b;
    b.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
      const auto& r = positives_[order[k]];
      b.push_back({r.user, r.item, negative_for(r.user, rng)});
    }
    out.push_back(std::move(b));
  }
  return out;
}

bool EpochStats::same_values(const EpochStats& o) const {
  return epoch == o.epoch && steps == o.steps && total == o.total && bpr == o.bpr &&
         hcl == o.hcl && valid_recall == o.valid_recall;
}

bool TrainHistory::same_values(const TrainHistory& o) const {
  if (epochs.size() != o.epochs.size()) return false;
  for (std::size_t k = 0; k < epochs.size(); ++k)
    if (!epochs[k].same_values(o.epochs[k])) return false;
  return best_epoch == o.best_epoch && best_valid == o.best_valid && truncated == o.truncated;
}

std::string TrainHistory::to_jsonl() const {
  std::ostringstream os;
  for (const auto& e : epochs) {
    nlohmann::json j{{"epoch", e.epoch},  {"steps", e.steps}, {"total", e.total},
                     {"bpr", e.bpr},      {"hcl", e.hcl},     {"seconds", e.seconds}};
    j["valid_recall@20"] = e.valid_recall ? nlohmann::json(*e.valid_recall) : nlohmann::json();
    os << j.dump() << '\n';
  }
  return os.str();
}

bool EarlyStopping::update(double score) {
  ++epoch_;
  improved_ = best_epoch_ == 0 || score > best_;
  if (improved_) {
    best_ = score;
    best_epoch_ = epoch_;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

Trainer::Trainer(const Model& model, ParamSet params)
    : model_(model),
      params_(std::move(params)),
      adam_(AdamState::zeros_like(params_.values())),
      sampler_(model.data().train, model.num_users(), model.num_items()),
      sampling_rng_(make_stream(model.config().seed, Stream::kSampling)),
      dropout_rng_(make_stream(model.config().seed, Stream::kDropout)),
      gumbel_rng_(make_stream(model.config().seed, Stream::kGumbel)) {
  model_.check_params(params_);
}

EpochStats Trainer::train_epoch() { return train_epoch(StepHook{}); }

EpochStats Trainer::train_epoch(const StepHook& hook) {
  const auto batches = sampler_.epoch(model_.config().batch, sampling_rng_);
  return train_batches(batches, hook);
}

EpochStats Trainer::train_batches(std::span<const std::vector<objective::Triple>> batches,
                                  const StepHook& hook) {
  const auto start = std::chrono::steady_clock::now();
  const AdamOptions opts{.lr = model_.config().lr};
  EpochStats stats;
  stats.epoch = ++epochs_;
  for (const auto& batch : batches) {
    ++stats.steps;
    ad::Tape t;
    const ForwardMode mode{true, &dropout_rng_, &gumbel_rng_};
    LossGraph g;
    try {
      g = model_.loss(t, params_, batch, mode);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      fail(ErrorCode::kNumeric, "epoch " + std::to_string(stats.epoch) + " step " +
                                    std::to_string(stats.steps) + ": " + e.what());
    }
    const double total = t.value(g.total)(0, 0);
    const double bpr = t.value(g.bpr)(0, 0);
    double hcl = 0.0;
    if (g.hcl_user) hcl += t.value(*g.hcl_user)(0, 0);
    if (g.hcl_item) hcl += t.value(*g.hcl_item)(0, 0);
    if (!std::isfinite(total) || !std::isfinite(bpr) || !std::isfinite(hcl)) {
      std::ostringstream os;
      os << "non-finite loss at epoch " << stats.epoch << " step " << stats.steps
         << ": total=" << total << " bpr=" << bpr << " hcl=" << hcl;
      fail(ErrorCode::kNumeric, os.str());
    }
    if (hook) hook(t, g, batch);
    const auto grads = t.backward(g.total);
    const auto pg = t.parameter_gradients(grads, params_.values());
    adam_step(params_.values(), pg, adam_, opts);
    stats.total += total;
    stats.bpr += bpr;
    stats.hcl += hcl;
  }
  if (stats.steps > 0) {
    const double n = static_cast<double>(stats.steps);
    stats.total /= n;
    stats.bpr /= n;
    stats.hcl /= n;
  }
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

Validator validation_recall(const Model& model, std::size_t n) {
  if (model.data().valid.empty()) fail(ErrorCode::kEmptyDataset, "validation split is empty");
  return [&model, n](const ParamSet& p) {
    const std::size_t cutoffs[] = {n};
    return evaluate(model.embeddings(p), model.data(), SplitKind::kValid, cutoffs).recall[0];
  };
}

FitResult fit(const Model& model, ParamSet init, const Validator& validator,
              const FitOptions& opts) {
  const Validator score = validator ? validator : validation_recall(model);
  const TrainConfig& cfg = model.config();
  Trainer trainer(model, std::move(init));
  EarlyStopping stopper(cfg.patience);
  FitResult out{trainer.params(), {}};
  bool stopped = false;
  while (trainer.epochs_run() < cfg.max_epochs) {
    EpochStats stats = trainer.train_epoch();
    const auto t0 = std::chrono::steady_clock::now();
    const double v = score(trainer.params());
    stats.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stats.valid_recall = v;
    stopped = stopper.update(v);
    if (stopper.improved()) out.best_params = trainer.params();
    out.history.epochs.push_back(stats);
    if (opts.on_epoch) opts.on_epoch(stats);
    if (stopped) break;
  }
  out.history.best_epoch = stopper.best_epoch();
  out.history.best_valid = stopper.best();
  out.history.truncated = !stopped;
  return out;
}

double opposite_sign_ratio(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) fail(ErrorCode::kDimension, "gradient rows differ in length");
  std::size_t opposite = 0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if ((a[k] > 0.0 && b[k] < 0.0) || (a[k] < 0.0 && b[k] > 0.0)) ++opposite;
  return static_cast<double>(opposite) / static_cast<double>(a.size());
}

std::string ConflictReport::to_tsv() const {
  std::ostringstream os;
  os << "# per-epoch accumulated BPR gradients on shared user ID rows\n";
  os << "epoch\tuser\tratio\n";
  os.precision(10);
  for (std::size_t e = 0; e < ratios.size(); ++e) {
    for (std::size_t k = 0; k < users.size(); ++k) {
      os << e + 1 << '\t' << users[k] << '\t';
      if (ratios[e][k]) os << *ratios[e][k]; else os << "NA";
      os << '\n';
    }
  }
  return os.str();
}

ConflictReport gradient_conflict_diagnostic(const Model& model, ParamSet init,
                                            std::span<const std::size_t> users,
                                            std::size_t epochs) {
  if (!model.config().shares_user_ids()) {
    fail(ErrorCode::kConfig, "the conflict diagnostic needs ablation=suid");
  }
  const std::size_t d = model.config().dim;
  const std::size_t nu = model.num_users();
  std::vector<std::ptrdiff_t> slot(nu, -1);
  for (std::size_t k = 0; k < users.size(); ++k) {
    if (users[k] >= nu) fail(ErrorCode::kIndex, "diagnostic user out of range");
    slot[users[k]] = static_cast<std::ptrdiff_t>(k);
  }

  ConflictReport report;
  report.users.assign(users.begin(), users.end());
  Trainer trainer(model, std::move(init));
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<std::vector<double>> collab(users.size(), std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> modal(users.size(), std::vector<double>(d, 0.0));
    std::vector<bool> seen(users.size(), false);
    const auto hook = [&](const ad::Tape& t, const LossGraph& g,
                          std::span<const objective::Triple> batch) {
      bool any = false;
      for (const auto& tr : batch) {
        if (slot[tr.user] >= 0) {
          seen[static_cast<std::size_t>(slot[tr.user])] = true;
          any = true;
        }
      }
      if (!any) return;
      // The two leaves are separate nodes, so one pass yields both pathway gradients.
      const auto grads = t.backward(g.ranking);
      const auto accumulate = [&](ad::Var leaf, std::vector<std::vector<double>>& acc) {
        if (!grads.reached(leaf)) return;
        const DenseMatrix& gm = grads[leaf];
        for (std::size_t k = 0; k < users.size(); ++k) {
          const auto row = gm.row(users[k]);
          for (std::size_t c = 0; c < d; ++c) acc[k][c] += row[c];
        }
      };
      accumulate(g.forward.id_leaf, collab);
      accumulate(*g.forward.modal_id_leaf, modal);
    };
    report.epochs.push_back(trainer.train_epoch(hook));
    std::vector<std::optional<double>> row(users.size());
    for (std::size_t k = 0; k < users.size(); ++k)
      if (seen[k]) row[k] = opposite_sign_ratio(collab[k], modal[k]);
    report.ratios.push_back(std::move(row));
  }
  return report;
}

std::vector<std::size_t> sample_users(std::size_t num_users, std::size_t count,
                                      std::uint64_t seed) {
  if (count > num_users) fail(ErrorCode::kConfig, "more diagnostic users than users");
  Rng rng = make_stream(seed, Stream::kDiagnostic);
  std::vector<std::size_t> all(num_users);
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace lgmrec
