#include "doctest.h"

#include <map>

#include "lgmrec/trainer.hpp"
#include "support.hpp"

using namespace lgmrec;
using testing::error_code;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.hyperedges = 2;
  cfg.batch = 16;
  cfg.lr = 0.01;
  cfg.max_epochs = 50;
  return cfg;
}

}  // namespace

TEST_CASE("forced negative") {
  const std::vector<Interaction> train{{0, 0}};
  const TripleSampler s(train, 1, 2);
  Rng rng(1);
  for (const auto& t : s.sample(50, rng)) {
    CHECK(t.pos == 0);
    CHECK(t.neg == 1);
  }
}

TEST_CASE("sampled triples respect membership") {
  const auto d = testing::tiny_dataset(12, 15, {}, 5, 2);
  const TripleSampler s(d.train, 12, 15);
  Rng rng(2);
  for (const auto& batch : s.epoch(7, rng)) {
    CHECK(batch.size() <= 7);
    for (const auto& t : batch) {
      CHECK(s.interacted(t.user, t.pos));
      CHECK_FALSE(s.interacted(t.user, t.neg));
    }
  }
  CHECK(s.epoch(7, rng).size() == (d.train.size() + 6) / 7);
}

TEST_CASE("negatives are uniform over non-interacted items") {
  const std::vector<Interaction> train{{0, 1}, {0, 4}, {0, 5}};
  const TripleSampler s(train, 1, 8);
  Rng rng(3);
  std::map<std::size_t, double> counts;
  const int n = 100000;
  for (int k = 0; k < n; ++k) counts[s.negative_for(0, rng)] += 1.0;
  CHECK(counts.size() == 5);
  double chi2 = 0.0;
  for (auto [item, c] : counts) {
    CHECK_FALSE(s.interacted(0, item));
    chi2 += (c - n / 5.0) * (c - n / 5.0) / (n / 5.0);
  }
  CHECK(chi2 < 18.47);  // chi-square, 4 dof, p = 0.001
}

TEST_CASE("users who took every item are skipped") {
  const std::vector<Interaction> train{{0, 0}, {0, 1}, {1, 0}};
  const TripleSampler s(train, 2, 2);
  CHECK(s.usable_interactions() == 1);
  const std::vector<Interaction> full{{0, 0}, {0, 1}};
  CHECK(error_code([&] { TripleSampler(full, 1, 2); }) == ErrorCode::kEmptyDataset);
}

TEST_CASE("early stopping rule") {
  EarlyStopping es(20);
  CHECK_FALSE(es.update(0.1));
  CHECK_FALSE(es.update(0.2));
  std::size_t epoch = 2;
  bool stopped = false;
  while (!stopped) {
    stopped = es.update(0.2);
    ++epoch;
  }
  CHECK(epoch == 22);
  CHECK(es.best_epoch() == 2);

  EarlyStopping up(3);
  for (int k = 1; k <= 100; ++k) CHECK_FALSE(up.update(k * 0.01));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto d = testing::tiny_dataset(8, 12, {4, 3}, 4, 4);
  auto cfg = small_config();
  cfg.lr = 0.0;
  const Model m(cfg, d);
  const auto init = m.init_params(1);
  Trainer tr(m, init);
  tr.train_epoch();
  CHECK(tr.params() == init);
}

TEST_CASE("BPR loss falls over 50 epochs") {
  const auto d = testing::tiny_dataset(10, 14, {4, 3}, 5, 5);
  const Model m(small_config(), d);
  Trainer tr(m, m.init_params(2));
  const double first = tr.train_epoch().bpr;
  double last = first;
  for (int e = 1; e < 50; ++e) last = tr.train_epoch().bpr;
  CHECK(last < first);
}

TEST_CASE("epoch stats are bitwise reproducible") {
  const auto d = testing::tiny_dataset(10, 14, {4, 3}, 5, 6);
  const Model m(small_config(), d);
  Trainer a(m, m.init_params(3));
  Trainer b(m, m.init_params(3));
  for (int e = 0; e < 3; ++e) CHECK(a.train_epoch().same_values(b.train_epoch()));
  CHECK(a.params() == b.params());
}

TEST_CASE("fit restores the best epoch and the score reproduces") {
  const auto d = testing::tiny_dataset(12, 16, {4, 3}, 5, 7);
  auto cfg = small_config();
  cfg.patience = 3;
  cfg.max_epochs = 30;
  const Model m(cfg, d);
  const auto validator = validation_recall(m);
  const auto res = fit(m, m.init_params(4), validator);
  REQUIRE(res.history.best_epoch >= 1);
  CHECK(validator(res.best_params) == res.history.best_valid);
  CHECK(res.history.epochs.size() <= cfg.max_epochs);
  for (const auto& e : res.history.epochs) CHECK(*e.valid_recall <= res.history.best_valid);
  if (!res.history.truncated) {
    CHECK(res.history.epochs.size() == res.history.best_epoch + cfg.patience);
  }
}

TEST_CASE("fit with a scripted score") {
  const auto d = testing::tiny_dataset(8, 12, {4, 3}, 4, 8);
  auto cfg = small_config();
  cfg.max_epochs = 6;
  const Model m(cfg, d);
  int calls = 0;
  const auto res = fit(m, m.init_params(5), [&](const ParamSet&) { return ++calls * 0.1; });
  CHECK(res.history.truncated);
  CHECK(res.history.epochs.size() == 6);
  CHECK(res.history.best_epoch == 6);
}

TEST_CASE("non-finite losses abort with the step") {
  const auto d = testing::tiny_dataset(8, 12, {4, 3}, 4, 9);
  auto cfg = small_config();
  cfg.lr = 1e200;
  const Model m(cfg, d);
  Trainer tr(m, m.init_params(6));
  try {
    for (int e = 0; e < 5; ++e) tr.train_epoch();
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumeric);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("opposite sign ratio fixtures") {
  const std::vector<double> g{0.5, -1.0, 2.0, 0.25};
  std::vector<double> neg;
  for (double x : g) neg.push_back(-x);
  CHECK(opposite_sign_ratio(g, g) == 0.0);
  CHECK(opposite_sign_ratio(g, neg) == 1.0);
  const std::vector<double> with_zero{0.0, -1.0, 2.0, 0.25};
  CHECK(opposite_sign_ratio(with_zero, neg) == 0.75);
  CHECK(error_code([&] { opposite_sign_ratio(g, std::span(with_zero).first(2)); }) == ErrorCode::kDimension);
}

TEST_CASE("conflict diagnostic needs shared IDs and reports every epoch") {
  const auto d = testing::tiny_dataset(10, 14, {4, 3}, 5, 10);
  auto cfg = small_config();
  const Model plain(cfg, d);
  const std::size_t users[] = {1, 4};
  CHECK(error_code([&] { gradient_conflict_diagnostic(plain, plain.init_params(1), users, 1); }) ==
        ErrorCode::kConfig);
  cfg.ablation = Ablation::kSuid;
  const Model m(cfg, d);
  const auto rep = gradient_conflict_diagnostic(m, m.init_params(1), users, 3);
  REQUIRE(rep.ratios.size() == 3);
  for (const auto& row : rep.ratios) {
    REQUIRE(row.size() == 2);
    for (const auto& r : row) {
      REQUIRE(r.has_value());
      CHECK(*r >= 0.0);
      CHECK(*r <= 1.0);
    }
  }
  const auto sampled = sample_users(10, 4, 1);
  CHECK(sampled.size() == 4);
  CHECK(std::is_sorted(sampled.begin(), sampled.end()));
  CHECK(sample_users(10, 4, 1) == sampled);
}
