#include "doctest.h"

#include <cstdlib>

#include "lgmrec/evaluator.hpp"
#include "support.hpp"

using namespace lgmrec;
using testing::error_code;

namespace {

// E* whose user/item inner products are the given score matrix: users are the score
// rows, items the identity.
DenseMatrix embed_scores(const DenseMatrix& scores) {
  const std::size_t nu = scores.rows(), ni = scores.cols();
  DenseMatrix e(nu + ni, ni);
  for (std::size_t u = 0; u < nu; ++u)
    for (std::size_t i = 0; i < ni; ++i) e(u, i) = scores(u, i);
  for (std::size_t i = 0; i < ni; ++i) e(nu + i, i) = 1.0;
  return e;
}

}  // namespace

TEST_CASE("rank_items examples") {
  const std::vector<double> s{0.1, 0.9, 0.5};
  CHECK(rank_items(s, {}, 2) == std::vector<std::size_t>{1, 2});
  const std::vector<double> flat(6, 0.3);
  CHECK(rank_items(flat, {}, 4) == std::vector<std::size_t>{0, 1, 2, 3});
  const std::vector<std::size_t> mask{1};
  CHECK(rank_items(s, mask, 2) == std::vector<std::size_t>{2, 0});
  CHECK(error_code([&] { rank_items(s, mask, 3); }) == ErrorCode::kTruncation);
}

TEST_CASE("rank_items matches a full sort") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(30);
    for (double& x : s) x = std::floor(uniform01(rng) * 8.0);  // many ties
    std::vector<std::size_t> mask;
    for (std::size_t i = 0; i < 30; ++i)
      if (uniform01(rng) < 0.2) mask.push_back(i);
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < 30; ++i)
      if (!std::binary_search(mask.begin(), mask.end(), i)) all.push_back(i);
    std::stable_sort(all.begin(), all.end(), [&](auto a, auto b) { return s[a] > s[b]; });
    const std::size_t n = std::min<std::size_t>(10, all.size());
    all.resize(n);
    CHECK(rank_items(s, mask, n) == all);
  }
}

TEST_CASE("metric closed forms") {
  const std::vector<std::size_t> rel2{3, 7};
  const std::vector<std::size_t> top{3, 1, 2};
  CHECK(recall_at_n(top, rel2) == 0.5);
  const std::vector<std::size_t> both{7, 3};
  CHECK(recall_at_n(both, rel2) == 1.0);
  const std::vector<std::size_t> single{4};
  const std::vector<std::size_t> first{4, 0};
  const std::vector<std::size_t> second{0, 4};
  CHECK(ndcg_at_n(first, single) == 1.0);
  CHECK(std::abs(ndcg_at_n(second, single) - 1.0 / std::log2(3.0)) < 1e-12);
  CHECK(error_code([&] { recall_at_n(top, {}); }) == ErrorCode::kUsage);
}

TEST_CASE("metrics match brute force on random cases") {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t n = 1 + uniform_index(rng, 20);
    const std::vector<std::size_t> top(perm.begin(), perm.begin() + static_cast<long>(n));
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t k = 1 + uniform_index(rng, 10);
    const std::vector<std::size_t> rel(perm.begin(), perm.begin() + static_cast<long>(k));
    CHECK(recall_at_n(top, rel) == testing::brute_recall(top, rel));
    CHECK(std::abs(ndcg_at_n(top, rel) - testing::brute_ndcg(top, rel)) < 1e-12);
    CHECK(ndcg_at_n(top, rel) <= 1.0);
  }
}

TEST_CASE("perfect scores give full recall and masking holds") {
  auto d = testing::tiny_dataset(20, 30, {}, 6, 43);
  DenseMatrix scores(20, 30);
  for (const auto& r : d.test) scores(r.user, r.item) = 10.0;
  for (const auto& r : d.train) scores(r.user, r.item) = 100.0;  // masked away
  const std::size_t cut[] = {1, 5};
  const auto m = evaluate(embed_scores(scores), d, SplitKind::kTest, cut);
  CHECK(m.users == 20);
  CHECK(m.recall_at(1) == 1.0);
  CHECK(m.ndcg_at(5) == 1.0);
  CHECK(error_code([&] { m.recall_at(20); }) == ErrorCode::kUnavailable);

  // On the training split nothing is masked, so training items rank first.
  const std::size_t six[] = {6};
  CHECK(evaluate(embed_scores(scores), d, SplitKind::kTrain, six).recall[0] == 1.0);
}

TEST_CASE("evaluation ignores user order and thread count") {
  auto d = testing::tiny_dataset(40, 50, {}, 5, 44);
  Rng rng(45);
  const auto e = embed_scores(testing::random_dense(40, 50, rng));
  const std::size_t cut[] = {10, 20};
  const auto base = evaluate(e, d, SplitKind::kTest, cut, {.threads = 1});
  for (std::size_t th : {2, 3, 7}) {
    const auto m = evaluate(e, d, SplitKind::kTest, cut, {.threads = th});
    CHECK(m.recall == base.recall);
    CHECK(m.ndcg == base.ndcg);
  }
  std::vector<std::size_t> users(40);
  std::iota(users.begin(), users.end(), 0);
  std::reverse(users.begin(), users.end());
  const auto rev = evaluate(e, d, SplitKind::kTest, cut, {.threads = 1, .users = users});
  CHECK(rev.recall == base.recall);
  for (double v : base.recall) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("random scores sit near the analytic baseline") {
  auto d = testing::tiny_dataset(3000, 100, {}, 10, 46);
  Rng rng(47);
  const auto e = embed_scores(testing::random_dense(3000, 100, rng));
  const std::size_t cut[] = {20};
  const auto m = evaluate(e, d, SplitKind::kTest, cut, {.threads = 4});
  // One test item among 90 candidates.
  CHECK(m.recall[0] == doctest::Approx(20.0 / 90.0).epsilon(0.08));
}

TEST_CASE("LGMREC_THREADS is read and validated") {
  setenv("LGMREC_THREADS", "3", 1);
  CHECK(threads_from_env() == 3);
  setenv("LGMREC_THREADS", "zero", 1);
  CHECK(error_code([] { threads_from_env(); }) == ErrorCode::kConfig);
  unsetenv("LGMREC_THREADS");
  CHECK(threads_from_env() == 1);
}

TEST_CASE("sparsity groups partition users") {
  auto d = testing::tiny_dataset(30, 30, {}, 3, 48);
  d.num_items = 40;
  d.item_original.resize(40);
  // Give users varying training counts, on items outside the original 30.
  for (std::size_t u = 0; u < 30; ++u)
    for (std::size_t extra = 0; extra < u % 7; ++extra) d.train.push_back({u, 30 + extra});
  CHECK_NOTHROW(d.validate());
  Rng rng(49);
  const auto e = embed_scores(testing::random_dense(30, 40, rng));
  const std::size_t cut[] = {10};
  const std::size_t bounds[] = {5, 10, 20, 50};
  const auto groups = sparsity_group_report(e, d, bounds, SplitKind::kTest, cut);
  REQUIRE(groups.size() == 5);
  std::size_t total = 0;
  for (const auto& g : groups) total += g.population;
  CHECK(total == 30);

  std::vector<std::size_t> counts(30, 0);
  for (const auto& r : d.train) ++counts[r.user];
  std::size_t le5 = 0, le10 = 0;
  for (auto c : counts) (c <= 5 ? le5 : le10) += 1;
  CHECK(groups[0].population == le5);
  CHECK(groups[1].population == le10);
  CHECK_FALSE(groups[4].metrics.has_value());

  const std::size_t everyone[] = {1000};
  const auto one = sparsity_group_report(e, d, everyone, SplitKind::kTest, cut);
  CHECK(one[0].metrics->recall == evaluate(e, d, SplitKind::kTest, cut).recall);
  const std::size_t bad[] = {5, 5};
  CHECK(error_code([&] { sparsity_group_report(e, d, bad, SplitKind::kTest, cut); }) ==
        ErrorCode::kConfig);
  const auto text = format_group_report(groups);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}

TEST_CASE("pair consistency and Rand index") {
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  const std::vector<std::size_t> perm{3, 3, 5, 5};
  CHECK(pair_consistency(perm, labels) == 1.0);
  CHECK(rand_index(perm, labels) == 1.0);
  const std::vector<std::size_t> merged{0, 0, 0, 0};
  CHECK(pair_consistency(merged, labels) == 1.0);
  CHECK(rand_index(merged, labels) == doctest::Approx(2.0 / 6.0));
  const std::vector<std::size_t> split{0, 1, 2, 3};
  CHECK(pair_consistency(split, labels) == 0.0);
}

TEST_CASE("hyperedge export") {
  const auto d = testing::tiny_dataset(6, 10, {4, 3}, 3, 50);
  TrainConfig cfg;
  cfg.dim = 4;
  cfg.hyperedges = 1;
  const Model m(cfg, d);
  const auto p = m.init_params(1);
  const std::size_t users[] = {0, 5};
  const auto deps = export_hyperedge_dependencies(m, p, users);
  REQUIRE(deps.size() == 4);
  for (const auto& u : deps) {
    CHECK(u.hyperedge_scores == std::vector<double>{1.0});
    CHECK(u.items.size() == 3);
    for (const auto& it : u.items) {
      CHECK(it.hyperedge == 0);
      CHECK(it.score == 1.0);
    }
  }
  const auto text = format_dependencies(deps, d);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);

  cfg.hyperedges = 3;
  const Model m3(cfg, d);
  const auto p3 = m3.init_params(2);
  for (const auto& u : export_hyperedge_dependencies(m3, p3, users)) {
    double s = 0.0;
    for (double x : u.hyperedge_scores) s += x;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  cfg.ablation = Ablation::kNoGhe;
  const Model plain(cfg, d);
  CHECK(error_code([&] { export_hyperedge_dependencies(plain, plain.init_params(1), users); }) ==
        ErrorCode::kUnavailable);
}
