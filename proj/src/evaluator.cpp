#include "lgmrec/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "lgmrec/error.hpp"
#include "lgmrec/objective.hpp"

namespace lgmrec {

SplitKind parse_split(std::string_view s) {
  if (s == "train") return SplitKind::kTrain;
  if (s == "valid") return SplitKind::kValid;
  if (s == "test") return SplitKind::kTest;
  fail(ErrorCode::kConfig, "unknown split '" + std::string(s) + "'");
}

std::string_view to_string(SplitKind s) {
  switch (s) {
    case SplitKind::kTrain: return "train";
    case SplitKind::kValid: return "valid";
    case SplitKind::kTest: return "test";
  }
  return "?";
}

std::vector<std::size_t> rank_items(std::span<const double> scores,
                                    std::span<const std::size_t> mask, std::size_t n) {
  std::vector<std::size_t> candidates;
  candidates.reserve(scores.size());
  std::size_t m = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    while (m < mask.size() && mask[m] < i) ++m;
    if (m < mask.size() && mask[m] == i) continue;
    candidates.push_back(i);
  }
  if (n > candidates.size()) {
    fail(ErrorCode::kTruncation, "requested top-" + std::to_string(n) + " of " +
                                     std::to_string(candidates.size()) + " candidates");
  }
  const auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n),
                    candidates.end(), better);
  candidates.resize(n);
  return candidates;
}

std::vector<std::size_t> rank_items(const DenseMatrix& e_star, std::size_t num_users,
                                    std::size_t user, std::span<const std::size_t> mask,
                                    std::size_t n) {
  if (user >= num_users || e_star.rows() < num_users) fail(ErrorCode::kIndex, "user out of range");
  const std::size_t num_items = e_star.rows() - num_users;
  std::vector<double> scores(num_items);
  for (std::size_t i = 0; i < num_items; ++i) scores[i] = objective::score(e_star, num_users, user, i);
  return rank_items(scores, mask, n);
}

namespace {

bool contains(std::span<const std::size_t> set, std::size_t x) {
  return std::find(set.begin(), set.end(), x) != set.end();
}

void require_relevant(std::span<const std::size_t> relevant) {
  if (relevant.empty()) fail(ErrorCode::kUsage, "metric needs a nonempty relevant set");
}

}  // namespace

double recall_at_n(std::span<const std::size_t> topn, std::span<const std::size_t> relevant) {
  require_relevant(relevant);
  std::size_t hits = 0;
  for (std::size_t item : topn) hits += contains(relevant, item) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_n(std::span<const std::size_t> topn, std::span<const std::size_t> relevant) {
  require_relevant(relevant);
  double dcg = 0.0;
  for (std::size_t p = 0; p < topn.size(); ++p)
    if (contains(relevant, topn[p])) dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min(topn.size(), relevant.size());
  for (std::size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

double RankingMetrics::recall_at(std::size_t n) const {
  for (std::size_t k = 0; k < cutoffs.size(); ++k)
    if (cutoffs[k] == n) return recall[k];
  fail(ErrorCode::kUnavailable, "recall@" + std::to_string(n) + " was not evaluated");
}

double RankingMetrics::ndcg_at(std::size_t n) const {
  for (std::size_t k = 0; k < cutoffs.size(); ++k)
    if (cutoffs[k] == n) return ndcg[k];
  fail(ErrorCode::kUnavailable, "ndcg@" + std::to_string(n) + " was not evaluated");
}

std::size_t threads_from_env() {
  const char* env = std::getenv("LGMREC_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) fail(ErrorCode::kConfig, "LGMREC_THREADS must be a positive integer");
  return static_cast<std::size_t>(v);
}

RankingMetrics evaluate(const DenseMatrix& e_star, const Dataset& data, SplitKind split,
                        std::span<const std::size_t> cutoffs, const EvalOptions& opts) {
  if (cutoffs.empty()) fail(ErrorCode::kConfig, "no cutoffs given");
  const std::size_t nu = data.num_users;
  const std::size_t ni = data.num_items;
  if (e_star.rows() != nu + ni) fail(ErrorCode::kDimension, "E* rows do not match the dataset");

  std::vector<std::vector<std::size_t>> relevant(nu);
  std::vector<std::vector<std::size_t>> mask(nu);
  const auto& target = split == SplitKind::kTrain ? data.train
                       : split == SplitKind::kValid ? data.valid
                                                    : data.test;
  for (const auto& r : target) relevant[r.user].push_back(r.item);
  if (split != SplitKind::kTrain) {
    for (const auto& r : data.train) mask[r.user].push_back(r.item);
    for (auto& m : mask) std::sort(m.begin(), m.end());
  }

  std::vector<std::size_t> users;
  if (opts.users.empty()) {
    users.resize(nu);
    std::iota(users.begin(), users.end(), 0);
  } else {
    users.assign(opts.users.begin(), opts.users.end());
    std::sort(users.begin(), users.end());
  }
  const std::size_t max_n = *std::max_element(cutoffs.begin(), cutoffs.end());
  const std::size_t nc = cutoffs.size();

  // Per-user rows [recall..., ndcg...], reduced in user order afterwards.
  std::vector<std::vector<double>> per_user(users.size());
  const auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(ni);
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t u = users[k];
      if (u >= nu) fail(ErrorCode::kIndex, "user out of range");
      if (relevant[u].empty()) continue;
      for (std::size_t i = 0; i < ni; ++i) scores[i] = objective::score(e_star, nu, u, i);
      const std::size_t n_avail = ni - mask[u].size();
      const auto top = rank_items(scores, mask[u], std::min(max_n, n_avail));
      std::vector<double> row(2 * nc);
      for (std::size_t c = 0; c < nc; ++c) {
        const std::span<const std::size_t> head(top.data(), std::min(cutoffs[c], top.size()));
        row[c] = recall_at_n(head, relevant[u]);
        row[nc + c] = ndcg_at_n(head, relevant[u]);
      }
      per_user[k] = std::move(row);
    }
  };

  const std::size_t threads = std::max<std::size_t>(
      1, std::min(opts.threads ? opts.threads : threads_from_env(), users.size()));
  if (threads <= 1) {
    work(0, users.size());
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (users.size() + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t begin = std::min(users.size(), w * chunk);
      const std::size_t end = std::min(users.size(), begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  RankingMetrics out;
  out.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  out.recall.assign(nc, 0.0);
  out.ndcg.assign(nc, 0.0);
  for (const auto& row : per_user) {
    if (row.empty()) continue;
    ++out.users;
    for (std::size_t c = 0; c < nc; ++c) {
      out.recall[c] += row[c];
      out.ndcg[c] += row[nc + c];
    }
  }
  if (out.users > 0) {
    for (std::size_t c = 0; c < nc; ++c) {
      out.recall[c] /= static_cast<double>(out.users);
      out.ndcg[c] /= static_cast<double>(out.users);
    }
  }
  return out;
}

std::vector<GroupMetrics> sparsity_group_report(const DenseMatrix& e_star, const Dataset& data,
                                                std::span<const std::size_t> boundaries,
                                                SplitKind split,
                                                std::span<const std::size_t> cutoffs,
                                                const EvalOptions& opts) {
  for (std::size_t k = 1; k < boundaries.size(); ++k) {
    if (boundaries[k] <= boundaries[k - 1]) {
      fail(ErrorCode::kConfig, "group boundaries must be strictly increasing");
    }
  }
  std::vector<std::size_t> train_count(data.num_users, 0);
  for (const auto& r : data.train) ++train_count[r.user];

  std::vector<GroupMetrics> groups(boundaries.size() + 1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g].lower = g == 0 ? 0 : boundaries[g - 1] + 1;
    if (g < boundaries.size()) groups[g].upper = boundaries[g];
  }
  std::vector<std::vector<std::size_t>> members(groups.size());
  for (std::size_t u = 0; u < data.num_users; ++u) {
    const auto it = std::lower_bound(boundaries.begin(), boundaries.end(), train_count[u]);
    members[static_cast<std::size_t>(it - boundaries.begin())].push_back(u);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g].population = members[g].size();
    if (members[g].empty()) continue;
    EvalOptions o = opts;
    o.users = members[g];
    RankingMetrics m = evaluate(e_star, data, split, cutoffs, o);
    if (m.users > 0) groups[g].metrics = std::move(m);
  }
  return groups;
}

std::string format_group_report(std::span<const GroupMetrics> groups) {
  std::ostringstream os;
  os << "group\tusers\tevaluated";
  std::vector<std::size_t> cutoffs;
  for (const auto& g : groups) {
    if (g.metrics) {
      cutoffs = g.metrics->cutoffs;
      break;
    }
  }
  for (auto n : cutoffs) os << "\trecall@" << n;
  for (auto n : cutoffs) os << "\tndcg@" << n;
  os << '\n' << std::setprecision(10);
  for (const auto& g : groups) {
    os << g.lower << '-';
    if (g.upper) os << *g.upper; else os << "inf";
    os << '\t' << g.population << '\t' << (g.metrics ? g.metrics->users : 0);
    for (std::size_t k = 0; k < 2 * cutoffs.size(); ++k) {
      os << '\t';
      if (!g.metrics) {
        os << "NA";
      } else {
        os << (k < cutoffs.size() ? g.metrics->recall[k] : g.metrics->ndcg[k - cutoffs.size()]);
      }
    }
    os << '\n';
  }
  return os.str();
}

namespace {

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

std::vector<UserDependencies> export_hyperedge_dependencies(const Model& model,
                                                            const ParamSet& params,
                                                            std::span<const std::size_t> users) {
  const Dataset& data = model.data();
  std::vector<std::vector<std::size_t>> neighbours(data.num_users);
  for (const auto& r : data.train) neighbours[r.user].push_back(r.item);
  for (auto& n : neighbours) std::sort(n.begin(), n.end());

  std::vector<UserDependencies> out;
  for (std::size_t m = 0; m < data.modalities.size(); ++m) {
    const auto deps = model.dependencies(params, m);
    for (std::size_t u : users) {
      if (u >= data.num_users) fail(ErrorCode::kIndex, "export user out of range");
      UserDependencies ud;
      ud.user = u;
      ud.modality = data.modalities[m];
      const auto row = deps.user.row(u);
      ud.hyperedge_scores.assign(row.begin(), row.end());
      for (std::size_t i : neighbours[u]) {
        const auto irow = deps.item.row(i);
        const std::size_t a = argmax_row(irow);
        ud.items.push_back({i, a, irow[a]});
      }
      out.push_back(std::move(ud));
    }
  }
  return out;
}

std::string format_dependencies(std::span<const UserDependencies> deps, const Dataset& data) {
  std::ostringstream os;
  for (const auto& d : deps) {
    nlohmann::json j;
    j["user"] = d.user;
    j["user_original"] = data.user_original.at(d.user);
    j["modality"] = d.modality;
    j["hyperedge_scores"] = d.hyperedge_scores;
    auto items = nlohmann::json::array();
    for (const auto& it : d.items) {
      items.push_back({{"item", it.item},
                       {"item_original", data.item_original.at(it.item)},
                       {"hyperedge", it.hyperedge},
                       {"score", it.score}});
    }
    j["items"] = std::move(items);
    os << j.dump() << '\n';
  }
  return os.str();
}

std::vector<std::size_t> item_hyperedges(const Model& model, const ParamSet& params,
                                         std::size_t modality) {
  const auto deps = model.dependencies(params, modality);
  std::vector<std::size_t> out(deps.item.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax_row(deps.item.row(i));
  return out;
}

double pair_consistency(std::span<const std::size_t> clusters,
                        std::span<const std::size_t> labels) {
  if (clusters.size() != labels.size()) fail(ErrorCode::kDimension, "cluster/label length mismatch");
  std::size_t pairs = 0;
  std::size_t agree = 0;
  for (std::size_t a = 0; a < labels.size(); ++a) {
    for (std::size_t b = a + 1; b < labels.size(); ++b) {
      if (labels[a] != labels[b]) continue;
      ++pairs;
      agree += clusters[a] == clusters[b] ? 1 : 0;
    }
  }
  return pairs == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(pairs);
}

double rand_index(std::span<const std::size_t> clusters, std::span<const std::size_t> labels) {
  if (clusters.size() != labels.size()) fail(ErrorCode::kDimension, "cluster/label length mismatch");
  std::size_t pairs = 0;
  std::size_t agree = 0;
  for (std::size_t a = 0; a < labels.size(); ++a) {
    for (std::size_t b = a + 1; b < labels.size(); ++b) {
      ++pairs;
      agree += (labels[a] == labels[b]) == (clusters[a] == clusters[b]) ? 1 : 0;
    }
  }
  return pairs == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(pairs);
}

}  // namespace lgmrec
