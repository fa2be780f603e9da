#include "lgmrec/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lgmrec/error.hpp"
#include "lgmrec/rng.hpp"

namespace lgmrec {

void SynthConfig::validate() const {
  if (num_users == 0 || num_items == 0 || num_attributes == 0) {
    fail(ErrorCode::kConfig, "synthetic counts must be positive");
  }
  if (num_attributes > num_items) fail(ErrorCode::kConfig, "more attributes than items");
  if (modalities.empty() || modalities.size() != feature_dims.size()) {
    fail(ErrorCode::kConfig, "need one feature dimension per modality");
  }
  for (auto d : feature_dims)
    if (d == 0) fail(ErrorCode::kConfig, "feature dimensions must be positive");
  if (!(interactions_per_user > 0.0)) fail(ErrorCode::kConfig, "interactions_per_user must be > 0");
  if (interactions_per_user > static_cast<double>(num_items)) {
    fail(ErrorCode::kConfig, "requested interactions per user exceed the item catalog");
  }
  if (!(feature_noise >= 0.0)) fail(ErrorCode::kConfig, "feature_noise must be >= 0");
  if (!(preference_sharpness > 0.0)) fail(ErrorCode::kConfig, "preference_sharpness must be > 0");
}

SyntheticCorpus generate_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = make_stream(cfg.seed, Stream::kGenerate);
  std::normal_distribution<double> normal(0.0, 1.0);
  SyntheticCorpus out;
  out.modalities = cfg.modalities;

  // Balanced attribute assignment in shuffled order.
  std::vector<std::size_t> order(cfg.num_items);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  out.item_attribute.assign(cfg.num_items, 0);
  for (std::size_t k = 0; k < cfg.num_items; ++k) out.item_attribute[order[k]] = k % cfg.num_attributes;

  for (std::size_t dim : cfg.feature_dims) {
    DenseMatrix centroids(cfg.num_attributes, dim);
    for (std::size_t a = 0; a < cfg.num_attributes; ++a) {
      double sq = 0.0;
      for (double& v : centroids.row(a)) {
        v = normal(rng);
        sq += v * v;
      }
      for (double& v : centroids.row(a)) v /= std::sqrt(sq);
    }
    DenseMatrix feats(cfg.num_items, dim);
    for (std::size_t i = 0; i < cfg.num_items; ++i) {
      const auto c = centroids.row(out.item_attribute[i]);
      auto f = feats.row(i);
      for (std::size_t j = 0; j < dim; ++j) {
        const double noise = normal(rng);
        f[j] = c[j] + cfg.feature_noise * noise;
      }
    }
    out.features.push_back(std::move(feats));
  }

  std::vector<std::vector<std::size_t>> items_of(cfg.num_attributes);
  for (std::size_t i = 0; i < cfg.num_items; ++i) items_of[out.item_attribute[i]].push_back(i);

  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::poisson_distribution<std::size_t> count_dist(cfg.interactions_per_user);
  const std::size_t min_count =
      std::min<std::size_t>(5, static_cast<std::size_t>(std::llround(cfg.interactions_per_user)));

  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    std::vector<double> logits(cfg.num_attributes);
    for (double& l : logits) {
      const double g = std::max(gamma(rng), 1e-300);
      l = cfg.preference_sharpness * std::log(g);
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> pref(cfg.num_attributes);
    double total = 0.0;
    for (std::size_t a = 0; a < pref.size(); ++a) total += pref[a] = std::exp(logits[a] - mx);
    for (double& p : pref) p /= total;

    const std::size_t n_u = std::clamp(count_dist(rng), std::max<std::size_t>(min_count, 1),
                                       cfg.num_items);
    std::vector<bool> taken(cfg.num_items, false);
    std::vector<std::size_t> remaining_in(cfg.num_attributes);
    for (std::size_t a = 0; a < cfg.num_attributes; ++a) remaining_in[a] = items_of[a].size();

    for (std::size_t k = 0; k < n_u; ++k) {
      // Attribute from the preference, restricted to attributes with untaken items.
      double mass = 0.0;
      for (std::size_t a = 0; a < pref.size(); ++a)
        if (remaining_in[a] > 0) mass += pref[a];
      std::size_t attr = 0;
      if (mass > 0.0) {
        double x = uniform01(rng) * mass;
        for (attr = 0; attr < pref.size(); ++attr) {
          if (remaining_in[attr] == 0) continue;
          x -= pref[attr];
          if (x < 0.0) break;
        }
        if (attr == pref.size()) {
          for (attr = pref.size(); attr-- > 0;)
            if (remaining_in[attr] > 0) break;
        }
      } else {
        std::vector<std::size_t> open;
        for (std::size_t a = 0; a < pref.size(); ++a)
          if (remaining_in[a] > 0) open.push_back(a);
        attr = open[uniform_index(rng, open.size())];
      }
      const auto& pool = items_of[attr];
      std::size_t item = 0;
      do {
        item = pool[uniform_index(rng, pool.size())];
      } while (taken[item]);
      taken[item] = true;
      --remaining_in[attr];
      out.interactions.push_back({u, item});
    }
    out.user_preference.push_back(std::move(pref));
  }
  return out;
}

Dataset generate_synthetic(const SynthConfig& cfg, std::size_t kcore, SplitRatios ratios,
                           std::uint64_t split_seed) {
  const SyntheticCorpus corpus = generate_corpus(cfg);
  return assemble_dataset(corpus.interactions, corpus.modalities, corpus.features, kcore, ratios,
                          split_seed);
}

void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir);
  write_interactions(dir / "interactions.tsv", corpus.interactions);
  for (std::size_t m = 0; m < corpus.modalities.size(); ++m) {
    write_feature_matrix(dir / ("features_" + corpus.modalities[m] + ".lgmf"), corpus.features[m]);
  }
  std::ofstream labels(dir / "labels.tsv");
  if (!labels) fail(ErrorCode::kIo, "cannot write labels.tsv");
  for (std::size_t i = 0; i < corpus.item_attribute.size(); ++i)
    labels << i << '\t' << corpus.item_attribute[i] << '\n';
  if (!labels) fail(ErrorCode::kIo, "write failed for labels.tsv");
}

std::vector<std::size_t> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::size_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t item = 0;
    std::size_t attr = 0;
    if (!(ls >> item >> attr) || item != labels.size()) {
      fail(ErrorCode::kParse, "labels line " + std::to_string(line_no) + " malformed");
    }
    labels.push_back(attr);
  }
  return labels;
}

}  // namespace lgmrec
