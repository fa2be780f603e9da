#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lgmrec/data.hpp"

namespace lgmrec {

/// Synthetic corpus with planted item attributes. Each attribute has one random unit
/// centroid per modality; items carry one attribute; users prefer attributes.
struct SynthConfig {
  std::size_t num_users = 300;
  std::size_t num_items = 200;
  std::size_t num_attributes = 4;
  std::vector<std::string> modalities{"v", "t"};
  std::vector<std::size_t> feature_dims{32, 16};
  double interactions_per_user = 20.0;
  double feature_noise = 0.05;
  /// Exponent applied to Gamma(1,1) draws before normalizing; large values make
  /// each user single-attribute.
  double preference_sharpness = 2.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<Interaction> interactions;
  std::vector<std::string> modalities;
  std::vector<DenseMatrix> features;
  std::vector<std::size_t> item_attribute;
  std::vector<std::vector<double>> user_preference;
};

SyntheticCorpus generate_corpus(const SynthConfig& cfg);

/// Runs the corpus through the same k-core/split path as ingested files.
Dataset generate_synthetic(const SynthConfig& cfg, std::size_t kcore = 5,
                           SplitRatios ratios = {0.8, 0.1, 0.1}, std::uint64_t split_seed = 2024);

/// Writes interactions.tsv, features_<m>.lgmf per modality and labels.tsv (item<TAB>attribute).
void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus);

std::vector<std::size_t> load_labels(const std::filesystem::path& path);

}  // namespace lgmrec
