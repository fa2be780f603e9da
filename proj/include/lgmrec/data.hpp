#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgmrec/tensor.hpp"

namespace lgmrec {

struct Interaction {
  std::size_t user;
  std::size_t item;
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Users and items remapped to dense ids, per-user split, and per-modality item
/// features with row i belonging to dense item i.
struct Dataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<Interaction> train;
  std::vector<Interaction> valid;
  std::vector<Interaction> test;
  std::vector<std::string> modalities;
  std::vector<DenseMatrix> features;
  /// Dense id -> id as it appeared in the input files.
  std::vector<std::size_t> user_original;
  std::vector<std::size_t> item_original;

  const DenseMatrix& feature(std::string_view modality) const;
  /// Throws on any broken invariant (disjoint splits, train coverage, feature rows).
  void validate() const;
};

/// `user<TAB>item` lines; `#` comments and blank lines skipped; duplicates dropped
/// keeping first occurrence order.
std::vector<Interaction> parse_interactions(std::istream& in);
std::vector<Interaction> load_interactions(const std::filesystem::path& path);
void write_interactions(const std::filesystem::path& path, std::span<const Interaction> records);

struct KCoreResult {
  std::vector<Interaction> records;  // dense ids
  std::vector<std::size_t> user_original;
  std::vector<std::size_t> item_original;
};

/// Iteratively drops users and items with fewer than k interactions, then remaps the
/// survivors to dense ids in ascending original-id order.
KCoreResult k_core_filter(std::span<const Interaction> records, std::size_t k);

struct SplitResult {
  std::vector<Interaction> train;
  std::vector<Interaction> valid;
  std::vector<Interaction> test;
};

using SplitRatios = std::array<double, 3>;

/// Per-user shuffle-and-cut. Valid and test get floor(n * ratio); train keeps the
/// remainder. Users with fewer than 3 interactions keep one in train and hand the
/// surplus to valid, then test.
SplitResult split_dataset(std::span<const Interaction> records, SplitRatios ratios,
                          std::uint64_t seed);

// LGMF: "LGMF" magic, u32 version = 1, u64 rows, u64 cols, rows*cols float32, little-endian.
DenseMatrix read_feature_matrix(std::istream& in, std::optional<std::size_t> expected_rows);
DenseMatrix load_feature_matrix(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_rows);
void write_feature_matrix(std::ostream& out, const DenseMatrix& m);
void write_feature_matrix(const std::filesystem::path& path, const DenseMatrix& m);

/// Normalized bipartite adjacency over users-then-items plus the user-item block.
struct Graph {
  CsrMatrix norm_adj;        // D^-1/2 A D^-1/2, (|U|+|I|)^2
  CsrMatrix user_item;       // binary, |U| x |I|
  CsrMatrix user_item_mean;  // rows scaled by 1/|N_u|
  std::vector<std::size_t> degree;
};

Graph build_adjacency(std::span<const Interaction> train, std::size_t num_users,
                      std::size_t num_items);

struct DatasetSource {
  std::filesystem::path interactions;
  std::vector<std::string> modalities;
  std::vector<std::filesystem::path> feature_files;
  std::size_t kcore = 5;
  SplitRatios ratios{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 2024;
};

/// Load, k-core filter, split, and gather feature rows. Feature files are indexed by
/// original item id and must have exactly max(original item id) + 1 rows.
Dataset load_dataset(const DatasetSource& src);
Dataset assemble_dataset(std::span<const Interaction> raw, std::vector<std::string> modalities,
                         std::span<const DenseMatrix> raw_features, std::size_t kcore,
                         SplitRatios ratios, std::uint64_t split_seed);

/// `user<TAB>item<TAB>{train|valid|test}` with dense ids.
void write_split_manifest(const std::filesystem::path& path, const Dataset& data);
/// `dense<TAB>original` per line.
void write_remap(const std::filesystem::path& path, std::span<const std::size_t> original);

}  // namespace lgmrec
