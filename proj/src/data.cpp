#include "lgmrec/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "lgmrec/error.hpp"
#include "lgmrec/rng.hpp"

namespace lgmrec {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'M', 'F'};
constexpr std::uint32_t kVersion = 1;

struct PairHash {
  std::size_t operator()(const std::pair<std::size_t, std::size_t>& p) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(p.first) << 32 ^ p.second) *
                                      0x9e3779b97f4a7c15ULL);
  }
};

bool parse_id(std::string_view tok, std::size_t& out) {
  if (tok.empty()) return false;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

template <typename T>
void put_le(std::ostream& out, T v) {
  char bytes[sizeof v];
  std::memcpy(bytes, &v, sizeof v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof v);
  out.write(bytes, sizeof v);
}

template <typename T>
bool get_le(std::istream& in, T& v) {
  char bytes[sizeof v];
  if (!in.read(bytes, sizeof v)) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof v);
  std::memcpy(&v, bytes, sizeof v);
  return true;
}

}  // namespace

const DenseMatrix& Dataset::feature(std::string_view modality) const {
  for (std::size_t k = 0; k < modalities.size(); ++k)
    if (modalities[k] == modality) return features[k];
  fail(ErrorCode::kUnavailable, "no modality " + std::string(modality));
}

void Dataset::validate() const {
  if (features.size() != modalities.size()) {
    fail(ErrorCode::kDimension, "modality list and feature list differ in length");
  }
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].rows() != num_items) {
      fail(ErrorCode::kDimension, "feature matrix '" + modalities[k] + "' has " +
                                      std::to_string(features[k].rows()) + " rows, expected " +
                                      std::to_string(num_items));
    }
  }
  std::unordered_set<std::pair<std::size_t, std::size_t>, PairHash> seen;
  std::vector<bool> has_train(num_users, false);
  for (const auto* part : {&train, &valid, &test}) {
    for (const auto& r : *part) {
      if (r.user >= num_users || r.item >= num_items)
        fail(ErrorCode::kIndex, "interaction id out of range");
      if (!seen.insert({r.user, r.item}).second)
        fail(ErrorCode::kFormat, "interaction repeated across or within splits");
    }
  }
  for (const auto& r : train) has_train[r.user] = true;
  for (std::size_t u = 0; u < num_users; ++u)
    if (!has_train[u]) fail(ErrorCode::kFormat, "user " + std::to_string(u) + " has no training interaction");
}

std::vector<Interaction> parse_interactions(std::istream& in) {
  std::vector<Interaction> out;
  std::unordered_set<std::pair<std::size_t, std::size_t>, PairHash> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto tab = line.find('\t');
    std::size_t user = 0;
    std::size_t item = 0;
    if (tab == std::string::npos ||
        !parse_id(std::string_view(line).substr(0, tab), user) ||
        !parse_id(std::string_view(line).substr(tab + 1), item)) {
      fail(ErrorCode::kParse, "line " + std::to_string(line_no) + ": expected user<TAB>item, got '" +
                                  line + "'");
    }
    if (seen.insert({user, item}).second) out.push_back({user, item});
  }
  if (out.empty()) fail(ErrorCode::kEmptyDataset, "no interactions in input");
  return out;
}

std::vector<Interaction> load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return parse_interactions(in);
}

void write_interactions(const std::filesystem::path& path, std::span<const Interaction> records) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& r : records) out << r.user << '\t' << r.item << '\n';
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

KCoreResult k_core_filter(std::span<const Interaction> records, std::size_t k) {
  if (k < 1) fail(ErrorCode::kConfig, "k-core threshold must be >= 1");
  std::vector<Interaction> current(records.begin(), records.end());
  while (true) {
    std::map<std::size_t, std::size_t> user_deg;
    std::map<std::size_t, std::size_t> item_deg;
    for (const auto& r : current) {
      ++user_deg[r.user];
      ++item_deg[r.item];
    }
    std::vector<Interaction> next;
    next.reserve(current.size());
    for (const auto& r : current)
      if (user_deg[r.user] >= k && item_deg[r.item] >= k) next.push_back(r);
    if (next.size() == current.size()) break;
    current = std::move(next);
  }
  if (current.empty()) fail(ErrorCode::kEmptyDataset, "k-core filtering removed every interaction");

  KCoreResult out;
  std::map<std::size_t, std::size_t> user_map;
  std::map<std::size_t, std::size_t> item_map;
  for (const auto& r : current) {
    user_map.emplace(r.user, 0);
    item_map.emplace(r.item, 0);
  }
  for (auto& [orig, dense] : user_map) {
    dense = out.user_original.size();
    out.user_original.push_back(orig);
  }
  for (auto& [orig, dense] : item_map) {
    dense = out.item_original.size();
    out.item_original.push_back(orig);
  }
  out.records.reserve(current.size());
  for (const auto& r : current) out.records.push_back({user_map[r.user], item_map[r.item]});
  return out;
}

SplitResult split_dataset(std::span<const Interaction> records, SplitRatios ratios,
                          std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    fail(ErrorCode::kConfig, "split ratios must be non-negative and sum to 1");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_user;
  for (const auto& r : records) by_user[r.user].push_back(r.item);

  Rng rng = make_stream(seed, Stream::kSplit);
  SplitResult out;
  for (auto& [user, items] : by_user) {
    std::shuffle(items.begin(), items.end(), rng);
    const std::size_t n = items.size();
    std::size_t n_valid = 0;
    std::size_t n_test = 0;
    if (n < 3) {
      n_valid = n >= 2 ? 1 : 0;
      n_test = n >= 3 ? 1 : 0;
    } else {
      n_valid = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[1] + 1e-9));
      n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[2] + 1e-9));
    }
    const std::size_t n_train = n - n_valid - n_test;
    for (std::size_t k = 0; k < n; ++k) {
      const Interaction r{user, items[k]};
      if (k < n_train) out.train.push_back(r);
      else if (k < n_train + n_valid) out.valid.push_back(r);
      else out.test.push_back(r);
    }
  }
  return out;
}

DenseMatrix read_feature_matrix(std::istream& in, std::optional<std::size_t> expected_rows) {
  char magic[4];
  if (!in.read(magic, 4)) fail(ErrorCode::kTruncation, "feature file truncated in header");
  if (std::memcmp(magic, kMagic, 4) != 0) fail(ErrorCode::kFormat, "feature file: bad magic");
  std::uint32_t version = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  if (!get_le(in, version) || !get_le(in, rows) || !get_le(in, cols)) {
    fail(ErrorCode::kTruncation, "feature file truncated in header");
  }
  if (version != kVersion) {
    fail(ErrorCode::kFormat, "feature file: unsupported version " + std::to_string(version));
  }
  if (expected_rows && rows != *expected_rows) {
    fail(ErrorCode::kDimension, "feature file has " + std::to_string(rows) + " rows, expected " +
                                    std::to_string(*expected_rows));
  }
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) {
    std::uint32_t bits = 0;
    if (!get_le(in, bits)) fail(ErrorCode::kTruncation, "feature file truncated in payload");
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) fail(ErrorCode::kNumeric, "feature file contains non-finite value");
    v = static_cast<double>(f);
  }
  return m;
}

DenseMatrix load_feature_matrix(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return read_feature_matrix(in, expected_rows);
}

void write_feature_matrix(std::ostream& out, const DenseMatrix& m) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.cols());
  for (double v : m.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

void write_feature_matrix(const std::filesystem::path& path, const DenseMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  write_feature_matrix(out, m);
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Graph build_adjacency(std::span<const Interaction> train, std::size_t num_users,
                      std::size_t num_items) {
  const std::size_t n = num_users + num_items;
  std::vector<std::size_t> degree(n, 0);
  std::vector<Triplet> ui;
  ui.reserve(train.size());
  for (const auto& r : train) {
    if (r.user >= num_users || r.item >= num_items) {
      fail(ErrorCode::kIndex, "interaction (" + std::to_string(r.user) + "," +
                                  std::to_string(r.item) + ") outside " +
                                  std::to_string(num_users) + " users x " +
                                  std::to_string(num_items) + " items");
    }
    ui.push_back({r.user, r.item, 1.0});
  }
  Graph g;
  g.user_item = CsrMatrix::from_triplets(num_users, num_items, std::move(ui));
  if (g.user_item.nnz() != train.size()) {
    fail(ErrorCode::kFormat, "duplicate training interactions");
  }

  for (std::size_t u = 0; u < num_users; ++u) {
    degree[u] = g.user_item.row_nnz(u);
  }
  for (std::size_t c : g.user_item.col_idx()) ++degree[num_users + c];

  std::vector<Triplet> adj;
  std::vector<Triplet> mean;
  adj.reserve(2 * train.size());
  mean.reserve(train.size());
  const auto row_ptr = g.user_item.row_ptr();
  const auto col_idx = g.user_item.col_idx();
  for (std::size_t u = 0; u < num_users; ++u) {
    for (std::size_t k = row_ptr[u]; k < row_ptr[u + 1]; ++k) {
      const std::size_t item_node = num_users + col_idx[k];
      const double w = 1.0 / std::sqrt(static_cast<double>(degree[u]) *
                                        static_cast<double>(degree[item_node]));
      adj.push_back({u, item_node, w});
      adj.push_back({item_node, u, w});
      mean.push_back({u, col_idx[k], 1.0 / static_cast<double>(degree[u])});
    }
  }
  g.norm_adj = CsrMatrix::from_triplets(n, n, std::move(adj));
  g.user_item_mean = CsrMatrix::from_triplets(num_users, num_items, std::move(mean));
  g.degree = std::move(degree);
  return g;
}

Dataset assemble_dataset(std::span<const Interaction> raw, std::vector<std::string> modalities,
                         std::span<const DenseMatrix> raw_features, std::size_t kcore,
                         SplitRatios ratios, std::uint64_t split_seed) {
  if (modalities.size() != raw_features.size()) {
    fail(ErrorCode::kConfig, "modality names and feature matrices differ in count");
  }
  KCoreResult core = k_core_filter(raw, kcore);
  SplitResult split = split_dataset(core.records, ratios, split_seed);

  Dataset d;
  d.num_users = core.user_original.size();
  d.num_items = core.item_original.size();
  d.train = std::move(split.train);
  d.valid = std::move(split.valid);
  d.test = std::move(split.test);
  d.modalities = std::move(modalities);
  for (const auto& raw_m : raw_features) {
    DenseMatrix m(d.num_items, raw_m.cols());
    for (std::size_t i = 0; i < d.num_items; ++i) {
      const std::size_t src = core.item_original[i];
      if (src >= raw_m.rows()) fail(ErrorCode::kDimension, "feature matrix lacks item row");
      std::copy(raw_m.row(src).begin(), raw_m.row(src).end(), m.row(i).begin());
    }
    d.features.push_back(std::move(m));
  }
  d.user_original = std::move(core.user_original);
  d.item_original = std::move(core.item_original);
  d.validate();
  return d;
}

Dataset load_dataset(const DatasetSource& src) {
  if (src.modalities.size() != src.feature_files.size()) {
    fail(ErrorCode::kConfig, "modality names and feature files differ in count");
  }
  const auto raw = load_interactions(src.interactions);
  std::size_t max_item = 0;
  for (const auto& r : raw) max_item = std::max(max_item, r.item);
  std::vector<DenseMatrix> feats;
  for (const auto& f : src.feature_files) feats.push_back(load_feature_matrix(f, max_item + 1));
  return assemble_dataset(raw, src.modalities, feats, src.kcore, src.ratios, src.split_seed);
}

void write_split_manifest(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  const std::pair<const char*, const std::vector<Interaction>*> parts[] = {
      {"train", &data.train}, {"valid", &data.valid}, {"test", &data.test}};
  for (const auto& [name, records] : parts)
    for (const auto& r : *records) out << r.user << '\t' << r.item << '\t' << name << '\n';
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

void write_remap(const std::filesystem::path& path, std::span<const std::size_t> original) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (std::size_t k = 0; k < original.size(); ++k) out << k << '\t' << original[k] << '\n';
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace lgmrec
