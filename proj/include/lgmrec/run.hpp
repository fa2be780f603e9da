#pragma once
// Run-level orchestration shared by the C API and tests: resolved configuration,
// run directories, checkpoints and the five commands.

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "lgmrec/datagen.hpp"
#include "lgmrec/evaluator.hpp"
#include "lgmrec/trainer.hpp"

namespace lgmrec {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct EvalConfig {
  std::vector<std::size_t> cutoffs{10, 20};
  std::vector<std::size_t> groups{5, 10, 20, 50};
};

struct RunConfig {
  std::string preset = "synthetic";
  TrainConfig train;
  /// Empty `interactions` means: generate the synthetic corpus.
  DatasetSource data;
  SynthConfig synth;
  EvalConfig eval;
};

RunConfig default_run_config(std::string_view preset);
nlohmann::json to_json(const RunConfig& cfg);
/// Overlays `doc` on the defaults of its preset. Unknown keys and type mismatches throw kConfig.
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Applies `key=value` to a partial config document. The key is a dotted path or a
/// leaf name that is unique across sections. Values parse as JSON, else as strings;
/// array targets also take comma-separated lists.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// defaults(preset) < file < overrides.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         std::span<const std::string> overrides);

std::string sha256_file(const std::filesystem::path& path);

/// Loads the configured files, or generates the synthetic corpus into `corpus_dir`
/// and repoints `cfg.data` at it.
Dataset load_run_dataset(RunConfig& cfg, const std::filesystem::path& corpus_dir);

struct Checkpoint {
  ParamSet params;
  RunConfig config;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
};

/// manifest.json plus one LGMF file per parameter.
void save_checkpoint(const std::filesystem::path& dir, const ParamSet& params,
                     const RunConfig& cfg, const Dataset& data);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// `metric@n<TAB>value` lines with round-trip precision.
std::string format_metrics(const RankingMetrics& m);

struct TrainOutcome {
  TrainHistory history;
  RankingMetrics test;
  std::filesystem::path out;
};

using Progress = std::function<void(const EpochStats&)>;

/// Writes run_manifest.json (before training), history.jsonl, checkpoint/, split and
/// id maps, and test_metrics.tsv computed from the reloaded checkpoint.
TrainOutcome run_train(RunConfig cfg, const std::filesystem::path& out,
                       const Progress& progress = {});

/// Config taken from a previous run manifest; data digests must still match.
RunConfig config_from_manifest(const std::filesystem::path& manifest);

struct EvalRequest {
  SplitKind split = SplitKind::kTest;
  std::vector<std::size_t> cutoffs{10, 20};
  std::optional<std::vector<std::size_t>> groups;
  std::vector<std::size_t> export_users;
};

struct EvalReport {
  RankingMetrics metrics;
  std::string metrics_text;
  std::optional<std::string> groups_text;
  std::optional<std::string> dependencies_text;
};

EvalReport run_evaluate(const std::filesystem::path& checkpoint,
                        std::span<const std::string> overrides, const EvalRequest& req,
                        const std::optional<std::filesystem::path>& out);

/// Writes the corpus files described by `cfg.synth`.
SyntheticCorpus run_generate(const RunConfig& cfg, const std::filesystem::path& out);

/// One `key=v1,v2,...` per axis; the Cartesian product is trained point by point.
/// Returns the results table, also written to results.tsv.
std::string run_sweep(const RunConfig& cfg, std::span<const std::string> grid,
                      const std::filesystem::path& out, const Progress& progress = {});

/// Forces shared user IDs, trains `epochs` epochs and writes conflict.tsv.
ConflictReport run_diagnose(RunConfig cfg, std::size_t users, std::size_t epochs,
                            const std::filesystem::path& out);

}  // namespace lgmrec
