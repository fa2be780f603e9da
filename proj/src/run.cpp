#include "lgmrec/run.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "lgmrec/error.hpp"

namespace lgmrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json to_json(const TrainConfig& c) {
  return {{"model",
           {{"dim", c.dim},
            {"cge_layers", c.cge_layers},
            {"mge_layers", c.mge_layers},
            {"hyper_layers", c.hyper_layers},
            {"hyperedges", c.hyperedges},
            {"alpha", c.alpha},
            {"dropout", c.dropout},
            {"tau_contrast", c.tau_contrast},
            {"tau_gumbel", c.tau_gumbel},
            {"ablation", std::string(to_string(c.ablation))}}},
          {"train",
           {{"lambda1", c.lambda1},
            {"lambda2", c.lambda2},
            {"batch", c.batch},
            {"lr", c.lr},
            {"patience", c.patience},
            {"max_epochs", c.max_epochs},
            {"seed", c.seed},
            {"hcl_pool", std::string(to_string(c.hcl_pool))}}}};
}

std::vector<std::string> path_strings(const std::vector<fs::path>& v) {
  std::vector<std::string> out;
  for (const auto& p : v) out.push_back(p.string());
  return out;
}

// Every key of `doc` must exist in `schema` with a compatible type.
void merge_checked(json& base, const json& doc, const std::string& where) {
  if (!doc.is_object()) fail(ErrorCode::kConfig, where + ": expected an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) fail(ErrorCode::kConfig, "unknown config key '" + path + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_checked(slot, value, path);
      continue;
    }
    const bool ok = (slot.is_number_unsigned() && value.is_number_unsigned()) ||
                    (slot.is_number_float() && value.is_number()) ||
                    (slot.is_string() && value.is_string()) ||
                    (slot.is_array() && value.is_array()) ||
                    (slot.is_boolean() && value.is_boolean());
    if (!ok) {
      fail(ErrorCode::kConfig, "config key '" + path + "' expects " +
                                   std::string(slot.type_name()) + ", got " + value.dump());
    }
    slot = value;
  }
}

template <class T>
T get_as(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config key '") + section + "." + key + "': " + e.what());
  }
}

// Leaf paths of the schema, for resolving bare override keys.
void leaf_paths(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      leaf_paths(value, path, out);
    } else {
      out.push_back(path);
    }
  }
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(',', start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

json parse_scalar(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) return json(text);
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

json data_digests(const RunConfig& cfg) {
  json d = json::object();
  d[cfg.data.interactions.string()] = sha256_file(cfg.data.interactions);
  for (const auto& f : cfg.data.feature_files) d[f.string()] = sha256_file(f);
  return d;
}

}  // namespace

RunConfig default_run_config(std::string_view preset) {
  RunConfig c;
  c.preset = std::string(preset);
  c.train = preset_config(preset);
  return c;
}

json to_json(const RunConfig& c) {
  json j = to_json(c.train);
  j["preset"] = c.preset;
  j["data"] = {{"interactions", c.data.interactions.string()},
               {"modalities", c.data.modalities},
               {"features", path_strings(c.data.feature_files)},
               {"kcore", c.data.kcore},
               {"split", c.data.ratios},
               {"split_seed", c.data.split_seed}};
  j["eval"] = {{"cutoffs", c.eval.cutoffs}, {"groups", c.eval.groups}};
  j["synthetic"] = {{"users", c.synth.num_users},
                    {"items", c.synth.num_items},
                    {"attributes", c.synth.num_attributes},
                    {"modalities", c.synth.modalities},
                    {"feature_dims", c.synth.feature_dims},
                    {"interactions_per_user", c.synth.interactions_per_user},
                    {"noise", c.synth.feature_noise},
                    {"sharpness", c.synth.preference_sharpness},
                    {"seed", c.synth.seed}};
  return j;
}

RunConfig run_config_from_json(const json& doc) {
  if (!doc.is_object()) fail(ErrorCode::kConfig, "config must be a JSON object");
  std::string preset = "synthetic";
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) fail(ErrorCode::kConfig, "preset must be a string");
    preset = doc["preset"].get<std::string>();
  }
  json j = to_json(default_run_config(preset));
  merge_checked(j, doc, "");

  RunConfig c;
  c.preset = preset;
  TrainConfig& t = c.train;
  t.dim = get_as<std::size_t>(j, "model", "dim");
  t.cge_layers = get_as<std::size_t>(j, "model", "cge_layers");
  t.mge_layers = get_as<std::size_t>(j, "model", "mge_layers");
  t.hyper_layers = get_as<std::size_t>(j, "model", "hyper_layers");
  t.hyperedges = get_as<std::size_t>(j, "model", "hyperedges");
  t.alpha = get_as<double>(j, "model", "alpha");
  t.dropout = get_as<double>(j, "model", "dropout");
  t.tau_contrast = get_as<double>(j, "model", "tau_contrast");
  t.tau_gumbel = get_as<double>(j, "model", "tau_gumbel");
  t.ablation = parse_ablation(get_as<std::string>(j, "model", "ablation"));
  t.lambda1 = get_as<double>(j, "train", "lambda1");
  t.lambda2 = get_as<double>(j, "train", "lambda2");
  t.batch = get_as<std::size_t>(j, "train", "batch");
  t.lr = get_as<double>(j, "train", "lr");
  t.patience = get_as<std::size_t>(j, "train", "patience");
  t.max_epochs = get_as<std::size_t>(j, "train", "max_epochs");
  t.seed = get_as<std::uint64_t>(j, "train", "seed");
  t.hcl_pool = parse_hcl_pool(get_as<std::string>(j, "train", "hcl_pool"));
  t.validate();

  c.data.interactions = get_as<std::string>(j, "data", "interactions");
  c.data.modalities = get_as<std::vector<std::string>>(j, "data", "modalities");
  for (const auto& f : get_as<std::vector<std::string>>(j, "data", "features"))
    c.data.feature_files.emplace_back(f);
  c.data.kcore = get_as<std::size_t>(j, "data", "kcore");
  const auto split = get_as<std::vector<double>>(j, "data", "split");
  if (split.size() != 3) fail(ErrorCode::kConfig, "data.split needs three ratios");
  c.data.ratios = {split[0], split[1], split[2]};
  c.data.split_seed = get_as<std::uint64_t>(j, "data", "split_seed");
  if (c.data.modalities.size() != c.data.feature_files.size()) {
    fail(ErrorCode::kConfig, "data.modalities and data.features differ in length");
  }

  c.eval.cutoffs = get_as<std::vector<std::size_t>>(j, "eval", "cutoffs");
  c.eval.groups = get_as<std::vector<std::size_t>>(j, "eval", "groups");
  if (c.eval.cutoffs.empty()) fail(ErrorCode::kConfig, "eval.cutoffs is empty");

  SynthConfig& s = c.synth;
  s.num_users = get_as<std::size_t>(j, "synthetic", "users");
  s.num_items = get_as<std::size_t>(j, "synthetic", "items");
  s.num_attributes = get_as<std::size_t>(j, "synthetic", "attributes");
  s.modalities = get_as<std::vector<std::string>>(j, "synthetic", "modalities");
  s.feature_dims = get_as<std::vector<std::size_t>>(j, "synthetic", "feature_dims");
  s.interactions_per_user = get_as<double>(j, "synthetic", "interactions_per_user");
  s.feature_noise = get_as<double>(j, "synthetic", "noise");
  s.preference_sharpness = get_as<double>(j, "synthetic", "sharpness");
  s.seed = get_as<std::uint64_t>(j, "synthetic", "seed");
  s.validate();
  return c;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail(ErrorCode::kConfig, "override '" + std::string(assignment) + "' is not key=value");
  }
  std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));

  const json schema = to_json(default_run_config("synthetic"));
  std::vector<std::string> leaves;
  leaf_paths(schema, "", leaves);
  if (key.find('.') == std::string::npos) {
    std::vector<std::string> hits;
    for (const auto& p : leaves) {
      const auto dot = p.rfind('.');
      if ((dot == std::string::npos ? p : p.substr(dot + 1)) == key) hits.push_back(p);
    }
    if (hits.empty()) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
    if (hits.size() > 1) {
      std::string all;
      for (const auto& h : hits) all += (all.empty() ? "" : ", ") + h;
      fail(ErrorCode::kConfig, "config key '" + key + "' is ambiguous: " + all);
    }
    key = hits.front();
  } else if (std::find(leaves.begin(), leaves.end(), key) == leaves.end()) {
    fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  }

  const json::json_pointer ptr("/" + [&] {
    std::string s = key;
    std::replace(s.begin(), s.end(), '.', '/');
    return s;
  }());
  json value = parse_scalar(text);
  if (schema.at(ptr).is_array() && !value.is_array()) {
    value = json::array();
    if (!text.empty())
      for (const auto& part : split_commas(text)) value.push_back(parse_scalar(part));
  }
  if (!doc.is_object()) doc = json::object();
  doc[ptr] = std::move(value);
}

RunConfig resolve_config(const std::optional<fs::path>& file,
                         std::span<const std::string> overrides) {
  json doc = file ? read_json(*file) : json::object();
  for (const auto& o : overrides) apply_override(doc, o);
  return run_config_from_json(doc);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kIo, "sha256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(md[k]);
  return os.str();
}

Dataset load_run_dataset(RunConfig& cfg, const fs::path& corpus_dir) {
  if (cfg.data.interactions.empty()) {
    const SyntheticCorpus corpus = generate_corpus(cfg.synth);
    ensure_dir(corpus_dir);
    write_corpus(corpus_dir, corpus);
    cfg.data.interactions = fs::absolute(corpus_dir / "interactions.tsv");
    cfg.data.modalities = corpus.modalities;
    cfg.data.feature_files.clear();
    for (const auto& m : corpus.modalities)
      cfg.data.feature_files.push_back(fs::absolute(corpus_dir / ("features_" + m + ".lgmf")));
  }
  return load_dataset(cfg.data);
}

void save_checkpoint(const fs::path& dir, const ParamSet& params, const RunConfig& cfg,
                     const Dataset& data) {
  ensure_dir(dir);
  json entries = json::array();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string file = params.name(k) + ".lgmf";
    write_feature_matrix(dir / file, params[k]);
    entries.push_back({{"name", params.name(k)},
                       {"rows", params[k].rows()},
                       {"cols", params[k].cols()},
                       {"file", file}});
  }
  const json manifest{{"version", kArtifactVersion},
                      {"num_users", data.num_users},
                      {"num_items", data.num_items},
                      {"params", entries},
                      {"config", to_json(cfg)}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const json m = read_json(dir / "manifest.json");
  Checkpoint c;
  try {
    c.config = run_config_from_json(m.at("config"));
    c.num_users = m.at("num_users").get<std::size_t>();
    c.num_items = m.at("num_items").get<std::size_t>();
    for (const auto& e : m.at("params")) {
      DenseMatrix v = load_feature_matrix(dir / e.at("file").get<std::string>(),
                                          e.at("rows").get<std::size_t>());
      if (v.cols() != e.at("cols").get<std::size_t>()) {
        fail(ErrorCode::kDimension, "checkpoint parameter " + e.at("name").get<std::string>() +
                                        " has the wrong column count");
      }
      c.params.add(e.at("name").get<std::string>(), std::move(v));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, "checkpoint manifest: " + std::string(e.what()));
  }
  return c;
}

std::string format_metrics(const RankingMetrics& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t k = 0; k < m.cutoffs.size(); ++k) os << "recall@" << m.cutoffs[k] << '\t' << m.recall[k] << '\n';
  for (std::size_t k = 0; k < m.cutoffs.size(); ++k) os << "ndcg@" << m.cutoffs[k] << '\t' << m.ndcg[k] << '\n';
  os << "users\t" << m.users << '\n';
  return os.str();
}

TrainOutcome run_train(RunConfig cfg, const fs::path& out, const Progress& progress) {
  ensure_dir(out);
  Dataset data = load_run_dataset(cfg, out / "data");

  json manifest{{"artifact", "lgmrec"},
                {"version", kArtifactVersion},
                {"command", "train"},
                {"seed", cfg.train.seed},
                {"config", to_json(cfg)},
                {"data_digests", data_digests(cfg)},
                {"outputs",
                 {{"history", "history.jsonl"},
                  {"checkpoint", "checkpoint"},
                  {"test_metrics", "test_metrics.tsv"},
                  {"split", "split.tsv"},
                  {"user_map", "user_map.tsv"},
                  {"item_map", "item_map.tsv"}}}};
  write_text(out / "run_manifest.json", manifest.dump(2) + "\n");
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");
  write_split_manifest(out / "split.tsv", data);
  write_remap(out / "user_map.tsv", data.user_original);
  write_remap(out / "item_map.tsv", data.item_original);

  const Model model(cfg.train, data);
  FitOptions opts;
  opts.on_epoch = progress;
  FitResult fitted = fit(model, model.init_params(cfg.train.seed), {}, opts);
  write_text(out / "history.jsonl", fitted.history.to_jsonl());

  save_checkpoint(out / "checkpoint", fitted.best_params, cfg, data);
  // Test metrics come from the stored (float32) checkpoint so `evaluate` reproduces them.
  const Checkpoint ck = load_checkpoint(out / "checkpoint");
  model.check_params(ck.params);
  TrainOutcome res;
  res.history = std::move(fitted.history);
  res.test = evaluate(model.embeddings(ck.params), data, SplitKind::kTest, cfg.eval.cutoffs);
  res.out = out;
  write_text(out / "test_metrics.tsv", format_metrics(res.test));
  return res;
}

RunConfig config_from_manifest(const fs::path& manifest) {
  const json m = read_json(manifest);
  if (!m.contains("config")) fail(ErrorCode::kFormat, manifest.string() + " has no config");
  RunConfig cfg = run_config_from_json(m["config"]);
  if (m.contains("data_digests")) {
    for (const auto& [file, digest] : m["data_digests"].items()) {
      if (sha256_file(file) != digest.get<std::string>()) {
        fail(ErrorCode::kConfig, "data file " + file + " changed since the manifest was written");
      }
    }
  }
  return cfg;
}

EvalReport run_evaluate(const fs::path& checkpoint, std::span<const std::string> overrides,
                        const EvalRequest& req, const std::optional<fs::path>& out) {
  Checkpoint ck = load_checkpoint(checkpoint);
  RunConfig cfg = ck.config;
  if (!overrides.empty()) {
    json doc = to_json(cfg);
    for (const auto& o : overrides) apply_override(doc, o);
    cfg = run_config_from_json(doc);
  }
  if (cfg.data.interactions.empty()) fail(ErrorCode::kConfig, "checkpoint names no data files");
  const Dataset data = load_dataset(cfg.data);
  if (data.num_users != ck.num_users || data.num_items != ck.num_items) {
    fail(ErrorCode::kDimension, "checkpoint was trained on " + std::to_string(ck.num_users) +
                                    " users / " + std::to_string(ck.num_items) +
                                    " items; data has " + std::to_string(data.num_users) +
                                    " / " + std::to_string(data.num_items));
  }
  const Model model(cfg.train, data);
  model.check_params(ck.params);
  const DenseMatrix e_star = model.embeddings(ck.params);

  EvalReport rep;
  rep.metrics = evaluate(e_star, data, req.split, req.cutoffs);
  rep.metrics_text = format_metrics(rep.metrics);
  if (req.groups) {
    const auto groups = sparsity_group_report(e_star, data, *req.groups, req.split, req.cutoffs);
    rep.groups_text = format_group_report(groups);
  }
  if (!req.export_users.empty()) {
    const auto deps = export_hyperedge_dependencies(model, ck.params, req.export_users);
    rep.dependencies_text = format_dependencies(deps, data);
  }
  if (out) {
    ensure_dir(*out);
    write_text(*out / "eval_metrics.tsv", rep.metrics_text);
    if (rep.groups_text) write_text(*out / "groups.tsv", *rep.groups_text);
    if (rep.dependencies_text) write_text(*out / "dependencies.jsonl", *rep.dependencies_text);
  }
  return rep;
}

SyntheticCorpus run_generate(const RunConfig& cfg, const fs::path& out) {
  ensure_dir(out);
  SyntheticCorpus corpus = generate_corpus(cfg.synth);
  write_corpus(out, corpus);
  return corpus;
}

std::string run_sweep(const RunConfig& cfg, std::span<const std::string> grid,
                      const fs::path& out, const Progress& progress) {
  if (grid.empty()) fail(ErrorCode::kConfig, "sweep grid is empty");
  struct Axis {
    std::string key;
    std::vector<std::string> values;
  };
  std::vector<Axis> axes;
  for (const auto& spec : grid) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      fail(ErrorCode::kConfig, "grid axis '" + spec + "' is not key=v1,v2,...");
    }
    axes.push_back({spec.substr(0, eq), split_commas(std::string_view(spec).substr(eq + 1))});
  }
  ensure_dir(out);
  const json base = to_json(cfg);

  struct Row {
    std::size_t point;
    std::vector<std::string> values;
    std::optional<TrainOutcome> result;
    std::string error;
  };
  std::vector<Row> rows;
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();
  for (std::size_t point = 0; point < total; ++point) {
    Row row{point, {}, std::nullopt, {}};
    // Mixed-radix decode, last axis fastest.
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t a = axes.size(), rest = point; a-- > 0;) {
      idx[a] = rest % axes[a].values.size();
      rest /= axes[a].values.size();
    }
    try {
      json doc = base;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        row.values.push_back(axes[a].values[idx[a]]);
        apply_override(doc, axes[a].key + "=" + axes[a].values[idx[a]]);
      }
      row.result = run_train(run_config_from_json(doc), out / ("point_" + std::to_string(point)),
                             progress);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    if (x.result.has_value() != y.result.has_value()) return x.result.has_value();
    if (!x.result) return false;
    return x.result->history.best_valid > y.result->history.best_valid;
  });

  std::ostringstream os;
  os << std::setprecision(10) << "point";
  for (const auto& a : axes) os << '\t' << a.key;
  os << "\tstatus\tbest_epoch\tvalid_recall@20";
  for (auto n : cfg.eval.cutoffs) os << "\ttest_recall@" << n;
  for (auto n : cfg.eval.cutoffs) os << "\ttest_ndcg@" << n;
  os << "\terror\n";
  for (const auto& r : rows) {
    os << r.point;
    for (const auto& v : r.values) os << '\t' << v;
    for (std::size_t k = r.values.size(); k < axes.size(); ++k) os << "\tNA";
    if (r.result) {
      os << "\tok\t" << r.result->history.best_epoch << '\t' << r.result->history.best_valid;
      for (double v : r.result->test.recall) os << '\t' << v;
      for (double v : r.result->test.ndcg) os << '\t' << v;
      os << "\t-\n";
    } else {
      os << "\tfailed\tNA\tNA";
      for (std::size_t k = 0; k < 2 * cfg.eval.cutoffs.size(); ++k) os << "\tNA";
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), '\t', ' ');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      os << '\t' << msg << '\n';
    }
  }
  write_text(out / "results.tsv", os.str());
  return os.str();
}

ConflictReport run_diagnose(RunConfig cfg, std::size_t users, std::size_t epochs,
                            const fs::path& out) {
  if (epochs == 0) fail(ErrorCode::kConfig, "diagnose needs at least one epoch");
  cfg.train.ablation = Ablation::kSuid;
  ensure_dir(out);
  Dataset data = load_run_dataset(cfg, out / "data");
  const json manifest{{"artifact", "lgmrec"},
                      {"version", kArtifactVersion},
                      {"command", "diagnose"},
                      {"seed", cfg.train.seed},
                      {"users", users},
                      {"epochs", epochs},
                      {"config", to_json(cfg)},
                      {"data_digests", data_digests(cfg)},
                      {"outputs", {{"conflict", "conflict.tsv"}, {"user_map", "user_map.tsv"}}}};
  write_text(out / "run_manifest.json", manifest.dump(2) + "\n");
  write_remap(out / "user_map.tsv", data.user_original);

  const Model model(cfg.train, data);
  const auto sampled = sample_users(data.num_users, std::min(users, data.num_users), cfg.train.seed);
  ConflictReport report =
      gradient_conflict_diagnostic(model, model.init_params(cfg.train.seed), sampled, epochs);
  write_text(out / "conflict.tsv", report.to_tsv());
  return report;
}

}  // namespace lgmrec
