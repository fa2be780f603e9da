#include "lgmrec/lgmrec.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <new>

#include "lgmrec/error.hpp"
#include "lgmrec/run.hpp"

struct lgmrec_config {
  lgmrec::RunConfig cfg;
  nlohmann::json doc;  // partial document the overrides apply to
};

struct lgmrec_dataset {
  lgmrec::Dataset data;
};

struct lgmrec_model {
  const lgmrec::Dataset* data;
  std::unique_ptr<lgmrec::Model> model;
  lgmrec::ParamSet params;
  lgmrec::DenseMatrix e_star;
};

namespace {

thread_local std::string last_error;

template <class F>
lgmrec_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return LGMREC_OK;
  } catch (const lgmrec::Error& e) {
    last_error = e.what();
    return static_cast<lgmrec_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return LGMREC_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) lgmrec::fail(lgmrec::ErrorCode::kUsage, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> strings(const char* const* items, std::size_t n) {
  if (n > 0) require(items, "string list");
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) {
    require(items[k], "string list entry");
    out.emplace_back(items[k]);
  }
  return out;
}

lgmrec::Progress progress_adapter(lgmrec_progress_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const lgmrec::EpochStats& s) {
    fn(user, s.epoch, s.total, s.bpr, s.hcl,
       s.valid_recall ? *s.valid_recall : std::numeric_limits<double>::quiet_NaN(), s.seconds);
  };
}

lgmrec::SplitKind split_kind(lgmrec_split s) {
  switch (s) {
    case LGMREC_SPLIT_TRAIN: return lgmrec::SplitKind::kTrain;
    case LGMREC_SPLIT_VALID: return lgmrec::SplitKind::kValid;
    case LGMREC_SPLIT_TEST: return lgmrec::SplitKind::kTest;
  }
  lgmrec::fail(lgmrec::ErrorCode::kUsage, "unknown split");
}

static_assert(static_cast<int>(lgmrec::ErrorCode::kConfig) == LGMREC_ERR_CONFIG);
static_assert(static_cast<int>(lgmrec::ErrorCode::kTruncation) == LGMREC_ERR_TRUNCATION);
static_assert(static_cast<int>(lgmrec::ErrorCode::kFormat) == LGMREC_ERR_FORMAT);

}  // namespace

extern "C" {

const char* lgmrec_version(void) { return lgmrec::kArtifactVersion; }

const char* lgmrec_last_error(void) { return last_error.c_str(); }

const char* lgmrec_status_name(lgmrec_status status) {
  switch (status) {
    case LGMREC_OK: return "ok";
    case LGMREC_ERR_CONFIG: return "config";
    case LGMREC_ERR_IO: return "io";
    case LGMREC_ERR_PARSE: return "parse";
    case LGMREC_ERR_DIMENSION: return "dimension";
    case LGMREC_ERR_INDEX: return "index";
    case LGMREC_ERR_EMPTY_DATASET: return "empty-dataset";
    case LGMREC_ERR_NUMERIC: return "numeric";
    case LGMREC_ERR_UNAVAILABLE: return "unavailable";
    case LGMREC_ERR_USAGE: return "usage";
    case LGMREC_ERR_CONTRASTIVE_DEGENERATE: return "contrastive-degenerate";
    case LGMREC_ERR_TRUNCATION: return "truncation";
    case LGMREC_ERR_FORMAT: return "format";
    case LGMREC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void lgmrec_string_free(char* s) { std::free(s); }

lgmrec_status lgmrec_config_load(const char* json_path, const char* const* overrides,
                                 std::size_t num_overrides, lgmrec_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto c = std::make_unique<lgmrec_config>();
    if (json_path) {
      std::ifstream in(json_path);
      if (!in) lgmrec::fail(lgmrec::ErrorCode::kIo, std::string("cannot open ") + json_path);
      try {
        c->doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        lgmrec::fail(lgmrec::ErrorCode::kParse, std::string(json_path) + ": " + e.what());
      }
    } else {
      c->doc = nlohmann::json::object();
    }
    for (const auto& o : strings(overrides, num_overrides)) lgmrec::apply_override(c->doc, o);
    c->cfg = lgmrec::run_config_from_json(c->doc);
    *out = c.release();
  });
}

lgmrec_status lgmrec_config_from_manifest(const char* manifest_path, lgmrec_config** out) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(out, "out");
    *out = nullptr;
    auto c = std::make_unique<lgmrec_config>();
    c->cfg = lgmrec::config_from_manifest(manifest_path);
    c->doc = lgmrec::to_json(c->cfg);
    *out = c.release();
  });
}

lgmrec_status lgmrec_config_set(lgmrec_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg, "cfg");
    require(assignment, "assignment");
    nlohmann::json doc = cfg->doc;
    lgmrec::apply_override(doc, assignment);
    cfg->cfg = lgmrec::run_config_from_json(doc);
    cfg->doc = std::move(doc);
  });
}

lgmrec_status lgmrec_config_to_json(const lgmrec_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup_string(lgmrec::to_json(cfg->cfg).dump(2));
  });
}

void lgmrec_config_free(lgmrec_config* cfg) { delete cfg; }

lgmrec_status lgmrec_train(const lgmrec_config* cfg, const char* out_dir,
                           lgmrec_progress_fn progress, void* user) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    lgmrec::run_train(cfg->cfg, out_dir, progress_adapter(progress, user));
  });
}

lgmrec_status lgmrec_generate(const lgmrec_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    lgmrec::run_generate(cfg->cfg, out_dir);
  });
}

lgmrec_status lgmrec_sweep(const lgmrec_config* cfg, const char* const* grid, std::size_t num_axes,
                           const char* out_dir, lgmrec_progress_fn progress, void* user,
                           char** table) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    const auto axes = strings(grid, num_axes);
    const std::string t = lgmrec::run_sweep(cfg->cfg, axes, out_dir, progress_adapter(progress, user));
    if (table) *table = dup_string(t);
  });
}

lgmrec_status lgmrec_diagnose(const lgmrec_config* cfg, std::size_t users, std::size_t epochs,
                              const char* out_dir, char** table) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    const auto report = lgmrec::run_diagnose(cfg->cfg, users, epochs, out_dir);
    if (table) *table = dup_string(report.to_tsv());
  });
}

lgmrec_status lgmrec_evaluate(const char* checkpoint_dir, const char* const* overrides,
                              std::size_t num_overrides, const lgmrec_eval_request* req,
                              const char* out_dir, lgmrec_eval_result* out) {
  return guarded([&] {
    require(checkpoint_dir, "checkpoint_dir");
    require(req, "req");
    require(out, "out");
    *out = {nullptr, nullptr, nullptr};
    lgmrec::EvalRequest r;
    r.split = split_kind(req->split);
    if (req->num_cutoffs > 0) {
      require(req->cutoffs, "cutoffs");
      r.cutoffs.assign(req->cutoffs, req->cutoffs + req->num_cutoffs);
    }
    if (req->groups) r.groups.emplace(req->groups, req->groups + req->num_groups);
    if (req->export_users)
      r.export_users.assign(req->export_users, req->export_users + req->num_export_users);
    std::optional<std::filesystem::path> dir;
    if (out_dir) dir = out_dir;
    const auto rep =
        lgmrec::run_evaluate(checkpoint_dir, strings(overrides, num_overrides), r, dir);
    out->metrics = dup_string(rep.metrics_text);
    if (rep.groups_text) out->groups = dup_string(*rep.groups_text);
    if (rep.dependencies_text) out->dependencies = dup_string(*rep.dependencies_text);
  });
}

void lgmrec_eval_result_free(lgmrec_eval_result* r) {
  if (!r) return;
  std::free(r->metrics);
  std::free(r->groups);
  std::free(r->dependencies);
  *r = {nullptr, nullptr, nullptr};
}

lgmrec_status lgmrec_dataset_load(lgmrec_config* cfg, const char* corpus_dir,
                                  lgmrec_dataset** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = nullptr;
    auto d = std::make_unique<lgmrec_dataset>();
    d->data = lgmrec::load_run_dataset(cfg->cfg, corpus_dir ? corpus_dir : "data");
    cfg->doc = lgmrec::to_json(cfg->cfg);
    *out = d.release();
  });
}

std::size_t lgmrec_dataset_num_users(const lgmrec_dataset* d) { return d ? d->data.num_users : 0; }
std::size_t lgmrec_dataset_num_items(const lgmrec_dataset* d) { return d ? d->data.num_items : 0; }
void lgmrec_dataset_free(lgmrec_dataset* d) { delete d; }

lgmrec_status lgmrec_model_load(const char* checkpoint_dir, const lgmrec_dataset* d,
                                lgmrec_model** out) {
  return guarded([&] {
    require(checkpoint_dir, "checkpoint_dir");
    require(d, "dataset");
    require(out, "out");
    *out = nullptr;
    auto ck = lgmrec::load_checkpoint(checkpoint_dir);
    if (ck.num_users != d->data.num_users || ck.num_items != d->data.num_items) {
      lgmrec::fail(lgmrec::ErrorCode::kDimension, "checkpoint does not match the dataset size");
    }
    auto m = std::make_unique<lgmrec_model>();
    m->data = &d->data;
    m->model = std::make_unique<lgmrec::Model>(ck.config.train, d->data);
    m->model->check_params(ck.params);
    m->params = std::move(ck.params);
    m->e_star = m->model->embeddings(m->params);
    *out = m.release();
  });
}

lgmrec_status lgmrec_model_evaluate(const lgmrec_model* m, lgmrec_split split,
                                    const std::size_t* cutoffs, std::size_t num_cutoffs,
                                    double* recall, double* ndcg) {
  return guarded([&] {
    require(m, "model");
    require(cutoffs, "cutoffs");
    require(recall, "recall");
    require(ndcg, "ndcg");
    const auto r = lgmrec::evaluate(m->e_star, *m->data, split_kind(split),
                                    std::span<const std::size_t>(cutoffs, num_cutoffs));
    for (std::size_t k = 0; k < num_cutoffs; ++k) {
      recall[k] = r.recall[k];
      ndcg[k] = r.ndcg[k];
    }
  });
}

lgmrec_status lgmrec_model_recommend(const lgmrec_model* m, std::size_t user, std::size_t n,
                                     std::size_t* items) {
  return guarded([&] {
    require(m, "model");
    require(items, "items");
    std::vector<std::size_t> mask;
    for (const auto& r : m->data->train)
      if (r.user == user) mask.push_back(r.item);
    std::sort(mask.begin(), mask.end());
    const auto top = lgmrec::rank_items(m->e_star, m->data->num_users, user, mask, n);
    std::copy(top.begin(), top.end(), items);
  });
}

void lgmrec_model_free(lgmrec_model* m) { delete m; }

}  // extern "C"
