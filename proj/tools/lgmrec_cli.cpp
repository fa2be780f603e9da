// Command-line front end; talks to the engine only through the C interface.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lgmrec/lgmrec.h"

namespace {

struct CommandFailed {
  lgmrec_status status;
};

void check(lgmrec_status s) {
  if (s != LGMREC_OK) throw CommandFailed{s};
}

struct ConfigArgs {
  std::string config;
  std::string manifest;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd, bool allow_manifest) {
    cmd->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    if (allow_manifest) {
      cmd->add_option("--manifest", manifest, "reuse the config of a previous run_manifest.json")
          ->check(CLI::ExistingFile)
          ->excludes("--config");
    }
    cmd->add_option("--set", overrides, "override, key=value (repeatable)");
  }

  lgmrec_config* load() const {
    lgmrec_config* cfg = nullptr;
    if (!manifest.empty()) {
      check(lgmrec_config_from_manifest(manifest.c_str(), &cfg));
      for (const auto& o : overrides) {
        const lgmrec_status s = lgmrec_config_set(cfg, o.c_str());
        if (s != LGMREC_OK) {
          lgmrec_config_free(cfg);
          throw CommandFailed{s};
        }
      }
      return cfg;
    }
    std::vector<const char*> ptrs;
    for (const auto& o : overrides) ptrs.push_back(o.c_str());
    check(lgmrec_config_load(config.empty() ? nullptr : config.c_str(), ptrs.data(), ptrs.size(),
                             &cfg));
    return cfg;
  }
};

struct ConfigHandle {
  lgmrec_config* p;
  ~ConfigHandle() { lgmrec_config_free(p); }
};

void print_progress(void* user, size_t epoch, double total, double bpr, double hcl,
                    double valid_recall, double seconds) {
  if (!*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "epoch %4zu  loss %.6f  bpr %.6f  hcl %.6f  valid R@20 %.6f  %.2fs\n",
               epoch, total, bpr, hcl, std::isnan(valid_recall) ? -1.0 : valid_recall, seconds);
}

void print_owned(char* s) {
  if (!s) return;
  std::cout << s;
  lgmrec_string_free(s);
}

lgmrec_split parse_split(const std::string& s) {
  if (s == "train") return LGMREC_SPLIT_TRAIN;
  if (s == "valid") return LGMREC_SPLIT_VALID;
  return LGMREC_SPLIT_TEST;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LGMRec multimodal recommender: train, evaluate, generate, sweep, diagnose"};
  app.require_subcommand(1);
  app.set_version_flag("--version", lgmrec_version());

  std::string out;
  bool verbose = true;

  auto* train = app.add_subcommand("train", "train a model and write a run directory");
  ConfigArgs train_args;
  train_args.attach(train, true);
  train->add_option("--out", out, "run directory")->required();
  train->add_flag("!--quiet", verbose, "suppress per-epoch progress");

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint");
  std::string checkpoint;
  std::string split = "test";
  std::vector<std::size_t> cutoffs{10, 20};
  std::vector<std::size_t> groups;
  std::vector<std::size_t> export_users;
  std::vector<std::string> eval_overrides;
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--split", split, "train|valid|test")->check(CLI::IsMember({"train", "valid", "test"}));
  eval->add_option("--cutoffs", cutoffs, "top-n cutoffs")->delimiter(',');
  eval->add_option("--groups", groups, "sparsity-group boundaries, e.g. 5,10,20,50")->delimiter(',');
  eval->add_option("--export-users", export_users, "dense user ids for hyperedge export")->delimiter(',');
  eval->add_option("--set", eval_overrides, "override the checkpoint's config, key=value");
  eval->add_option("--out", out, "directory for report files");

  auto* gen = app.add_subcommand("generate", "write a synthetic corpus");
  ConfigArgs gen_args;
  gen_args.attach(gen, false);
  gen->add_option("--out", out, "corpus directory")->required();

  auto* sweep = app.add_subcommand("sweep", "train every point of a hyperparameter grid");
  ConfigArgs sweep_args;
  sweep_args.attach(sweep, false);
  std::vector<std::string> grid;
  sweep->add_option("--grid", grid, "axis key=v1,v2,... (repeatable)")->required();
  sweep->add_option("--out", out, "sweep directory")->required();
  sweep->add_flag("!--quiet", verbose, "suppress per-epoch progress");

  auto* diag = app.add_subcommand("diagnose", "gradient-conflict diagnostic under shared user IDs");
  ConfigArgs diag_args;
  diag_args.attach(diag, false);
  std::size_t users = 10;
  std::size_t epochs = 5;
  diag->add_option("--users", users, "number of sampled users");
  diag->add_option("--epochs", epochs, "epochs to train");
  diag->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ConfigHandle cfg{train_args.load()};
      check(lgmrec_train(cfg.p, out.c_str(), print_progress, &verbose));
      std::ifstream metrics(out + "/test_metrics.tsv");
      std::cout << metrics.rdbuf();
    } else if (*eval) {
      std::vector<const char*> ptrs;
      for (const auto& o : eval_overrides) ptrs.push_back(o.c_str());
      lgmrec_eval_request req{parse_split(split), cutoffs.data(), cutoffs.size(),
                              groups.empty() ? nullptr : groups.data(), groups.size(),
                              export_users.empty() ? nullptr : export_users.data(),
                              export_users.size()};
      lgmrec_eval_result res{};
      check(lgmrec_evaluate(checkpoint.c_str(), ptrs.data(), ptrs.size(), &req,
                            out.empty() ? nullptr : out.c_str(), &res));
      std::cout << res.metrics;
      if (res.groups) std::cout << '\n' << res.groups;
      if (res.dependencies) std::cout << '\n' << res.dependencies;
      lgmrec_eval_result_free(&res);
    } else if (*gen) {
      ConfigHandle cfg{gen_args.load()};
      check(lgmrec_generate(cfg.p, out.c_str()));
      std::cout << "wrote corpus to " << out << '\n';
    } else if (*sweep) {
      ConfigHandle cfg{sweep_args.load()};
      std::vector<const char*> ptrs;
      for (const auto& g : grid) ptrs.push_back(g.c_str());
      char* table = nullptr;
      check(lgmrec_sweep(cfg.p, ptrs.data(), ptrs.size(), out.c_str(), print_progress, &verbose,
                         &table));
      print_owned(table);
    } else if (*diag) {
      ConfigHandle cfg{diag_args.load()};
      char* table = nullptr;
      check(lgmrec_diagnose(cfg.p, users, epochs, out.c_str(), &table));
      print_owned(table);
    }
  } catch (const CommandFailed& f) {
    std::cerr << "error (" << lgmrec_status_name(f.status) << "): " << lgmrec_last_error() << '\n';
    return static_cast<int>(f.status);
  }
  return 0;
}
