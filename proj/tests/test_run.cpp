#include "doctest.h"

#include <fstream>

#include "lgmrec/lgmrec.h"
#include "lgmrec/run.hpp"
#include "support.hpp"

using namespace lgmrec;
using nlohmann::json;
using testing::error_code;

TEST_CASE("presets carry the published settings") {
  const auto baby = preset_config("baby");
  CHECK(baby.cge_layers == 2);
  CHECK(baby.hyperedges == 4);
  CHECK(baby.alpha == 0.3);
  CHECK(baby.dropout == 0.5);
  CHECK(baby.lambda1 == 1e-6);
  CHECK(baby.lambda2 == 1e-4);
  CHECK(baby.dim == 64);
  CHECK(baby.batch == 2048);
  CHECK(baby.lr == 0.001);
  const auto sports = preset_config("sports");
  CHECK(sports.cge_layers == 4);
  CHECK(sports.alpha == 0.6);
  CHECK(sports.dropout == 0.4);
  const auto clothing = preset_config("clothing");
  CHECK(clothing.cge_layers == 3);
  CHECK(clothing.hyper_layers == 2);
  CHECK(clothing.hyperedges == 64);
  CHECK(clothing.alpha == 0.2);
  CHECK(clothing.dropout == 0.2);
  for (const char* p : {"baby", "sports", "clothing"}) {
    const auto c = preset_config(p);
    CHECK(c.mge_layers == 2);
    CHECK(c.tau_contrast == 0.2);
    CHECK(c.tau_gumbel == 0.2);
    CHECK(c.patience == 20);
  }
  CHECK(error_code([] { preset_config("books"); }) == ErrorCode::kConfig);
}

TEST_CASE("config layering and overrides") {
  const auto dir = testing::temp_dir("config");
  std::ofstream(dir / "c.json") << R"({"preset": "sports", "model": {"alpha": 0.9}})";
  const std::vector<std::string> none;
  const auto file_only = resolve_config(dir / "c.json", none);
  CHECK(file_only.train.alpha == 0.9);
  CHECK(file_only.train.cge_layers == 4);

  const std::vector<std::string> ov{"model.alpha=0.1", "ablation=no_ghe", "eval.cutoffs=5,10",
                                    "train.seed=9", "lambda2=0.5"};
  const auto c = resolve_config(dir / "c.json", ov);
  CHECK(c.train.alpha == 0.1);
  CHECK(c.train.ablation == Ablation::kNoGhe);
  CHECK(c.eval.cutoffs == std::vector<std::size_t>{5, 10});
  CHECK(c.train.seed == 9);
  CHECK(c.train.lambda2 == 0.5);

  const std::vector<std::string> preset{"preset=clothing"};
  CHECK(resolve_config(std::nullopt, preset).train.hyperedges == 64);

  const auto bad = [&](std::string o) {
    const std::vector<std::string> v{std::move(o)};
    return error_code([&] { resolve_config(std::nullopt, v); });
  };
  CHECK(bad("model.alpah=1") == ErrorCode::kConfig);
  CHECK(bad("nonsense=1") == ErrorCode::kConfig);
  CHECK(bad("seed=1") == ErrorCode::kConfig);  // ambiguous
  CHECK(bad("model.dim=big") == ErrorCode::kConfig);
  CHECK(bad("model.dim=-3") == ErrorCode::kConfig);
  CHECK(bad("model.dropout=1.0") == ErrorCode::kConfig);
  CHECK(bad("ablation=no_everything") == ErrorCode::kConfig);
  CHECK(bad("noequals") == ErrorCode::kConfig);

  std::ofstream(dir / "typo.json") << R"({"model": {"alpah": 0.3}})";
  CHECK(error_code([&] { resolve_config(dir / "typo.json", none); }) == ErrorCode::kConfig);
  std::ofstream(dir / "broken.json") << "{";
  CHECK(error_code([&] { resolve_config(dir / "broken.json", none); }) == ErrorCode::kParse);
}

TEST_CASE("resolved config round trips through JSON") {
  const std::vector<std::string> ov{"hyperedges=7", "synthetic.noise=0.2"};
  const auto c = resolve_config(std::nullopt, ov);
  const json j = to_json(c);
  const auto back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(j["model"]["hyperedges"] == 7);
}

TEST_CASE("sha256 of a known string") {
  const auto dir = testing::temp_dir("sha");
  std::ofstream(dir / "abc", std::ios::binary) << "abc";
  CHECK(sha256_file(dir / "abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("checkpoint round trip and ablation contents") {
  const auto dir = testing::temp_dir("ckpt");
  RunConfig cfg = default_run_config("synthetic");
  cfg.synth.num_users = 60;
  cfg.synth.num_items = 40;
  cfg.train.dim = 8;
  cfg.train.ablation = Ablation::kNoGhe;
  const Dataset d = load_run_dataset(cfg, dir / "data");
  CHECK_FALSE(cfg.data.interactions.empty());
  const Model m(cfg.train, d);
  const auto p = m.init_params(1);
  save_checkpoint(dir / "ck", p, cfg, d);
  const auto ck = load_checkpoint(dir / "ck");
  CHECK(ck.num_users == d.num_users);
  CHECK(ck.params.size() == p.size());
  CHECK_FALSE(ck.params.find("hyperedges.v").has_value());
  for (std::size_t k = 0; k < p.size(); ++k)
    for (std::size_t e = 0; e < p[k].size(); ++e)
      CHECK(ck.params[k].values()[e] == static_cast<double>(static_cast<float>(p[k].values()[e])));
  CHECK(ck.config.train.ablation == Ablation::kNoGhe);
}

TEST_CASE("C API reports errors through status codes") {
  lgmrec_config* cfg = nullptr;
  const char* bad[] = {"model.nope=1"};
  CHECK(lgmrec_config_load(nullptr, bad, 1, &cfg) == LGMREC_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(lgmrec_last_error()).find("nope") != std::string::npos);
  CHECK(lgmrec_config_load("/nonexistent/x.json", nullptr, 0, &cfg) == LGMREC_ERR_IO);

  const char* good[] = {"model.dim=8", "synthetic.users=60", "synthetic.items=40"};
  REQUIRE(lgmrec_config_load(nullptr, good, 3, &cfg) == LGMREC_OK);
  CHECK(lgmrec_config_set(cfg, "model.alpha=0.4") == LGMREC_OK);
  CHECK(lgmrec_config_set(cfg, "model.alpha=oops") == LGMREC_ERR_CONFIG);
  char* text = nullptr;
  REQUIRE(lgmrec_config_to_json(cfg, &text) == LGMREC_OK);
  const json j = json::parse(text);
  lgmrec_string_free(text);
  CHECK(j["model"]["alpha"] == 0.4);
  CHECK(j["model"]["dim"] == 8);

  const auto dir = testing::temp_dir("capi");
  lgmrec_dataset* data = nullptr;
  REQUIRE(lgmrec_dataset_load(cfg, (dir / "data").c_str(), &data) == LGMREC_OK);
  CHECK(lgmrec_dataset_num_users(data) > 0);
  lgmrec_model* model = nullptr;
  CHECK(lgmrec_model_load((dir / "missing").c_str(), data, &model) == LGMREC_ERR_IO);
  CHECK(lgmrec_train(nullptr, "x", nullptr, nullptr) == LGMREC_ERR_USAGE);
  CHECK(std::string(lgmrec_status_name(LGMREC_ERR_TRUNCATION)) == "truncation");
  lgmrec_dataset_free(data);
  lgmrec_config_free(cfg);
}
