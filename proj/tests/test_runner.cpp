#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cgep/checkpoint.hpp"
#include "cgep/corpus.hpp"
#include "cgep/trainer.hpp"
#include "cgep/util.hpp"

using namespace cgep;

namespace {

namespace fs = std::filesystem;

const fs::path kTrainCorpus = fs::path(CGEP_FIXTURE_DIR) / "train_corpus";

// One shared built dataset for every trainer test in this binary.
const fs::path& dataset_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "cgep_runner_ds";
    fs::remove_all(d);
    auto docs = ingest(kTrainCorpus, "esc");
    BuiltDataset built = build_dataset(docs, 4, 7);
    write_dataset(d, built, docs, "esc", 4, 7);
    return d;
  }();
  return dir;
}

ExperimentConfig toy_config(const std::string& run_name) {
  ExperimentConfig cfg;
  cfg.dataset_dir = dataset_dir().string();
  cfg.run_dir = (fs::temp_directory_path() / run_name).string();
  cfg.split = "none";
  cfg.learning_rate = 1e-3;
  cfg.epochs = 3;
  cfg.seed = 11;
  cfg.max_tokens = 200;
  fs::remove_all(cfg.run_dir);
  return cfg;
}

std::string write_config_file(const std::string& body) {
  fs::path file = fs::temp_directory_path() / "cgep_runner_cfg.json";
  write_file(file, body);
  return file.string();
}

}  // namespace

TEST_CASE("config defaults match the published training recipe") {
  ExperimentConfig cfg = config_from_json_file(write_config_file(
      R"({"dataset_dir": "x", "split": "esc"})"));
  CHECK(cfg.learning_rate == 5e-6);
  CHECK(cfg.beta == 0.5);
  CHECK(cfg.tau == 1.0);
  CHECK(cfg.max_tokens == 200);
  CHECK(cfg.batch_size == 1);
  CHECK(cfg.epochs == 15);  // esc default; maven resolves to 10 below
  CHECK(cfg.seed == 1);
  CHECK_FALSE(cfg.no_dist);
  CHECK_FALSE(cfg.no_ctxt);
  CHECK_FALSE(cfg.no_schm);
  CHECK_FALSE(cfg.no_ctrst);

  ExperimentConfig maven = config_from_json_file(write_config_file(
      R"({"dataset_dir": "x", "split": "maven"})"));
  CHECK(maven.epochs == 10);
}

TEST_CASE("config validation rejects bad values") {
  CHECK_THROWS_AS(config_from_json_file(write_config_file(R"({"split": "esc"})")), Error);
  CHECK_THROWS_AS(config_from_json_file(write_config_file(
                      R"({"dataset_dir": "x", "split": "banana"})")),
                  Error);
  CHECK_THROWS_AS(config_from_json_file(write_config_file(
                      R"({"dataset_dir": "x", "split": "esc", "learning_rate": 0})")),
                  Error);
  CHECK_THROWS_AS(config_from_json_file(write_config_file(
                      R"({"dataset_dir": "x", "split": "esc", "beta": -1})")),
                  Error);
  CHECK_THROWS_AS(config_from_json_file(write_config_file(
                      R"({"dataset_dir": "x", "split": "esc", "fold": 5})")),
                  Error);
  // split none has no default epoch count
  CHECK_THROWS_AS(config_from_json_file(write_config_file(
                      R"({"dataset_dir": "x", "split": "none"})")),
                  Error);
}

TEST_CASE("the fixture dataset loads with its manifest metadata") {
  LoadedDataset data = load_dataset(dataset_dir());
  CHECK(data.instances.size() == 16);
  CHECK(data.k == 4);
  CHECK(data.format_tag == "esc");
  CHECK(data.dataset_hash.size() == 16);
  CHECK(data.doc_topic.size() == 4);
}

TEST_CASE("candidate size and split tag must agree") {
  ExperimentConfig cfg = toy_config("cgep_run_mismatch");
  cfg.split = "esc";  // the fixture build used k=4, esc expects 256
  CHECK_THROWS_WITH_AS(Trainer{cfg}, doctest::Contains("dataset/config mismatch"), Error);
}

TEST_CASE("a chain instance is modeled as a path graph without the gold node") {
  CGEPInstance inst;
  inst.instance_id = "d#0/e4/e3";
  inst.graph.doc_id = "d#0";
  for (int i = 0; i < 4; ++i) {
    Event e;
    e.event_id = "e" + std::to_string(i);
    e.mention = "m" + std::to_string(i);
    e.sentence = "m" + std::to_string(i) + " here";
    e.mention_span = {0, 2};
    inst.graph.nodes.push_back(e);
  }
  // original graph also had e0->e2 etc; the instance keeps whatever remains
  inst.graph.edges = {{"e0", "e1"}, {"e1", "e2"}, {"e2", "e3"}, {"e0", "e2"}};
  inst.anchor_id = "e3";
  inst.chain = {"e0", "e1", "e2", "e3", "e4"};  // e4 is the (removed) gold

  CGEPInstance chain = chain_view(inst);
  CHECK(chain.graph.nodes.size() == 4);
  REQUIRE(chain.graph.edges.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(chain.graph.edges[i].cause_id == "e" + std::to_string(i));
    CHECK(chain.graph.edges[i].effect_id == "e" + std::to_string(i + 1));
  }
  // non-chain instances pass through untouched
  inst.chain.clear();
  CHECK(chain_view(inst).graph.edges.size() == 4);
}

TEST_CASE("checkpoints round-trip weights exactly") {
  ExperimentConfig cfg = toy_config("cgep_run_ckpt");
  Trainer trainer(cfg);
  auto params = trainer.model().all_params();
  fs::path file = fs::temp_directory_path() / "cgep_ckpt_test.ckpt";
  save_checkpoint(file, params, trainer.meta_json());

  std::vector<Mat<float>> before;
  for (auto& [n, t] : params) before.push_back(t.value());
  for (auto& [n, t] : params) t.value().setConstant(42.0f);
  std::string meta = load_checkpoint(file, trainer.model().all_params());
  CHECK(meta == trainer.meta_json());
  auto after = trainer.model().all_params();
  for (size_t i = 0; i < after.size(); ++i) CHECK(after[i].second.value() == before[i]);
  fs::remove(file);
}

TEST_CASE("checkpoint loading rejects wrong files and incompatible models") {
  ExperimentConfig cfg = toy_config("cgep_run_ckpt2");
  Trainer trainer(cfg);
  fs::path file = fs::temp_directory_path() / "cgep_ckpt_bad.ckpt";
  write_file(file, "not a checkpoint");
  CHECK_THROWS_WITH_AS(load_checkpoint(file, trainer.model().all_params()),
                       doctest::Contains("not a checkpoint"), Error);

  save_checkpoint(file, trainer.model().all_params(), trainer.meta_json());
  ExperimentConfig other = cfg;
  other.no_ctxt = true;
  other.no_schm = true;  // different fusion mode -> incompatible identity
  Trainer small(other);
  CHECK_THROWS_WITH_AS(small.load_weights(file), doctest::Contains("incompatible"), Error);
  fs::remove(file);
}

TEST_CASE("identical seeds reproduce identical loss curves") {
  ExperimentConfig cfg = toy_config("cgep_run_rep1");
  TrainResult a = Trainer(cfg).train();
  ExperimentConfig cfg2 = toy_config("cgep_run_rep2");
  TrainResult b = Trainer(cfg2).train();
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.log[i].l_p == b.log[i].l_p);
    CHECK(a.log[i].l_c == b.log[i].l_c);
    CHECK(a.log[i].dev_mrr == b.log[i].dev_mrr);
  }

  ExperimentConfig cfg3 = toy_config("cgep_run_rep3");
  cfg3.seed = 12;
  TrainResult c = Trainer(cfg3).train();
  CHECK(a.log[0].loss != c.log[0].loss);
}

TEST_CASE("beta zero trains bit-identically to the contrast-off ablation") {
  ExperimentConfig zero = toy_config("cgep_run_beta0");
  zero.beta = 0.0;
  Trainer t_zero(zero);
  TrainResult r_zero = t_zero.train();

  ExperimentConfig off = toy_config("cgep_run_noctrst");
  off.no_ctrst = true;
  Trainer t_off(off);
  TrainResult r_off = t_off.train();

  // the contrastive loss is identically zero in the logs of both runs
  for (size_t i = 0; i < r_zero.log.size(); ++i) {
    CHECK(r_zero.log[i].l_c == 0.0);
    CHECK(r_off.log[i].l_c == 0.0);
    CHECK(r_zero.log[i].loss == r_off.log[i].loss);
  }
  auto pz = t_zero.model().all_params();
  auto po = t_off.model().all_params();
  REQUIRE(pz.size() == po.size());
  for (size_t i = 0; i < pz.size(); ++i) {
    CHECK(pz[i].first == po[i].first);
    CHECK(pz[i].second.value() == po[i].second.value());
  }
  // and both differ from a run that did use the contrastive term
  ExperimentConfig with = toy_config("cgep_run_withc");
  Trainer t_with(with);
  t_with.train();
  bool any_diff = false;
  auto pw = t_with.model().all_params();
  for (size_t i = 0; i < pz.size() && !any_diff; ++i)
    any_diff = pz[i].second.value() != pw[i].second.value();
  CHECK(any_diff);
}

TEST_CASE("training writes a self-contained run directory") {
  ExperimentConfig cfg = toy_config("cgep_run_dir");
  Trainer trainer(cfg);
  TrainResult res = trainer.train();
  fs::path run(cfg.run_dir);
  for (const char* f : {"config.json", "run.json", "train_log.jsonl", "best.ckpt",
                        "final.ckpt"})
    CHECK(fs::exists(run / f));
  CHECK(res.log.size() == 3);
  CHECK(res.best_epoch >= 1);
  // the snapshot reloads to an equivalent config
  ExperimentConfig back = config_from_json_file(run / "config.json");
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.seed == cfg.seed);
  CHECK(back.dataset_dir == cfg.dataset_dir);
  std::string run_info = read_file(run / "run.json");
  CHECK(run_info.find("dataset_hash") != std::string::npos);
}

TEST_CASE("evaluation emits a capped dump and a metrics row") {
  ExperimentConfig cfg = toy_config("cgep_run_eval");
  Trainer trainer(cfg);
  trainer.train();
  EvalOutput eval = trainer.evaluate("test");
  CHECK(eval.dump.size() == 16);
  for (const auto& rec : eval.dump) {
    REQUIRE(rec.gold_rank.has_value());
    CHECK(*rec.gold_rank >= 1);
    CHECK(*rec.gold_rank <= 4);
    CHECK(rec.top.size() <= 50);
    CHECK(rec.top.size() == 4);
    // scores arrive sorted best-first
    for (size_t i = 1; i < rec.top.size(); ++i)
      CHECK(rec.top[i - 1].second >= rec.top[i].second);
  }
  REQUIRE(eval.table.rows.size() == 1);
  CHECK(eval.table.rows[0].instances == 16);
  CHECK(eval.table.rows[0].mrr > 0.0);

  // best checkpoint reloads and reproduces the same metrics
  EvalOutput again = trainer.evaluate("test");
  CHECK(again.table.rows[0].mrr == eval.table.rows[0].mrr);
  CHECK_THROWS_AS(trainer.evaluate("banana"), Error);
}
