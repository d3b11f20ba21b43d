// Experiment runner: training, evaluation, SEP comparison runs, ablations,
// dump scoring, and the zero-shot LLM baseline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cgep/llm.hpp"
#include "cgep/metrics.hpp"
#include "cgep/trainer.hpp"
#include "cgep/util.hpp"

using namespace cgep;
using nlohmann::json;

namespace {

void print_train_result(const Trainer& trainer, const TrainResult& res) {
  std::printf("trained %d epochs on %zu instances (dev %zu, test %zu)\n",
              trainer.config().epochs, trainer.plan().train.size(),
              trainer.plan().dev.size(), trainer.plan().test.size());
  if (!res.log.empty()) {
    const EpochLog& last = res.log.back();
    std::printf("final epoch: loss %.4f (l_p %.4f, l_c %.4f), dev MRR %.2f\n", last.loss,
                last.l_p, last.l_c, last.dev_mrr);
  }
  std::printf("best dev MRR %.2f at epoch %d -> %s\n", res.best_dev_mrr, res.best_epoch,
              res.best_checkpoint.string().c_str());
}

void write_eval_outputs(const std::filesystem::path& out_dir, const std::string& stem,
                        const EvalOutput& eval) {
  std::filesystem::create_directories(out_dir);
  write_predictions(out_dir / (stem + "_predictions.jsonl"), eval.dump);
  write_file(out_dir / (stem + "_metrics.json"), eval.table.to_json());
  std::printf("wrote %s and %s\n", (out_dir / (stem + "_predictions.jsonl")).c_str(),
              (out_dir / (stem + "_metrics.json")).c_str());
}

int cmd_train(const std::string& config_file, const std::string& run_dir_override) {
  ExperimentConfig cfg = config_from_json_file(config_file);
  if (!run_dir_override.empty()) cfg.run_dir = run_dir_override;
  Trainer trainer(cfg);
  TrainResult res = trainer.train();
  print_train_result(trainer, res);
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& split,
             const std::string& config_file, const std::string& data_override,
             const std::string& out_dir) {
  ExperimentConfig cfg;
  if (!config_file.empty()) {
    cfg = config_from_json_file(config_file);
  } else {
    json meta = json::parse(checkpoint_meta(ckpt));
    cfg = config_from_json(meta.at("config").dump());
  }
  if (!data_override.empty()) cfg.dataset_dir = data_override;
  Trainer trainer(cfg);
  trainer.load_weights(ckpt);
  EvalOutput eval = trainer.evaluate(split);
  std::fputs(eval.table.to_text().c_str(), stdout);
  std::filesystem::path out =
      out_dir.empty() ? (cfg.run_dir.empty() ? std::filesystem::path(".")
                                             : std::filesystem::path(cfg.run_dir))
                      : std::filesystem::path(out_dir);
  write_eval_outputs(out, "eval_" + split, eval);
  return 0;
}

int cmd_sep(const std::string& config_file, const std::string& compare_file) {
  ExperimentConfig cfg = config_from_json_file(config_file);
  Trainer trainer(cfg);
  if (trainer.data().format_tag != "sep")
    throw Error("sep expects a chain dataset directory (run the data tool's sep step)");
  TrainResult res = trainer.train();
  print_train_result(trainer, res);
  trainer.load_weights(res.best_checkpoint);
  EvalOutput eval = trainer.evaluate("test");
  std::fputs(eval.table.to_text().c_str(), stdout);
  write_eval_outputs(cfg.run_dir, "sep_test", eval);

  if (!compare_file.empty()) {
    json other = json::parse(read_file(compare_file));
    // compare against the other run's aggregate row ("mean" if present, else first)
    const json* base = nullptr;
    for (const auto& row : other)
      if (row.at("label") == "mean") base = &row;
    if (!base && !other.empty()) base = &other.front();
    if (!base) throw Error("comparison metrics file is empty");
    const MetricsRow& mine =
        eval.table.rows.back().label == "mean" ? eval.table.rows.back()
                                               : eval.table.rows.front();
    std::printf("\nchain-input run vs graph-input run (%s):\n",
                compare_file.c_str());
    auto delta = [](double a, double b) { return a - b; };
    std::printf("  MRR    %6.2f (%+.2f)\n", mine.mrr,
                delta(mine.mrr, base->at("mrr").get<double>()));
    for (size_t i = 0; i < kHitNs.size(); ++i) {
      std::string key = "hit@" + std::to_string(kHitNs[i]);
      std::printf("  Hit@%-3d%6.2f (%+.2f)\n", kHitNs[i], mine.hit[i],
                  delta(mine.hit[i], base->at(key).get<double>()));
    }
  }
  return 0;
}

int cmd_ablate(const std::string& config_file, const std::string& flag) {
  ExperimentConfig cfg = config_from_json_file(config_file);
  if (flag == "no_dist")
    cfg.no_dist = true;
  else if (flag == "no_ctxt")
    cfg.no_ctxt = true;
  else if (flag == "no_schm")
    cfg.no_schm = true;
  else if (flag == "no_ctrst")
    cfg.no_ctrst = true;
  else
    throw Error("unknown ablation flag '" + flag +
                "' (no_dist, no_ctxt, no_schm, no_ctrst)");
  if (cfg.run_dir.empty()) throw Error("config: run_dir is required");
  cfg.run_dir += "." + flag;
  std::printf("ablation %s -> %s\n", flag.c_str(), cfg.run_dir.c_str());
  Trainer trainer(cfg);
  TrainResult res = trainer.train();
  print_train_result(trainer, res);
  trainer.load_weights(res.best_checkpoint);
  EvalOutput eval = trainer.evaluate("test");
  std::fputs(eval.table.to_text().c_str(), stdout);
  write_eval_outputs(cfg.run_dir, "ablate_test", eval);
  return 0;
}

int cmd_score(const std::string& pred_file, const std::string& data_dir, int folds) {
  auto dump = read_predictions(pred_file);
  LoadedDataset data = load_dataset(data_dir);

  std::map<std::string, std::string> fold_map;
  if (folds > 0) {
    std::vector<CorpusDocument> docs;
    for (const auto& [id, topic] : data.doc_topic) {
      CorpusDocument d;
      d.doc_id = id;
      d.topic_id = topic;
      d.split_tag = data.doc_split.at(id);
      docs.push_back(std::move(d));
    }
    SplitAssignment assign = make_splits(docs, "esc", data.build_seed);
    if (folds != static_cast<int>(assign.esc.folds.size()))
      throw Error("--folds " + std::to_string(folds) + " but the split has " +
                  std::to_string(assign.esc.folds.size()) + " folds");
    std::map<std::string, std::string> topic_fold;
    for (size_t f = 0; f < assign.esc.folds.size(); ++f)
      for (const auto& t : assign.esc.folds[f])
        topic_fold[t] = "fold" + std::to_string(f + 1);
    std::set<std::string> dumped;
    for (const auto& p : dump) dumped.insert(p.instance_id);
    for (const auto& inst : data.instances) {
      if (!dumped.count(inst.instance_id)) continue;
      const std::string& topic = data.doc_topic.at(doc_of_graph(inst.graph.doc_id));
      auto it = topic_fold.find(topic);
      if (it == topic_fold.end())
        throw Error("instance " + inst.instance_id + " is in a dev topic, not a fold");
      fold_map[inst.instance_id] = it->second;
    }
  }

  MetricsTable table = evaluate_run(dump, data.instances, fold_map);
  std::fputs(table.to_text().c_str(), stdout);
  std::filesystem::path report = std::filesystem::path(pred_file).replace_extension(
      ".metrics.json");
  write_file(report, table.to_json());
  std::printf("wrote %s\n", report.c_str());
  return 0;
}

int cmd_llm_eval(const std::string& data_dir, const std::string& replay_dir, bool live,
                 const std::string& record_dir, const std::string& out_dir) {
  LoadedDataset data = load_dataset(data_dir);
  CharTokenizer tok;

  std::unique_ptr<LlmTransport> transport;
  if (live) {
    std::optional<std::filesystem::path> rec;
    if (!record_dir.empty()) rec = record_dir;
    transport = std::make_unique<HttpTransport>(rec);
  } else {
    if (replay_dir.empty()) throw Error("llm-eval needs --replay <dir> (or --live)");
    transport = std::make_unique<ReplayTransport>(replay_dir);
  }

  LlmEvalResult result = llm_evaluate(data.instances, tok, *transport, data.k);
  std::vector<PredictionRecord>& dump = result.dump;
  MetricsTable table = evaluate_run(dump, data.instances);
  std::fputs(table.to_text().c_str(), stdout);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_predictions(std::filesystem::path(out_dir) / "llm_predictions.jsonl", dump);
    write_file(std::filesystem::path(out_dir) / "llm_metrics.json", table.to_json());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causality-graph event prediction experiment runner"};
  app.require_subcommand(1);

  std::string config_file, run_dir, ckpt, split = "test", data_dir, out_dir;
  std::string compare_file, flag, pred_file, replay_dir, record_dir;
  int folds = 0;
  bool live = false;

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_file, "experiment config JSON")->required();
  train->add_option("--run-dir", run_dir, "override the config's run directory");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval->add_option("--split", split, "train, dev, test, or all");
  eval->add_option("--config", config_file, "config override (default: from checkpoint)");
  eval->add_option("--data", data_dir, "dataset directory override");
  eval->add_option("--out", out_dir, "output directory");

  auto* sep = app.add_subcommand("sep", "train and evaluate on the chain-input variant");
  sep->add_option("--config", config_file, "experiment config JSON")->required();
  sep->add_option("--compare", compare_file, "graph-input metrics JSON to diff against");

  auto* ablate = app.add_subcommand("ablate", "train and evaluate with one ablation flag");
  ablate->add_option("--config", config_file, "experiment config JSON")->required();
  ablate->add_option("--flag", flag, "no_dist, no_ctxt, no_schm, or no_ctrst")->required();

  auto* score = app.add_subcommand("score", "score a prediction dump against a dataset");
  score->add_option("--pred", pred_file, "prediction dump JSONL")->required();
  score->add_option("--data", data_dir, "dataset directory")->required();
  score->add_option("--folds", folds, "group per cross-validation fold (esc: 5)");

  auto* llm = app.add_subcommand("llm-eval", "run the zero-shot LLM baseline");
  llm->add_option("--data", data_dir, "dataset directory")->required();
  llm->add_option("--replay", replay_dir, "replay fixture directory");
  llm->add_flag("--live", live, "call the configured HTTP endpoint");
  llm->add_option("--record", record_dir, "record live exchanges for replay");
  llm->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_file, run_dir);
    if (eval->parsed()) return cmd_eval(ckpt, split, config_file, data_dir, out_dir);
    if (sep->parsed()) return cmd_sep(config_file, compare_file);
    if (ablate->parsed()) return cmd_ablate(config_file, flag);
    if (score->parsed()) return cmd_score(pred_file, data_dir, folds);
    if (llm->parsed()) return cmd_llm_eval(data_dir, replay_dir, live, record_dir, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
