#include "cgep/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cgep/util.hpp"

namespace cgep {

using nlohmann::json;

namespace {

constexpr int kEscCandidates = 256;
constexpr int kMavenCandidates = 512;

template <typename T>
void read_field(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json_file(const std::filesystem::path& file) {
  return config_from_json(read_file(file));
}

ExperimentConfig config_from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  read_field(j, "dataset_dir", cfg.dataset_dir);
  read_field(j, "run_dir", cfg.run_dir);
  read_field(j, "profile", cfg.profile);
  read_field(j, "split", cfg.split);
  read_field(j, "learning_rate", cfg.learning_rate);
  read_field(j, "beta", cfg.beta);
  read_field(j, "tau", cfg.tau);
  read_field(j, "weight_decay", cfg.weight_decay);
  read_field(j, "max_tokens", cfg.max_tokens);
  read_field(j, "batch_size", cfg.batch_size);
  read_field(j, "epochs", cfg.epochs);
  read_field(j, "seed", cfg.seed);
  read_field(j, "fold", cfg.fold);
  read_field(j, "no_dist", cfg.no_dist);
  read_field(j, "no_ctxt", cfg.no_ctxt);
  read_field(j, "no_schm", cfg.no_schm);
  read_field(j, "no_ctrst", cfg.no_ctrst);
  read_field(j, "normalize_contrast", cfg.normalize_contrast);
  read_field(j, "mention_only_candidates", cfg.mention_only_candidates);
  read_field(j, "contrast_negatives", cfg.contrast_negatives);
  read_field(j, "vocab_file", cfg.vocab_file);

  if (cfg.dataset_dir.empty()) throw Error("config: dataset_dir is required");
  if (cfg.profile != "toy" && cfg.profile != "pretrained")
    throw Error("config: profile must be toy or pretrained, got '" + cfg.profile + "'");
  if (cfg.split != "none" && cfg.split != "esc" && cfg.split != "maven")
    throw Error("config: split must be none, esc, or maven, got '" + cfg.split + "'");
  if (!(cfg.learning_rate > 0)) throw Error("config: learning_rate must be positive");
  if (!(cfg.tau > 0)) throw Error("config: tau must be positive");
  if (cfg.beta < 0) throw Error("config: beta must be non-negative");
  if (cfg.batch_size < 1) throw Error("config: batch_size must be >= 1");
  if (cfg.max_tokens < 8) throw Error("config: max_tokens too small");
  if (cfg.fold < 0 || cfg.fold > 4) throw Error("config: fold must be 0-4");
  if (cfg.epochs == 0) {
    if (cfg.split == "esc")
      cfg.epochs = 15;
    else if (cfg.split == "maven")
      cfg.epochs = 10;
    else
      throw Error("config: epochs is required when split is none");
  }
  if (cfg.epochs < 0) throw Error("config: epochs must be positive");
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j{{"dataset_dir", cfg.dataset_dir},
         {"run_dir", cfg.run_dir},
         {"profile", cfg.profile},
         {"split", cfg.split},
         {"learning_rate", cfg.learning_rate},
         {"beta", cfg.beta},
         {"tau", cfg.tau},
         {"weight_decay", cfg.weight_decay},
         {"max_tokens", cfg.max_tokens},
         {"batch_size", cfg.batch_size},
         {"epochs", cfg.epochs},
         {"seed", cfg.seed},
         {"fold", cfg.fold},
         {"no_dist", cfg.no_dist},
         {"no_ctxt", cfg.no_ctxt},
         {"no_schm", cfg.no_schm},
         {"no_ctrst", cfg.no_ctrst},
         {"normalize_contrast", cfg.normalize_contrast},
         {"mention_only_candidates", cfg.mention_only_candidates},
         {"contrast_negatives", cfg.contrast_negatives},
         {"vocab_file", cfg.vocab_file}};
  return j.dump(2) + "\n";
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset out;
  if (std::filesystem::exists(dir / "sep_manifest.json")) {
    json manifest = json::parse(read_file(dir / "sep_manifest.json"));
    out.format_tag = "sep";
    out.build_seed = manifest.value("seed", 0ULL);
    for (const char* tag : {"train", "dev", "test"}) {
      auto file = dir / ("sep_" + std::string(tag) + ".jsonl");
      if (!std::filesystem::exists(file)) continue;
      for (auto& inst : read_instances(file)) out.instances.push_back(std::move(inst));
    }
    for (const auto& [doc, tag] : manifest.at("doc_split").items())
      out.doc_split[doc] = tag.get<std::string>();
    if (out.instances.empty()) throw Error("sep dataset " + dir.string() + " is empty");
    out.k = static_cast<int>(out.instances[0].candidates.size());
    out.dataset_hash = hex64(hash_file(dir / "sep_manifest.json"));
    return out;
  }

  if (!std::filesystem::exists(dir / "manifest.json"))
    throw Error("no manifest.json in dataset directory " + dir.string());
  json manifest = json::parse(read_file(dir / "manifest.json"));
  out.instances = read_instances(dir / "instances.jsonl");
  if (std::filesystem::exists(dir / "graphs.jsonl"))
    out.graphs = read_graphs(dir / "graphs.jsonl");
  out.format_tag = manifest.at("config").at("format").get<std::string>();
  out.k = manifest.at("config").at("candidates").get<int>();
  out.build_seed = manifest.at("config").at("seed").get<uint64_t>();
  out.dataset_hash = manifest.at("dataset_hash").get<std::string>();
  for (const auto& d : manifest.at("documents")) {
    std::string id = d.at("doc_id").get<std::string>();
    out.doc_topic[id] = d.value("topic", "");
    out.doc_split[id] = d.value("split", "");
  }
  return out;
}

SplitPlan plan_splits(const LoadedDataset& data, const ExperimentConfig& cfg) {
  SplitPlan plan;
  auto doc_of = [&](size_t i) { return doc_of_graph(data.instances[i].graph.doc_id); };

  if (data.format_tag == "sep") {
    for (size_t i = 0; i < data.instances.size(); ++i) {
      auto it = data.doc_split.find(doc_of(i));
      if (it == data.doc_split.end())
        throw Error("sep dataset: no split for document " + doc_of(i));
      if (it->second == "train")
        plan.train.push_back(i);
      else if (it->second == "dev")
        plan.dev.push_back(i);
      else
        plan.test.push_back(i);
    }
    if (plan.dev.empty()) plan.dev = plan.train;
    return plan;
  }

  if (cfg.split == "none") {
    for (size_t i = 0; i < data.instances.size(); ++i) plan.train.push_back(i);
    plan.dev = plan.train;
    plan.test = plan.train;
    return plan;
  }

  // esc / maven replay the corpus-level split assignment
  if (cfg.split == "esc" && data.k != kEscCandidates)
    throw Error("dataset/config mismatch: esc expects " +
                std::to_string(kEscCandidates) + " candidates, dataset has " +
                std::to_string(data.k));
  if (cfg.split == "maven" && data.k != kMavenCandidates)
    throw Error("dataset/config mismatch: maven expects " +
                std::to_string(kMavenCandidates) + " candidates, dataset has " +
                std::to_string(data.k));
  std::vector<CorpusDocument> docs;
  for (const auto& [id, topic] : data.doc_topic) {
    CorpusDocument d;
    d.doc_id = id;
    d.topic_id = topic;
    d.split_tag = data.doc_split.at(id);
    docs.push_back(std::move(d));
  }
  SplitAssignment assign = make_splits(docs, cfg.split, data.build_seed);

  if (cfg.split == "esc") {
    std::set<std::string> dev_topics(assign.esc.dev_topics.begin(),
                                     assign.esc.dev_topics.end());
    std::map<std::string, std::string> topic_fold;
    for (size_t f = 0; f < assign.esc.folds.size(); ++f)
      for (const auto& t : assign.esc.folds[f])
        topic_fold[t] = "fold" + std::to_string(f + 1);
    std::string held = "fold" + std::to_string(cfg.fold + 1);
    for (size_t i = 0; i < data.instances.size(); ++i) {
      const std::string& topic = data.doc_topic.at(doc_of(i));
      if (dev_topics.count(topic)) {
        plan.dev.push_back(i);
        continue;
      }
      const std::string& fold = topic_fold.at(topic);
      plan.fold_of_test[data.instances[i].instance_id] = fold;
      if (fold == held)
        plan.test.push_back(i);
      else
        plan.train.push_back(i);
    }
    return plan;
  }

  std::set<std::string> train_docs(assign.maven.train_docs.begin(),
                                   assign.maven.train_docs.end());
  std::set<std::string> dev_docs(assign.maven.dev_docs.begin(),
                                 assign.maven.dev_docs.end());
  for (size_t i = 0; i < data.instances.size(); ++i) {
    const std::string doc = doc_of(i);
    if (train_docs.count(doc))
      plan.train.push_back(i);
    else if (dev_docs.count(doc))
      plan.dev.push_back(i);
    else
      plan.test.push_back(i);
  }
  return plan;
}

CGEPInstance chain_view(const CGEPInstance& inst) {
  if (inst.chain.empty()) return inst;
  CGEPInstance out = inst;
  EventCausalityGraph g;
  g.doc_id = inst.graph.doc_id;
  // the chain ends at the gold node, which the instance graph does not hold
  for (size_t i = 0; i + 1 < inst.chain.size(); ++i)
    g.nodes.push_back(inst.graph.node(inst.chain[i]));
  for (size_t i = 0; i + 2 < inst.chain.size(); ++i)
    g.edges.push_back({inst.chain[i], inst.chain[i + 1]});
  out.graph = std::move(g);
  return out;
}

ModelOptions model_options_from(const ExperimentConfig& cfg) {
  ModelOptions opt;
  opt.max_tokens = cfg.max_tokens;
  opt.fusion = fusion_mode_from_flags(cfg.no_ctxt, cfg.no_schm);
  opt.random_order = cfg.no_dist;
  opt.normalize_contrast = cfg.normalize_contrast;
  opt.mention_only_candidates = cfg.mention_only_candidates;
  opt.contrast_negatives = cfg.contrast_negatives;
  opt.tau = cfg.tau;
  opt.beta = cfg.beta;
  opt.seed = cfg.seed;
  return opt;
}

BackendConfig backend_config_from(const ExperimentConfig& cfg, int vocab_size) {
  BackendConfig base = cfg.profile == "pretrained"
                           ? pretrained_backend_config("", vocab_size,
                                                       derive_seed(cfg.seed, "init"))
                           : toy_backend_config("", vocab_size,
                                                derive_seed(cfg.seed, "init"));
  base.max_positions = std::max(base.max_positions, cfg.max_tokens + 8);
  return base;
}

Trainer::Trainer(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  data_ = load_dataset(cfg_.dataset_dir);
  plan_ = plan_splits(data_, cfg_);
  if (cfg_.vocab_file.empty())
    tok_ = std::make_unique<CharTokenizer>();
  else
    tok_ = std::make_unique<WordTokenizer>(cfg_.vocab_file);
  model_ = std::make_unique<SedgplModel<float>>(
      *tok_, backend_config_from(cfg_, tok_->vocab_size()), model_options_from(cfg_));
}

std::string Trainer::meta_json() const {
  const BackendConfig& be = model_->ecg_backend().config();
  json model{{"profile", cfg_.profile},
             {"tokenizer", tok_->name()},
             {"vocab_size", tok_->vocab_size()},
             {"hidden_size", be.hidden_size},
             {"layers", be.layers},
             {"heads", be.heads},
             {"ff_size", be.ff_size},
             {"max_positions", be.max_positions},
             {"max_segments", be.max_segments},
             {"max_tokens", cfg_.max_tokens},
             {"fusion", to_string(model_->options().fusion)},
             {"seed", cfg_.seed}};
  json j{{"model", std::move(model)},
         {"dataset_hash", data_.dataset_hash},
         {"split", cfg_.split},
         {"fold", cfg_.fold},
         {"config", json::parse(config_to_json(cfg_))}};
  return j.dump();
}

void Trainer::load_weights(const std::filesystem::path& checkpoint) {
  std::string meta = load_checkpoint(checkpoint, model_->all_params());
  json theirs = json::parse(meta);
  json mine = json::parse(meta_json());
  if (theirs.at("model") != mine.at("model"))
    throw Error("checkpoint " + checkpoint.string() +
                " was trained with an incompatible model configuration:\n  checkpoint: " +
                theirs.at("model").dump() + "\n  current:    " + mine.at("model").dump());
}

std::vector<size_t> Trainer::split_indices(const std::string& split_tag) const {
  if (split_tag == "train") return plan_.train;
  if (split_tag == "dev") return plan_.dev;
  if (split_tag == "test") return plan_.test;
  if (split_tag == "all") {
    std::vector<size_t> all(data_.instances.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  throw Error("unknown split '" + split_tag + "' (train, dev, test, all)");
}

double Trainer::dev_mrr() {
  const auto& idx = plan_.dev.empty() ? plan_.train : plan_.dev;
  std::vector<RankRecord> records;
  records.reserve(idx.size());
  for (size_t i : idx) {
    CGEPInstance inst = chain_view(data_.instances[i]);
    RankedPrediction rp = model_->rank(inst);
    RankRecord rec;
    rec.instance_id = inst.instance_id;
    rec.gold_rank = rp.gold_rank;
    rec.candidate_count = static_cast<int>(inst.candidates.size());
    records.push_back(std::move(rec));
  }
  return 100.0 * mrr(records);
}

TrainResult Trainer::train() {
  if (cfg_.run_dir.empty()) throw Error("config: run_dir is required for training");
  if (plan_.train.empty()) throw Error("training split is empty");
  std::filesystem::path run_dir(cfg_.run_dir);
  std::filesystem::create_directories(run_dir);
  write_file(run_dir / "config.json", config_to_json(cfg_));
  json run_info{{"dataset_dir", cfg_.dataset_dir},
                {"dataset_hash", data_.dataset_hash},
                {"seed", cfg_.seed},
                {"train_instances", plan_.train.size()},
                {"dev_instances", plan_.dev.size()},
                {"test_instances", plan_.test.size()},
                {"trainable_parameters", model_->trainable_params().size()}};
  write_file(run_dir / "run.json", run_info.dump(2) + "\n");

  typename AdamW<float>::Hyper hyper;
  hyper.lr = static_cast<float>(cfg_.learning_rate);
  hyper.weight_decay = static_cast<float>(cfg_.weight_decay);
  AdamW<float> opt(model_->trainable_params(), hyper);

  const bool use_contrast = !cfg_.no_ctrst && cfg_.beta > 0;
  const float inv_batch = 1.0f / static_cast<float>(cfg_.batch_size);

  TrainResult res;
  res.best_checkpoint = run_dir / "best.ckpt";
  res.final_checkpoint = run_dir / "final.ckpt";
  res.best_dev_mrr = -1.0;
  std::ofstream log_out(run_dir / "train_log.jsonl", std::ios::trunc);
  if (!log_out) throw Error("cannot write " + (run_dir / "train_log.jsonl").string());

  for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    std::vector<size_t> order = plan_.train;
    DetRng rng(derive_seed(cfg_.seed, "epoch#" + std::to_string(epoch)));
    rng.shuffle(order);

    double sum_p = 0, sum_c = 0, sum_t = 0;
    int in_batch = 0;
    model_->zero_grad();
    for (size_t idx : order) {
      CGEPInstance inst = chain_view(data_.instances[idx]);
      auto f = model_->forward(inst, use_contrast);
      Tensor<float> l_p = prediction_loss<float>({f.score_row}, {f.gold_index});
      Tensor<float> loss =
          use_contrast ? total_loss(l_p, f.contrast, static_cast<float>(cfg_.beta)) : l_p;
      sum_p += static_cast<double>(l_p.scalar());
      sum_c += use_contrast ? static_cast<double>(f.contrast.scalar()) : 0.0;
      sum_t += static_cast<double>(loss.scalar());
      backward(cfg_.batch_size > 1 ? scale(loss, inv_batch) : loss);
      if (++in_batch == cfg_.batch_size) {
        opt.step();
        model_->zero_grad();
        in_batch = 0;
      }
    }
    if (in_batch > 0) {
      opt.step();
      model_->zero_grad();
    }

    double n = static_cast<double>(order.size());
    EpochLog el;
    el.epoch = epoch;
    el.loss = sum_t / n;
    el.l_p = sum_p / n;
    el.l_c = sum_c / n;
    el.dev_mrr = dev_mrr();
    res.log.push_back(el);
    json line{{"epoch", el.epoch},
              {"loss", el.loss},
              {"l_p", el.l_p},
              {"l_c", el.l_c},
              {"dev_mrr", el.dev_mrr}};
    log_out << line.dump() << '\n';
    log_out.flush();

    if (el.dev_mrr > res.best_dev_mrr) {
      res.best_dev_mrr = el.dev_mrr;
      res.best_epoch = epoch;
      save_checkpoint(res.best_checkpoint, model_->all_params(), meta_json());
    }
  }
  save_checkpoint(res.final_checkpoint, model_->all_params(), meta_json());
  return res;
}

EvalOutput Trainer::evaluate(const std::string& split_tag) {
  std::vector<size_t> idx = split_indices(split_tag);
  if (idx.empty()) throw Error("split '" + split_tag + "' is empty");

  EvalOutput out;
  std::map<std::string, std::string> folds;
  for (size_t i : idx) {
    CGEPInstance inst = chain_view(data_.instances[i]);
    RankedPrediction rp = model_->rank(inst);
    PredictionRecord rec;
    rec.instance_id = inst.instance_id;
    rec.gold_rank = rp.gold_rank;
    size_t cap = std::min<size_t>(rp.order.size(), 50);
    for (size_t c = 0; c < cap; ++c) {
      int cand = rp.order[c];
      rec.top.emplace_back(inst.candidates[static_cast<size_t>(cand)].mention,
                           rp.scores[static_cast<size_t>(cand)]);
    }
    auto fit = plan_.fold_of_test.find(inst.instance_id);
    if (fit != plan_.fold_of_test.end()) folds[fit->first] = fit->second;
    out.dump.push_back(std::move(rec));
  }
  // group per fold only when every scored instance carries a fold label
  if (folds.size() != out.dump.size()) folds.clear();
  out.table = evaluate_run(out.dump, data_.instances, folds);
  return out;
}

}  // namespace cgep
