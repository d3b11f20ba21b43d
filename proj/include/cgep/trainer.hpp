#pragma once

// Experiment orchestration: declarative configuration, dataset loading with
// split planning, the training loop (AdamW, per-epoch loss log, best-by-dev
// MRR checkpointing), evaluation into prediction dumps and metric tables,
// and self-contained run directories.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgep/checkpoint.hpp"
#include "cgep/corpus.hpp"
#include "cgep/metrics.hpp"
#include "cgep/model.hpp"
#include "cgep/tokenizer.hpp"

namespace cgep {

struct ExperimentConfig {
  std::string dataset_dir;
  std::string run_dir;
  std::string profile = "toy";  // toy | pretrained
  std::string split = "none";   // none (all instances train) | esc | maven
  double learning_rate = 5e-6;
  double beta = 0.5;
  double tau = 1.0;
  double weight_decay = 0.01;   // L2 strength, applied as decoupled decay
  int max_tokens = 200;
  int batch_size = 1;           // >1 accumulates gradients before stepping
  int epochs = 0;               // 0: 15 for esc, 10 for maven, required otherwise
  uint64_t seed = 1;
  int fold = 0;                 // esc: the held-out fold index (0-4)
  bool no_dist = false;         // ablations
  bool no_ctxt = false;
  bool no_schm = false;
  bool no_ctrst = false;
  bool normalize_contrast = false;
  bool mention_only_candidates = false;
  int contrast_negatives = 0;   // 0 = all k-1
  std::string vocab_file;       // word-level tokenizer; empty = character level
};

ExperimentConfig config_from_json_file(const std::filesystem::path& file);
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

struct LoadedDataset {
  std::vector<CGEPInstance> instances;
  std::vector<EventCausalityGraph> graphs;  // pre-instance graphs, gold present
  std::string format_tag;
  int k = 0;
  uint64_t build_seed = 0;
  std::string dataset_hash;
  std::map<std::string, std::string> doc_topic;  // doc_id -> topic
  std::map<std::string, std::string> doc_split;  // doc_id -> original split tag
};

// Reads instances.jsonl / graphs.jsonl / manifest.json. SEP directories
// (sep_*.jsonl + sep_manifest.json) load with split tags prebaked.
LoadedDataset load_dataset(const std::filesystem::path& dir);

struct SplitPlan {
  std::vector<size_t> train, dev, test;            // instance indices
  std::map<std::string, std::string> fold_of_test; // instance_id -> fold label (esc)
};

// none: everything is train=dev=test. esc: dev topics fixed, cfg.fold held
// out, the rest trains. maven: dev carved from train docs, original dev
// split is test. SEP directories use their prebaked document split.
SplitPlan plan_splits(const LoadedDataset& data, const ExperimentConfig& cfg);

// SEP instances carry the causal chain; the model sees the chain as a path
// graph (gold node excluded). Non-SEP instances pass through unchanged.
CGEPInstance chain_view(const CGEPInstance& inst);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;     // mean total loss over training instances
  double l_p = 0.0;      // mean prediction loss
  double l_c = 0.0;      // mean contrastive loss (0 when disabled)
  double dev_mrr = 0.0;  // 0-100
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::filesystem::path best_checkpoint;
  std::filesystem::path final_checkpoint;
  double best_dev_mrr = 0.0;
  int best_epoch = 0;
};

struct EvalOutput {
  MetricsTable table;
  std::vector<PredictionRecord> dump;
};

class Trainer {
 public:
  explicit Trainer(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const LoadedDataset& data() const { return data_; }
  const SplitPlan& plan() const { return plan_; }
  SedgplModel<float>& model() { return *model_; }

  TrainResult train();

  // Ranks every instance of one split ("train" | "dev" | "test") into a
  // prediction dump and scores it; esc test runs group per fold.
  EvalOutput evaluate(const std::string& split_tag);

  void load_weights(const std::filesystem::path& checkpoint);

  // Model identity snapshot stored in checkpoints and verified on load.
  std::string meta_json() const;

 private:
  std::vector<size_t> split_indices(const std::string& split_tag) const;
  double dev_mrr();

  ExperimentConfig cfg_;
  LoadedDataset data_;
  SplitPlan plan_;
  std::unique_ptr<Tokenizer> tok_;
  std::unique_ptr<SedgplModel<float>> model_;
};

// Builds the model-defining option set from a config (shared by Trainer and
// checkpoint compatibility checks).
ModelOptions model_options_from(const ExperimentConfig& cfg);
BackendConfig backend_config_from(const ExperimentConfig& cfg, int vocab_size);

}  // namespace cgep
