#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgep/graph.hpp"

namespace cgep {

// One annotated source document, normalized from the on-disk corpus format.
// event_sentence_ids runs parallel to event_annotations.
struct CorpusDocument {
  std::string doc_id;
  std::string topic_id;   // esc dialect
  std::string split_tag;  // maven dialect
  std::vector<std::string> sentences;
  std::vector<Event> event_annotations;
  std::vector<int> event_sentence_ids;
  std::vector<CausalEdge> causal_annotations;
};

// Reads every *.json file under corpus_path. format_tag "esc" requires topic
// metadata, "maven" requires split metadata. Malformed records raise Error
// with file provenance; recoverable oddities (self-loops, duplicate edges,
// empty directory) are reported through warnings.
std::vector<CorpusDocument> ingest(const std::filesystem::path& corpus_path,
                                   const std::string& format_tag,
                                   std::vector<std::string>* warnings = nullptr);

// Candidate view of one annotated event: its sentence with every other
// annotated mention in that sentence replaced by pad_token.
CandidateEvent masked_candidate(const CorpusDocument& doc, size_t event_index,
                                const std::string& pad_token);

struct DatasetStats {
  int documents = 0;
  int graphs = 0;  // ECGs surviving the size filter
  int instances = 0;
  double avg_nodes = 0.0;
  double avg_edges = 0.0;
  int candidate_set_size = 0;
};

struct GraphSummary {
  std::string graph_id;
  int nodes = 0;
  int edges = 0;
  int tails = 0;
  int instances = 0;
};

struct BuiltDataset {
  std::vector<CGEPInstance> instances;
  std::vector<EventCausalityGraph> graphs;  // surviving, gold nodes still present
  std::vector<GraphSummary> graph_summaries;
  DatasetStats stats;
  std::vector<std::string> warnings;
  std::string pad_token;
};

// Full pipeline: per-document graph build, weak-component split, minimum-size
// filter, instance enumeration, leakage masking, seeded candidate sampling.
// Every emitted instance is validated. min_nodes = 5 keeps only graphs with
// more than 4 event nodes.
BuiltDataset build_dataset(const std::vector<CorpusDocument>& documents, int k,
                           uint64_t seed, const std::string& pad_token = "[PAD]",
                           int min_nodes = 5);

DatasetStats compute_stats(const std::vector<CGEPInstance>& instances,
                           const std::vector<EventCausalityGraph>& graphs,
                           int documents, int k);

// ---- persistence -----------------------------------------------------------

std::string instance_to_json_line(const CGEPInstance& instance);
CGEPInstance instance_from_json_line(const std::string& line);

std::string graph_to_json_line(const EventCausalityGraph& graph);
EventCausalityGraph graph_from_json_line(const std::string& line);

void write_instances(const std::filesystem::path& file,
                     const std::vector<CGEPInstance>& instances);
std::vector<CGEPInstance> read_instances(const std::filesystem::path& file);

void write_graphs(const std::filesystem::path& file,
                  const std::vector<EventCausalityGraph>& graphs);
std::vector<EventCausalityGraph> read_graphs(const std::filesystem::path& file);

// Writes instances.jsonl + manifest.json (config echo, stats, per-graph
// summaries, document metadata, content hash of the instance file).
void write_dataset(const std::filesystem::path& out_dir, const BuiltDataset& built,
                   const std::vector<CorpusDocument>& documents,
                   const std::string& format_tag, int k, uint64_t seed);

// ---- splits ----------------------------------------------------------------

struct EscSplits {
  std::vector<std::string> dev_topics;               // last two topics
  std::vector<std::vector<std::string>> folds;       // cross-validation folds
};

struct MavenSplits {
  std::vector<std::string> train_docs;
  std::vector<std::string> dev_docs;  // seeded 20% of the original train docs
  std::vector<std::string> test_docs; // the original dev split
};

struct SplitAssignment {
  std::string dataset_tag;
  EscSplits esc;
  MavenSplits maven;
};

SplitAssignment make_splits(const std::vector<CorpusDocument>& documents,
                            const std::string& dataset_tag, uint64_t seed);

// ---- script event prediction variant ---------------------------------------

// Longest directed causal chain through the anchor into the gold node, on the
// instance's original (gold still present) graph. Ties break toward the
// lexicographically smallest id sequence. Instances whose anchor has no
// causal predecessor chain of length >= 2 yield nullopt. The returned copy
// carries the chain; anchor, gold and candidates are unchanged.
std::optional<CGEPInstance> extract_sep_chain(const CGEPInstance& instance,
                                              const EventCausalityGraph& original_graph);

// Document-level 75 / 12.5 / 12.5 split, seeded.
std::map<std::string, std::string> sep_doc_split(const std::vector<std::string>& doc_ids,
                                                 uint64_t seed);

// "d01#0" -> "d01"
std::string doc_of_graph(const std::string& graph_id);

}  // namespace cgep
