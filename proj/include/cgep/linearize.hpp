#pragma once

#include <limits>
#include <string>
#include <vector>

#include "cgep/graph.hpp"
#include "cgep/tokenizer.hpp"

namespace cgep {

// Distance of a triple whose cause has no undirected path to the anchor.
// Such triples sort as farthest and are the first to be truncated.
constexpr int kUnreachableDistance = std::numeric_limits<int>::max();

// One causality edge rendered as "<cause mention> causes <effect mention>".
struct TripleTemplate {
  std::string cause_id;
  std::string effect_id;
  std::string cause_mention;
  std::string effect_mention;
  int distance = -1;  // undirected distance of the cause to the anchor
};

struct TokenLayout {
  int segment = -1;             // triple index, or prompt segment (= #triples)
  bool is_event_mention = false;
  std::string event_id;         // set when is_event_mention
};

// An event mention's contiguous subtoken positions within a template.
struct EventOccurrence {
  std::string event_id;
  int segment = -1;
  std::vector<int> positions;
};

// Linearized token sequence with the [MASK] slot and per-token layout.
struct GraphPromptTemplate {
  std::vector<TripleTemplate> segments;  // in rendered order
  std::string prompt_text;               // "<anchor> causes [MASK]"
  std::string text;                      // full rendered string
  std::vector<int> token_ids;
  std::vector<TokenLayout> token_layout;
  std::vector<EventOccurrence> occurrences;  // cause/effect per segment, then anchor
  int mask_pos = -1;
  int prompt_segment = -1;  // segment index of the prompt (= segments.size())
};

// One triple per directed edge; deterministic base order (cause_id, effect_id).
std::vector<TripleTemplate> extract_triples(const EventCausalityGraph& graph);

// distance = undirected_distance(graph, cause, anchor); unreachable causes get
// kUnreachableDistance.
void assign_distances(std::vector<TripleTemplate>& triples,
                      const EventCausalityGraph& graph,
                      const std::string& anchor_id);

// Stable sort by non-increasing distance; ties keep base order.
void order_triples(std::vector<TripleTemplate>& triples);

// Renders "[C] T_1 [S] ... T_n [S] <anchor> causes [MASK] [S]". When the full
// template exceeds max_tokens whole triples are dropped farthest-first; the
// prompt segment is never dropped. Throws if the prompt alone does not fit.
GraphPromptTemplate render(const std::vector<TripleTemplate>& ordered_triples,
                           const std::string& anchor_id,
                           const std::string& anchor_mention, int max_tokens,
                           const Tokenizer& tokenizer);

// Mention template for an instance: extract -> distance -> order -> render.
GraphPromptTemplate linearize(const EventCausalityGraph& graph,
                              const std::string& anchor_id, int max_tokens,
                              const Tokenizer& tokenizer);

// As linearize, but with a seeded random triple order (distance ablation).
GraphPromptTemplate linearize_random_order(const EventCausalityGraph& graph,
                                           const std::string& anchor_id,
                                           int max_tokens,
                                           const Tokenizer& tokenizer,
                                           uint64_t seed);

// Schema-graph template aligned with an already-rendered mention template:
// identical segment set and order, mentions replaced by event types. The
// mention template's truncation decisions are authoritative.
GraphPromptTemplate schema_template(const GraphPromptTemplate& mention_template,
                                    const EventCausalityGraph& graph,
                                    const std::string& anchor_id,
                                    const Tokenizer& tokenizer);

}  // namespace cgep
