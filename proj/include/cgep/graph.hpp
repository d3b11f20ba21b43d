#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cgep/util.hpp"

namespace cgep {

// Character interval [start, end) within a sentence.
struct Span {
  int start = 0;
  int end = 0;
  bool operator==(const Span&) const = default;
  int length() const { return end - start; }
};

// One annotated event: mention surface form plus the raw sentence it occurs in.
// context_sentence/context_span, when populated by the dataset builder, hold
// the leakage-masked form of the sentence (sibling event mentions padded out)
// for context encoders; the raw sentence field is never masked.
struct Event {
  std::string event_id;
  std::string mention;
  std::string sentence;
  Span mention_span;
  std::string event_type;
  std::string context_sentence;
  Span context_span;

  // masked form when available, raw otherwise
  const std::string& context_text() const {
    return context_sentence.empty() ? sentence : context_sentence;
  }
  Span context_mention_span() const {
    return context_sentence.empty() ? mention_span : context_span;
  }

  bool operator==(const Event&) const = default;
};

struct CausalEdge {
  std::string cause_id;
  std::string effect_id;
  bool operator==(const CausalEdge&) const = default;
};

// Directed graph of events; edges point cause -> effect.
struct EventCausalityGraph {
  std::string doc_id;
  std::vector<Event> nodes;
  std::vector<CausalEdge> edges;

  bool has_node(const std::string& id) const;
  const Event& node(const std::string& id) const;
  Event& node_mut(const std::string& id);
};

// A candidate consequential event as it appears in the candidate set.
// mention_span locates the mention inside the (already leakage-masked)
// sentence so encoders can pool the right positions.
struct CandidateEvent {
  std::string mention;
  std::string sentence;  // leakage-masked
  std::string event_type;
  Span mention_span;
  bool operator==(const CandidateEvent&) const = default;
};

// One prediction problem: masked graph, anchor, gold, candidate set.
struct CGEPInstance {
  std::string instance_id;
  EventCausalityGraph graph;  // gold node and its incident edges removed
  std::string anchor_id;
  CandidateEvent gold;
  std::vector<CandidateEvent> candidates;
  uint64_t sampling_seed = 0;
  // cause-to-effect event chain ending at the gold node; only set for
  // script-event-prediction instances derived from this one
  std::vector<std::string> chain;

  int gold_index() const;  // position of the candidate equal to gold
};

// ---- graph algorithms ------------------------------------------------------

// Partition into weakly connected components (undirected closure of edges).
// Each output graph carries exactly the edges internal to it and inherits
// doc_id with a "#<k>" component suffix; components are ordered by their
// smallest event_id.
std::vector<EventCausalityGraph> weakly_connected_components(
    const std::vector<Event>& nodes, const std::vector<CausalEdge>& edges,
    const std::string& doc_id);

// Nodes with out-degree zero.
std::unordered_set<std::string> tail_events(const EventCausalityGraph& graph);

// Edge count of the shortest path between two nodes in the undirected
// closure. Throws on unknown ids; returns nullopt when no path exists.
std::optional<int> undirected_distance(const EventCausalityGraph& graph,
                                       const std::string& from_id,
                                       const std::string& to_id);

// For each tail event and each of its direct causes, one instance whose graph
// has the tail node (and incident edges) removed; anchor = the cause, gold =
// the tail. Candidates are not sampled here. Output is sorted by
// (gold event_id, anchor event_id).
std::vector<CGEPInstance> make_instances(const EventCausalityGraph& graph);

// Replace each foreign mention span by pad_token. Spans must not overlap each
// other or own_span (when given); own_span is rewritten to its shifted
// location so sentence[own_span] still equals the instance's own mention.
std::string mask_leakage(const std::string& sentence,
                         const std::vector<Span>& foreign_mentions,
                         const std::string& pad_token,
                         Span* own_span = nullptr);

// A pool entry remembers which graph its event came from so that sampling can
// exclude the instance's own graph.
struct PoolEntry {
  CandidateEvent event;
  std::string graph_id;
};

// Fill instance.candidates with gold + (k-1) distinct pool entries drawn
// without replacement; gold's position is itself seeded-random. Entries from
// the instance's own graph or equal to gold are skipped.
void sample_candidates(CGEPInstance& instance, const std::vector<PoolEntry>& pool,
                       int k, uint64_t seed);

// Validates the serializable CGEPInstance invariants; throws Error on the
// first violation. expected_k <= 0 skips the candidate-count check.
void validate_instance(const CGEPInstance& instance, int expected_k);

}  // namespace cgep
