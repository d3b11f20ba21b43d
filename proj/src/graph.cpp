#include "cgep/graph.hpp"

#include <algorithm>
#include <deque>
#include <map>

namespace cgep {

bool EventCausalityGraph::has_node(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.event_id == id) return true;
  return false;
}

const Event& EventCausalityGraph::node(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.event_id == id) return n;
  throw Error("unknown event id '" + id + "' in graph " + doc_id);
}

Event& EventCausalityGraph::node_mut(const std::string& id) {
  for (auto& n : nodes)
    if (n.event_id == id) return n;
  throw Error("unknown event id '" + id + "' in graph " + doc_id);
}

int CGEPInstance::gold_index() const {
  for (size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] == gold) return static_cast<int>(i);
  throw Error("instance " + instance_id + ": gold not present in candidate list");
}

namespace {

// disjoint-set over node indices
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(size_t n) : parent(n) {
    for (size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

std::unordered_map<std::string, int> index_nodes(const std::vector<Event>& nodes) {
  std::unordered_map<std::string, int> idx;
  idx.reserve(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    auto [it, fresh] = idx.emplace(nodes[i].event_id, static_cast<int>(i));
    if (!fresh) throw Error("duplicate event id '" + nodes[i].event_id + "'");
  }
  return idx;
}

}  // namespace

std::vector<EventCausalityGraph> weakly_connected_components(
    const std::vector<Event>& nodes, const std::vector<CausalEdge>& edges,
    const std::string& doc_id) {
  if (nodes.empty()) return {};
  auto idx = index_nodes(nodes);
  UnionFind uf(nodes.size());
  for (const auto& e : edges) {
    auto a = idx.find(e.cause_id);
    auto b = idx.find(e.effect_id);
    if (a == idx.end() || b == idx.end())
      throw Error("edge references unknown node: " + e.cause_id + " -> " + e.effect_id);
    uf.unite(a->second, b->second);
  }

  // group by root; order components by their smallest member event_id
  std::map<std::string, int> smallest_to_root;
  std::unordered_map<int, std::string> root_smallest;
  for (size_t i = 0; i < nodes.size(); ++i) {
    int r = uf.find(static_cast<int>(i));
    auto it = root_smallest.find(r);
    if (it == root_smallest.end() || nodes[i].event_id < it->second)
      root_smallest[r] = nodes[i].event_id;
  }
  for (auto& [root, smallest] : root_smallest) smallest_to_root[smallest] = root;

  std::vector<EventCausalityGraph> out;
  std::unordered_map<int, size_t> root_to_comp;
  size_t comp_no = 0;
  for (auto& [smallest, root] : smallest_to_root) {
    EventCausalityGraph g;
    g.doc_id = doc_id + "#" + std::to_string(comp_no);
    root_to_comp[root] = comp_no;
    out.push_back(std::move(g));
    ++comp_no;
  }
  for (size_t i = 0; i < nodes.size(); ++i)
    out[root_to_comp[uf.find(static_cast<int>(i))]].nodes.push_back(nodes[i]);
  for (const auto& e : edges)
    out[root_to_comp[uf.find(idx[e.cause_id])]].edges.push_back(e);
  return out;
}

std::unordered_set<std::string> tail_events(const EventCausalityGraph& graph) {
  std::unordered_set<std::string> tails;
  for (const auto& n : graph.nodes) tails.insert(n.event_id);
  for (const auto& e : graph.edges) tails.erase(e.cause_id);
  return tails;
}

std::optional<int> undirected_distance(const EventCausalityGraph& graph,
                                       const std::string& from_id,
                                       const std::string& to_id) {
  auto idx = index_nodes(graph.nodes);
  auto from = idx.find(from_id);
  auto to = idx.find(to_id);
  if (from == idx.end()) throw Error("undirected_distance: unknown id '" + from_id + "'");
  if (to == idx.end()) throw Error("undirected_distance: unknown id '" + to_id + "'");
  if (from->second == to->second) return 0;

  std::vector<std::vector<int>> adj(graph.nodes.size());
  for (const auto& e : graph.edges) {
    int a = idx.at(e.cause_id), b = idx.at(e.effect_id);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> dist(graph.nodes.size(), -1);
  std::deque<int> queue;
  dist[from->second] = 0;
  queue.push_back(from->second);
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v : adj[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        if (v == to->second) return dist[v];
        queue.push_back(v);
      }
    }
  }
  return std::nullopt;
}

std::vector<CGEPInstance> make_instances(const EventCausalityGraph& graph) {
  auto tails = tail_events(graph);

  // (gold, anchor) pairs in deterministic order
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& e : graph.edges)
    if (tails.count(e.effect_id)) pairs.emplace_back(e.effect_id, e.cause_id);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<CGEPInstance> out;
  for (const auto& [gold_id, anchor_id] : pairs) {
    CGEPInstance inst;
    inst.instance_id = graph.doc_id + "/" + gold_id + "/" + anchor_id;
    inst.anchor_id = anchor_id;
    const Event& gold_node = graph.node(gold_id);
    inst.gold = CandidateEvent{gold_node.mention, gold_node.sentence, gold_node.event_type,
                               gold_node.mention_span};
    inst.graph.doc_id = graph.doc_id;
    for (const auto& n : graph.nodes)
      if (n.event_id != gold_id) inst.graph.nodes.push_back(n);
    for (const auto& e : graph.edges)
      if (e.cause_id != gold_id && e.effect_id != gold_id) inst.graph.edges.push_back(e);
    out.push_back(std::move(inst));
  }
  return out;
}

std::string mask_leakage(const std::string& sentence,
                         const std::vector<Span>& foreign_mentions,
                         const std::string& pad_token, Span* own_span) {
  std::vector<Span> spans = foreign_mentions;
  std::sort(spans.begin(), spans.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  for (const auto& s : spans) {
    if (s.start < 0 || s.end > static_cast<int>(sentence.size()) || s.start >= s.end)
      throw Error("mask_leakage: span out of bounds");
    if (own_span && s.start < own_span->end && own_span->start < s.end)
      throw Error("mask_leakage: foreign span overlaps the instance's own mention");
  }
  for (size_t i = 1; i < spans.size(); ++i)
    if (spans[i].start < spans[i - 1].end)
      throw Error("mask_leakage: overlapping mention spans");

  // replace right-to-left so earlier spans stay valid
  std::string out = sentence;
  for (auto it = spans.rbegin(); it != spans.rend(); ++it)
    out = out.substr(0, it->start) + pad_token + out.substr(it->end);

  if (own_span) {
    int shift = 0;
    for (const auto& s : spans)
      if (s.end <= own_span->start)
        shift += static_cast<int>(pad_token.size()) - s.length();
    own_span->start += shift;
    own_span->end += shift;
  }
  return out;
}

void sample_candidates(CGEPInstance& instance, const std::vector<PoolEntry>& pool,
                       int k, uint64_t seed) {
  if (k < 1) throw Error("sample_candidates: k must be positive");
  std::vector<const CandidateEvent*> eligible;
  eligible.reserve(pool.size());
  for (const auto& entry : pool) {
    if (entry.graph_id == instance.graph.doc_id) continue;
    if (entry.event == instance.gold) continue;
    eligible.push_back(&entry.event);
  }
  size_t need = static_cast<size_t>(k - 1);
  if (eligible.size() < need)
    throw Error("sample_candidates: candidate pool too small for instance " +
                instance.instance_id + " (required " + std::to_string(need) +
                ", available " + std::to_string(eligible.size()) + ")");

  DetRng rng(seed);
  auto picks = rng.sample_indices(eligible.size(), need);
  std::vector<CandidateEvent> list;
  list.reserve(k);
  for (size_t p : picks) list.push_back(*eligible[p]);
  size_t gold_pos = static_cast<size_t>(rng.bounded(static_cast<uint64_t>(k)));
  list.insert(list.begin() + static_cast<long>(gold_pos), instance.gold);

  instance.candidates = std::move(list);
  instance.sampling_seed = seed;
}

void validate_instance(const CGEPInstance& instance, int expected_k) {
  if (!instance.graph.has_node(instance.anchor_id))
    throw Error("instance " + instance.instance_id + ": anchor not in graph");
  if (expected_k > 0 && static_cast<int>(instance.candidates.size()) != expected_k)
    throw Error("instance " + instance.instance_id + ": candidate list size " +
                std::to_string(instance.candidates.size()) + " != " +
                std::to_string(expected_k));
  int gold_count = 0;
  for (const auto& c : instance.candidates)
    if (c == instance.gold) ++gold_count;
  if (gold_count != 1)
    throw Error("instance " + instance.instance_id + ": gold appears " +
                std::to_string(gold_count) + " times in candidates");
  for (const auto& c : instance.candidates) {
    if (c.mention.empty())
      throw Error("instance " + instance.instance_id + ": candidate with empty mention");
    if (c.mention_span.start < 0 ||
        c.mention_span.end > static_cast<int>(c.sentence.size()) ||
        c.sentence.substr(c.mention_span.start, c.mention_span.length()) != c.mention)
      throw Error("instance " + instance.instance_id +
                  ": candidate span/mention mismatch for '" + c.mention + "'");
  }
  for (const auto& n : instance.graph.nodes) {
    if (n.mention.empty())
      throw Error("instance " + instance.instance_id + ": empty mention " + n.event_id);
    if (n.mention_span.start < 0 || n.mention_span.end > static_cast<int>(n.sentence.size()) ||
        n.sentence.substr(n.mention_span.start, n.mention_span.length()) != n.mention)
      throw Error("instance " + instance.instance_id + ": span/mention mismatch for " +
                  n.event_id);
    if (!n.context_sentence.empty() &&
        (n.context_span.start < 0 ||
         n.context_span.end > static_cast<int>(n.context_sentence.size()) ||
         n.context_sentence.substr(n.context_span.start, n.context_span.length()) !=
             n.mention))
      throw Error("instance " + instance.instance_id + ": context span/mention mismatch for " +
                  n.event_id);
  }
  std::unordered_set<std::string> seen;
  for (const auto& e : instance.graph.edges) {
    if (e.cause_id == e.effect_id)
      throw Error("instance " + instance.instance_id + ": self-loop " + e.cause_id);
    if (!instance.graph.has_node(e.cause_id) || !instance.graph.has_node(e.effect_id))
      throw Error("instance " + instance.instance_id + ": dangling edge");
    if (!seen.insert(e.cause_id + "\x1f" + e.effect_id).second)
      throw Error("instance " + instance.instance_id + ": duplicate edge");
  }
}

}  // namespace cgep
