#include "cgep/linearize.hpp"

#include <algorithm>
#include <tuple>

namespace cgep {

std::vector<TripleTemplate> extract_triples(const EventCausalityGraph& graph) {
  std::vector<TripleTemplate> out;
  out.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    TripleTemplate t;
    t.cause_id = e.cause_id;
    t.effect_id = e.effect_id;
    t.cause_mention = graph.node(e.cause_id).mention;
    t.effect_mention = graph.node(e.effect_id).mention;
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(), [](const TripleTemplate& a, const TripleTemplate& b) {
    return std::tie(a.cause_id, a.effect_id) < std::tie(b.cause_id, b.effect_id);
  });
  return out;
}

void assign_distances(std::vector<TripleTemplate>& triples,
                      const EventCausalityGraph& graph,
                      const std::string& anchor_id) {
  if (!graph.has_node(anchor_id))
    throw Error("assign_distances: anchor '" + anchor_id + "' not in graph");
  for (auto& t : triples) {
    auto d = undirected_distance(graph, t.cause_id, anchor_id);
    t.distance = d ? *d : kUnreachableDistance;
  }
}

void order_triples(std::vector<TripleTemplate>& triples) {
  std::stable_sort(triples.begin(), triples.end(),
                   [](const TripleTemplate& a, const TripleTemplate& b) {
                     return a.distance > b.distance;
                   });
}

namespace {

struct SegmentTokens {
  std::vector<int> cause, mid, effect;
  int cost() const {
    return static_cast<int>(cause.size() + mid.size() + effect.size()) + 1;  // + [S]
  }
};

void append_mention(GraphPromptTemplate& tpl, const std::vector<int>& ids,
                    const std::string& event_id, int segment) {
  EventOccurrence occ;
  occ.event_id = event_id;
  occ.segment = segment;
  for (int id : ids) {
    occ.positions.push_back(static_cast<int>(tpl.token_ids.size()));
    tpl.token_ids.push_back(id);
    tpl.token_layout.push_back({segment, true, event_id});
  }
  tpl.occurrences.push_back(std::move(occ));
}

void append_plain(GraphPromptTemplate& tpl, const std::vector<int>& ids, int segment) {
  for (int id : ids) {
    tpl.token_ids.push_back(id);
    tpl.token_layout.push_back({segment, false, {}});
  }
}

GraphPromptTemplate render_with_texts(
    const std::vector<TripleTemplate>& ordered_triples,
    const std::vector<std::pair<std::string, std::string>>& triple_texts,
    const std::string& anchor_id, const std::string& anchor_text, int max_tokens,
    const Tokenizer& tokenizer, bool enforce_budget) {
  const std::vector<int> mid = tokenizer.encode(" causes ").ids;

  std::vector<SegmentTokens> seg_tokens(ordered_triples.size());
  for (size_t i = 0; i < ordered_triples.size(); ++i) {
    seg_tokens[i].cause = tokenizer.encode(triple_texts[i].first).ids;
    seg_tokens[i].mid = mid;
    seg_tokens[i].effect = tokenizer.encode(triple_texts[i].second).ids;
  }
  std::vector<int> anchor_ids = tokenizer.encode(anchor_text).ids;
  // [CLS] + anchor + " causes " + [MASK] + [SEP]
  int overhead = 1 + static_cast<int>(anchor_ids.size() + mid.size()) + 1 + 1;
  if (enforce_budget && overhead > max_tokens)
    throw Error("render: prompt segment alone exceeds the token budget (" +
                std::to_string(overhead) + " > " + std::to_string(max_tokens) + ")");

  size_t first = 0;  // drop whole triples farthest-first until the budget fits
  if (enforce_budget) {
    int total = overhead;
    for (const auto& st : seg_tokens) total += st.cost();
    while (total > max_tokens && first < seg_tokens.size()) {
      total -= seg_tokens[first].cost();
      ++first;
    }
  }

  GraphPromptTemplate tpl;
  tpl.segments.assign(ordered_triples.begin() + static_cast<long>(first),
                      ordered_triples.end());
  tpl.prompt_segment = static_cast<int>(tpl.segments.size());

  tpl.token_ids.push_back(tokenizer.cls_id());
  tpl.token_layout.push_back({0, false, {}});
  tpl.text = "[C] ";

  for (size_t i = first; i < ordered_triples.size(); ++i) {
    int seg = static_cast<int>(i - first);
    append_mention(tpl, seg_tokens[i].cause, ordered_triples[i].cause_id, seg);
    append_plain(tpl, seg_tokens[i].mid, seg);
    append_mention(tpl, seg_tokens[i].effect, ordered_triples[i].effect_id, seg);
    tpl.token_ids.push_back(tokenizer.sep_id());
    tpl.token_layout.push_back({seg, false, {}});
    tpl.text += triple_texts[i].first + " causes " + triple_texts[i].second + " [S] ";
  }

  int pseg = tpl.prompt_segment;
  append_mention(tpl, anchor_ids, anchor_id, pseg);
  append_plain(tpl, mid, pseg);
  tpl.mask_pos = static_cast<int>(tpl.token_ids.size());
  tpl.token_ids.push_back(tokenizer.mask_id());
  tpl.token_layout.push_back({pseg, false, {}});
  tpl.token_ids.push_back(tokenizer.sep_id());
  tpl.token_layout.push_back({pseg, false, {}});
  tpl.prompt_text = anchor_text + " causes [MASK]";
  tpl.text += tpl.prompt_text + " [S]";
  return tpl;
}

}  // namespace

GraphPromptTemplate render(const std::vector<TripleTemplate>& ordered_triples,
                           const std::string& anchor_id,
                           const std::string& anchor_mention, int max_tokens,
                           const Tokenizer& tokenizer) {
  std::vector<std::pair<std::string, std::string>> texts;
  texts.reserve(ordered_triples.size());
  for (const auto& t : ordered_triples)
    texts.emplace_back(t.cause_mention, t.effect_mention);
  return render_with_texts(ordered_triples, texts, anchor_id, anchor_mention,
                           max_tokens, tokenizer, /*enforce_budget=*/true);
}

GraphPromptTemplate linearize(const EventCausalityGraph& graph,
                              const std::string& anchor_id, int max_tokens,
                              const Tokenizer& tokenizer) {
  auto triples = extract_triples(graph);
  assign_distances(triples, graph, anchor_id);
  order_triples(triples);
  return render(triples, anchor_id, graph.node(anchor_id).mention, max_tokens,
                tokenizer);
}

GraphPromptTemplate linearize_random_order(const EventCausalityGraph& graph,
                                           const std::string& anchor_id,
                                           int max_tokens,
                                           const Tokenizer& tokenizer,
                                           uint64_t seed) {
  auto triples = extract_triples(graph);
  assign_distances(triples, graph, anchor_id);
  DetRng rng(seed);
  rng.shuffle(triples);
  return render(triples, anchor_id, graph.node(anchor_id).mention, max_tokens,
                tokenizer);
}

GraphPromptTemplate schema_template(const GraphPromptTemplate& mention_template,
                                    const EventCausalityGraph& graph,
                                    const std::string& anchor_id,
                                    const Tokenizer& tokenizer) {
  auto type_of = [&](const std::string& id) -> std::string {
    const auto& t = graph.node(id).event_type;
    if (t.empty()) throw Error("schema_template: event '" + id + "' has no event_type");
    return t;
  };
  std::vector<std::pair<std::string, std::string>> texts;
  texts.reserve(mention_template.segments.size());
  for (const auto& seg : mention_template.segments)
    texts.emplace_back(type_of(seg.cause_id), type_of(seg.effect_id));
  return render_with_texts(mention_template.segments, texts, anchor_id,
                           type_of(anchor_id), /*max_tokens=*/0, tokenizer,
                           /*enforce_budget=*/false);
}

}  // namespace cgep
