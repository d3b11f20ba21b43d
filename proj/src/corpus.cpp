#include "cgep/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace cgep {

using nlohmann::json;

namespace {

std::string require_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty())
    throw Error(where + ": missing or empty '" + std::string(key) + "'");
  return j[key].get<std::string>();
}

CorpusDocument parse_document(const json& j, const std::string& where,
                              const std::string& format_tag,
                              std::vector<std::string>* warnings) {
  CorpusDocument doc;
  doc.doc_id = require_string(j, "id", where);
  const std::string rec = where + ": document " + doc.doc_id;
  doc.topic_id = j.value("topic", std::string());
  doc.split_tag = j.value("split", std::string());
  if (format_tag == "esc" && doc.topic_id.empty())
    throw Error(rec + ": missing topic metadata required by the esc format");
  if (format_tag == "maven" && doc.split_tag.empty())
    throw Error(rec + ": missing split metadata required by the maven format");

  if (!j.contains("sentences") || !j["sentences"].is_array())
    throw Error(rec + ": missing 'sentences' array");
  for (const auto& s : j["sentences"]) {
    if (!s.is_string()) throw Error(rec + ": non-string sentence entry");
    doc.sentences.push_back(s.get<std::string>());
  }

  std::unordered_set<std::string> ids;
  for (const auto& ev : j.value("events", json::array())) {
    Event e;
    e.event_id = require_string(ev, "id", rec);
    const std::string evrec = rec + ": event " + e.event_id;
    if (!ids.insert(e.event_id).second) throw Error(evrec + ": duplicate event id");
    e.mention = require_string(ev, "mention", evrec);
    if (!ev.contains("sent_id") || !ev["sent_id"].is_number_integer())
      throw Error(evrec + ": missing 'sent_id'");
    int sid = ev["sent_id"].get<int>();
    if (sid < 0 || sid >= static_cast<int>(doc.sentences.size()))
      throw Error(evrec + ": sent_id " + std::to_string(sid) + " out of range");
    e.sentence = doc.sentences[sid];
    if (!ev.contains("span") || !ev["span"].is_array() || ev["span"].size() != 2)
      throw Error(evrec + ": missing 'span' [start, end)");
    e.mention_span.start = ev["span"][0].get<int>();
    e.mention_span.end = ev["span"][1].get<int>();
    if (e.mention_span.start < 0 || e.mention_span.start >= e.mention_span.end ||
        e.mention_span.end > static_cast<int>(e.sentence.size()))
      throw Error(evrec + ": span [" + std::to_string(e.mention_span.start) + ", " +
                  std::to_string(e.mention_span.end) + ") outside sentence " +
                  std::to_string(sid));
    if (e.sentence.substr(e.mention_span.start, e.mention_span.length()) != e.mention)
      throw Error(evrec + ": span text does not match mention '" + e.mention + "'");
    e.event_type = ev.value("type", std::string());
    doc.event_annotations.push_back(std::move(e));
    doc.event_sentence_ids.push_back(sid);
  }

  std::unordered_set<std::string> edge_keys;
  for (const auto& rel : j.value("causal_relations", json::array())) {
    if (!rel.is_array() || rel.size() != 2 || !rel[0].is_string() || !rel[1].is_string())
      throw Error(rec + ": causal relation must be a [cause_id, effect_id] pair");
    CausalEdge e{rel[0].get<std::string>(), rel[1].get<std::string>()};
    if (!ids.count(e.cause_id))
      throw Error(rec + ": relation references unknown event '" + e.cause_id + "'");
    if (!ids.count(e.effect_id))
      throw Error(rec + ": relation references unknown event '" + e.effect_id + "'");
    if (e.cause_id == e.effect_id) {
      if (warnings)
        warnings->push_back(rec + ": self-loop relation " + e.cause_id + " -> " +
                            e.effect_id + " dropped");
      continue;
    }
    if (!edge_keys.insert(e.cause_id + "\x1f" + e.effect_id).second) {
      if (warnings)
        warnings->push_back(rec + ": duplicate relation " + e.cause_id + " -> " +
                            e.effect_id + " dropped");
      continue;
    }
    doc.causal_annotations.push_back(std::move(e));
  }
  return doc;
}

}  // namespace

std::vector<CorpusDocument> ingest(const std::filesystem::path& corpus_path,
                                   const std::string& format_tag,
                                   std::vector<std::string>* warnings) {
  if (format_tag != "esc" && format_tag != "maven")
    throw Error("unknown format tag '" + format_tag + "' (expected esc or maven)");
  if (!std::filesystem::exists(corpus_path))
    throw Error("corpus path does not exist: " + corpus_path.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(corpus_path))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty() && warnings)
    warnings->push_back("no .json corpus files under " + corpus_path.string());

  std::vector<CorpusDocument> docs;
  std::unordered_set<std::string> doc_ids;
  for (const auto& file : files) {
    json j;
    try {
      j = json::parse(read_file(file));
    } catch (const json::exception& e) {
      throw Error(file.filename().string() + ": " + e.what());
    }
    auto doc = parse_document(j, file.filename().string(), format_tag, warnings);
    if (!doc_ids.insert(doc.doc_id).second)
      throw Error(file.filename().string() + ": duplicate document id '" + doc.doc_id + "'");
    docs.push_back(std::move(doc));
  }
  std::sort(docs.begin(), docs.end(),
            [](const CorpusDocument& a, const CorpusDocument& b) { return a.doc_id < b.doc_id; });
  return docs;
}

CandidateEvent masked_candidate(const CorpusDocument& doc, size_t event_index,
                                const std::string& pad_token) {
  const Event& ev = doc.event_annotations.at(event_index);
  int sid = doc.event_sentence_ids.at(event_index);
  std::vector<Span> foreign;
  for (size_t j = 0; j < doc.event_annotations.size(); ++j)
    if (j != event_index && doc.event_sentence_ids[j] == sid)
      foreign.push_back(doc.event_annotations[j].mention_span);
  Span own = ev.mention_span;
  std::string masked = mask_leakage(ev.sentence, foreign, pad_token, &own);
  return CandidateEvent{ev.mention, masked, ev.event_type, own};
}

DatasetStats compute_stats(const std::vector<CGEPInstance>& instances,
                           const std::vector<EventCausalityGraph>& graphs,
                           int documents, int k) {
  DatasetStats s;
  s.documents = documents;
  s.graphs = static_cast<int>(graphs.size());
  s.instances = static_cast<int>(instances.size());
  s.candidate_set_size = k;
  if (!graphs.empty()) {
    double nodes = 0, edges = 0;
    for (const auto& g : graphs) {
      nodes += static_cast<double>(g.nodes.size());
      edges += static_cast<double>(g.edges.size());
    }
    s.avg_nodes = nodes / static_cast<double>(graphs.size());
    s.avg_edges = edges / static_cast<double>(graphs.size());
  }
  return s;
}

BuiltDataset build_dataset(const std::vector<CorpusDocument>& documents, int k,
                           uint64_t seed, const std::string& pad_token, int min_nodes) {
  BuiltDataset out;
  out.pad_token = pad_token;

  std::vector<const CorpusDocument*> docs;
  docs.reserve(documents.size());
  for (const auto& d : documents) docs.push_back(&d);
  std::sort(docs.begin(), docs.end(),
            [](const CorpusDocument* a, const CorpusDocument* b) { return a->doc_id < b->doc_id; });

  std::vector<PoolEntry> pool;
  for (const CorpusDocument* doc : docs) {
    std::unordered_map<std::string, CandidateEvent> cand;
    for (size_t i = 0; i < doc->event_annotations.size(); ++i)
      cand[doc->event_annotations[i].event_id] = masked_candidate(*doc, i, pad_token);

    auto components = weakly_connected_components(doc->event_annotations,
                                                  doc->causal_annotations, doc->doc_id);
    for (auto& comp : components) {
      if (static_cast<int>(comp.nodes.size()) < min_nodes) continue;

      // carry the leakage-masked sentence form on every node so context
      // encoders never see a sibling mention (the masked gold included)
      for (auto& n : comp.nodes) {
        const CandidateEvent& m = cand.at(n.event_id);
        n.context_sentence = m.sentence;
        n.context_span = m.mention_span;
      }

      GraphSummary summary;
      summary.graph_id = comp.doc_id;
      summary.nodes = static_cast<int>(comp.nodes.size());
      summary.edges = static_cast<int>(comp.edges.size());

      auto tails = tail_events(comp);
      summary.tails = static_cast<int>(tails.size());
      std::vector<std::string> tail_ids(tails.begin(), tails.end());
      std::sort(tail_ids.begin(), tail_ids.end());
      for (const auto& tid : tail_ids) pool.push_back({cand.at(tid), comp.doc_id});

      auto instances = make_instances(comp);
      summary.instances = static_cast<int>(instances.size());
      for (auto& inst : instances) {
        std::string gold_id;
        for (const auto& n : comp.nodes)
          if (!inst.graph.has_node(n.event_id)) gold_id = n.event_id;
        inst.gold = cand.at(gold_id);
        out.instances.push_back(std::move(inst));
      }
      out.graph_summaries.push_back(summary);
      out.graphs.push_back(std::move(comp));
    }
  }

  // deduplicate pool entries with identical surface forms, keeping the first
  std::vector<PoolEntry> deduped;
  std::unordered_set<std::string> seen;
  for (auto& entry : pool)
    if (seen.insert(entry.event.mention + "\x1f" + entry.event.sentence).second)
      deduped.push_back(std::move(entry));

  for (auto& inst : out.instances) {
    sample_candidates(inst, deduped, k, derive_seed(seed, inst.instance_id));
    validate_instance(inst, k);
  }

  out.stats = compute_stats(out.instances, out.graphs,
                            static_cast<int>(documents.size()), k);
  return out;
}

// ---- persistence -----------------------------------------------------------

namespace {

json candidate_to_json(const CandidateEvent& c) {
  return json{{"mention", c.mention},
              {"sentence", c.sentence},
              {"event_type", c.event_type},
              {"mention_span", json::array({c.mention_span.start, c.mention_span.end})}};
}

CandidateEvent candidate_from_json(const json& j) {
  CandidateEvent c{j.at("mention").get<std::string>(),
                   j.at("sentence").get<std::string>(),
                   j.at("event_type").get<std::string>(),
                   {}};
  c.mention_span.start = j.at("mention_span")[0].get<int>();
  c.mention_span.end = j.at("mention_span")[1].get<int>();
  return c;
}

json graph_to_json(const EventCausalityGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json node{{"event_id", n.event_id},
              {"mention", n.mention},
              {"sentence", n.sentence},
              {"mention_span", json::array({n.mention_span.start, n.mention_span.end})},
              {"event_type", n.event_type}};
    if (!n.context_sentence.empty()) {
      node["context_sentence"] = n.context_sentence;
      node["context_span"] = json::array({n.context_span.start, n.context_span.end});
    }
    nodes.push_back(std::move(node));
  }
  json edges = json::array();
  for (const auto& e : g.edges)
    edges.push_back(json{{"cause_id", e.cause_id}, {"effect_id", e.effect_id}});
  return json{{"doc_id", g.doc_id}, {"nodes", nodes}, {"edges", edges}};
}

EventCausalityGraph graph_from_json(const json& j) {
  EventCausalityGraph g;
  g.doc_id = j.at("doc_id").get<std::string>();
  for (const auto& n : j.at("nodes")) {
    Event e;
    e.event_id = n.at("event_id").get<std::string>();
    e.mention = n.at("mention").get<std::string>();
    e.sentence = n.at("sentence").get<std::string>();
    e.mention_span.start = n.at("mention_span")[0].get<int>();
    e.mention_span.end = n.at("mention_span")[1].get<int>();
    e.event_type = n.at("event_type").get<std::string>();
    if (n.contains("context_sentence")) {
      e.context_sentence = n.at("context_sentence").get<std::string>();
      e.context_span.start = n.at("context_span")[0].get<int>();
      e.context_span.end = n.at("context_span")[1].get<int>();
    }
    g.nodes.push_back(std::move(e));
  }
  for (const auto& e : j.at("edges"))
    g.edges.push_back(CausalEdge{e.at("cause_id").get<std::string>(),
                                 e.at("effect_id").get<std::string>()});
  return g;
}

}  // namespace

std::string instance_to_json_line(const CGEPInstance& instance) {
  json j;
  j["instance_id"] = instance.instance_id;
  j["graph"] = graph_to_json(instance.graph);
  j["anchor_id"] = instance.anchor_id;
  j["gold"] = candidate_to_json(instance.gold);
  json cands = json::array();
  for (const auto& c : instance.candidates) cands.push_back(candidate_to_json(c));
  j["candidates"] = std::move(cands);
  j["sampling_seed"] = instance.sampling_seed;
  if (!instance.chain.empty()) j["chain"] = instance.chain;
  return j.dump();
}

CGEPInstance instance_from_json_line(const std::string& line) {
  json j = json::parse(line);
  CGEPInstance inst;
  inst.instance_id = j.at("instance_id").get<std::string>();
  inst.graph = graph_from_json(j.at("graph"));
  inst.anchor_id = j.at("anchor_id").get<std::string>();
  inst.gold = candidate_from_json(j.at("gold"));
  for (const auto& c : j.at("candidates")) inst.candidates.push_back(candidate_from_json(c));
  inst.sampling_seed = j.at("sampling_seed").get<uint64_t>();
  if (j.contains("chain")) inst.chain = j["chain"].get<std::vector<std::string>>();
  return inst;
}

std::string graph_to_json_line(const EventCausalityGraph& graph) {
  return graph_to_json(graph).dump();
}

EventCausalityGraph graph_from_json_line(const std::string& line) {
  return graph_from_json(json::parse(line));
}

namespace {

std::vector<std::string> split_lines(const std::string& body) {
  std::vector<std::string> lines;
  size_t pos = 0;
  while (pos < body.size()) {
    size_t nl = body.find('\n', pos);
    if (nl == std::string::npos) nl = body.size();
    std::string line = body.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

void write_instances(const std::filesystem::path& file,
                     const std::vector<CGEPInstance>& instances) {
  std::string body;
  for (const auto& inst : instances) {
    body += instance_to_json_line(inst);
    body += '\n';
  }
  write_file(file, body);
}

std::vector<CGEPInstance> read_instances(const std::filesystem::path& file) {
  std::vector<CGEPInstance> out;
  size_t line_no = 0;
  for (const auto& line : split_lines(read_file(file))) {
    ++line_no;
    try {
      out.push_back(instance_from_json_line(line));
    } catch (const json::exception& e) {
      throw Error(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_graphs(const std::filesystem::path& file,
                  const std::vector<EventCausalityGraph>& graphs) {
  std::string body;
  for (const auto& g : graphs) {
    body += graph_to_json_line(g);
    body += '\n';
  }
  write_file(file, body);
}

std::vector<EventCausalityGraph> read_graphs(const std::filesystem::path& file) {
  std::vector<EventCausalityGraph> out;
  size_t line_no = 0;
  for (const auto& line : split_lines(read_file(file))) {
    ++line_no;
    try {
      out.push_back(graph_from_json_line(line));
    } catch (const json::exception& e) {
      throw Error(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& out_dir, const BuiltDataset& built,
                   const std::vector<CorpusDocument>& documents,
                   const std::string& format_tag, int k, uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  write_instances(out_dir / "instances.jsonl", built.instances);
  write_graphs(out_dir / "graphs.jsonl", built.graphs);

  json manifest;
  manifest["config"] = json{{"format", format_tag},
                            {"candidates", k},
                            {"seed", seed},
                            {"pad_token", built.pad_token}};
  manifest["stats"] = json{{"documents", built.stats.documents},
                           {"graphs", built.stats.graphs},
                           {"instances", built.stats.instances},
                           {"avg_nodes", built.stats.avg_nodes},
                           {"avg_edges", built.stats.avg_edges},
                           {"candidate_set_size", built.stats.candidate_set_size}};
  json graphs = json::array();
  for (const auto& g : built.graph_summaries)
    graphs.push_back(json{{"graph_id", g.graph_id},
                          {"nodes", g.nodes},
                          {"edges", g.edges},
                          {"tails", g.tails},
                          {"instances", g.instances}});
  manifest["graphs"] = std::move(graphs);
  json docs = json::array();
  for (const auto& d : documents)
    docs.push_back(json{{"doc_id", d.doc_id}, {"topic", d.topic_id}, {"split", d.split_tag}});
  manifest["documents"] = std::move(docs);
  manifest["dataset_hash"] = hex64(hash_file(out_dir / "instances.jsonl"));
  json warns = json::array();
  for (const auto& w : built.warnings) warns.push_back(w);
  manifest["warnings"] = std::move(warns);
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---- splits ----------------------------------------------------------------

namespace {

// numeric-aware topic ordering so "t10" follows "t9"
std::pair<long long, std::string> topic_key(const std::string& topic) {
  long long num = -1;
  size_t i = 0;
  while (i < topic.size() && !std::isdigit(static_cast<unsigned char>(topic[i]))) ++i;
  if (i < topic.size()) {
    num = 0;
    while (i < topic.size() && std::isdigit(static_cast<unsigned char>(topic[i])))
      num = num * 10 + (topic[i++] - '0');
  }
  return {num, topic};
}

}  // namespace

SplitAssignment make_splits(const std::vector<CorpusDocument>& documents,
                            const std::string& dataset_tag, uint64_t seed) {
  SplitAssignment out;
  out.dataset_tag = dataset_tag;

  if (dataset_tag == "esc") {
    std::set<std::string> topic_set;
    for (const auto& d : documents) {
      if (d.topic_id.empty())
        throw Error("make_splits: document " + d.doc_id + " has no topic metadata");
      topic_set.insert(d.topic_id);
    }
    std::vector<std::string> topics(topic_set.begin(), topic_set.end());
    std::sort(topics.begin(), topics.end(), [](const std::string& a, const std::string& b) {
      return topic_key(a) < topic_key(b);
    });
    if (topics.size() < 7)
      throw Error("make_splits: esc needs at least 7 topics (2 dev + 5 folds), got " +
                  std::to_string(topics.size()));
    out.esc.dev_topics.assign(topics.end() - 2, topics.end());
    std::vector<std::string> rest(topics.begin(), topics.end() - 2);
    DetRng rng(derive_seed(seed, "esc-folds"));
    rng.shuffle(rest);
    size_t n = rest.size(), base = n / 5, extra = n % 5, pos = 0;
    for (size_t f = 0; f < 5; ++f) {
      size_t take = base + (f < extra ? 1 : 0);
      std::vector<std::string> fold(rest.begin() + static_cast<long>(pos),
                                    rest.begin() + static_cast<long>(pos + take));
      std::sort(fold.begin(), fold.end(), [](const std::string& a, const std::string& b) {
        return topic_key(a) < topic_key(b);
      });
      out.esc.folds.push_back(std::move(fold));
      pos += take;
    }
    return out;
  }

  if (dataset_tag == "maven") {
    std::vector<std::string> train, test;
    for (const auto& d : documents) {
      if (d.split_tag.empty())
        throw Error("make_splits: document " + d.doc_id + " has no split metadata");
      if (d.split_tag == "train")
        train.push_back(d.doc_id);
      else
        test.push_back(d.doc_id);  // the original dev split is evaluated on
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    std::vector<std::string> shuffled = train;
    DetRng rng(derive_seed(seed, "maven-dev"));
    rng.shuffle(shuffled);
    size_t n_dev = static_cast<size_t>(std::llround(0.2 * static_cast<double>(train.size())));
    std::set<std::string> dev_set(shuffled.begin(), shuffled.begin() + static_cast<long>(n_dev));
    for (const auto& id : train) {
      if (dev_set.count(id))
        out.maven.dev_docs.push_back(id);
      else
        out.maven.train_docs.push_back(id);
    }
    out.maven.test_docs = std::move(test);
    return out;
  }

  throw Error("make_splits: unknown dataset tag '" + dataset_tag + "'");
}

// ---- script event prediction variant ---------------------------------------

std::string doc_of_graph(const std::string& graph_id) {
  auto pos = graph_id.rfind('#');
  return pos == std::string::npos ? graph_id : graph_id.substr(0, pos);
}

std::optional<CGEPInstance> extract_sep_chain(const CGEPInstance& instance,
                                              const EventCausalityGraph& original_graph) {
  std::string gold_id;
  for (const auto& n : original_graph.nodes) {
    if (instance.graph.has_node(n.event_id)) continue;
    if (!gold_id.empty())
      throw Error("extract_sep_chain: original graph differs from the instance graph by "
                  "more than one node");
    gold_id = n.event_id;
  }
  if (gold_id.empty())
    throw Error("extract_sep_chain: gold node not found in the original graph");

  bool anchor_causes_gold = false;
  std::unordered_map<std::string, std::vector<std::string>> preds;
  for (const auto& e : original_graph.edges) {
    preds[e.effect_id].push_back(e.cause_id);
    if (e.cause_id == instance.anchor_id && e.effect_id == gold_id)
      anchor_causes_gold = true;
  }
  if (!anchor_causes_gold)
    throw Error("extract_sep_chain: no anchor -> gold edge in the original graph for " +
                instance.instance_id);
  for (auto& [id, p] : preds) std::sort(p.begin(), p.end());

  // Longest simple directed path ending anchor -> gold; backward DFS with an
  // expansion budget so annotation cycles cannot blow up.
  std::vector<std::string> best{instance.anchor_id, gold_id};
  std::vector<std::string> path{instance.anchor_id};  // reverse order from anchor
  std::unordered_set<std::string> on_path{instance.anchor_id, gold_id};
  long budget = 200000;

  auto consider = [&]() {
    std::vector<std::string> forward(path.rbegin(), path.rend());
    forward.push_back(gold_id);
    if (forward.size() > best.size() || (forward.size() == best.size() && forward < best))
      best = std::move(forward);
  };

  std::function<void(const std::string&)> dfs = [&](const std::string& node) {
    if (--budget <= 0) return;
    auto it = preds.find(node);
    if (it == preds.end()) return;
    for (const auto& p : it->second) {
      if (on_path.count(p)) continue;
      on_path.insert(p);
      path.push_back(p);
      consider();
      dfs(p);
      path.pop_back();
      on_path.erase(p);
    }
  };
  dfs(instance.anchor_id);

  if (best.size() < 3) return std::nullopt;
  CGEPInstance out = instance;
  out.chain = std::move(best);
  return out;
}

std::map<std::string, std::string> sep_doc_split(const std::vector<std::string>& doc_ids,
                                                 uint64_t seed) {
  std::vector<std::string> ids = doc_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  DetRng rng(derive_seed(seed, "sep-split"));
  rng.shuffle(ids);
  size_t n = ids.size();
  size_t n_train = static_cast<size_t>(std::llround(0.75 * static_cast<double>(n)));
  size_t n_dev = static_cast<size_t>(std::llround(0.125 * static_cast<double>(n)));
  if (n_train > n) n_train = n;
  if (n_train + n_dev > n) n_dev = n - n_train;
  std::map<std::string, std::string> out;
  for (size_t i = 0; i < n; ++i)
    out[ids[i]] = i < n_train ? "train" : (i < n_train + n_dev ? "dev" : "test");
  return out;
}

}  // namespace cgep
