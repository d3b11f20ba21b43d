// Dataset construction CLI: ingest annotated corpora, emit CGEP instance
// files, derive splits and the script-event-prediction variant, report stats.
#include <cstdio>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cgep/corpus.hpp"
#include "cgep/linearize.hpp"

using namespace cgep;
using nlohmann::json;

namespace {

int run_build(const std::string& corpus, const std::string& format, int candidates,
              uint64_t seed, const std::string& out) {
  std::vector<std::string> warnings;
  auto docs = ingest(corpus, format, &warnings);
  auto built = build_dataset(docs, candidates, seed);
  for (const auto& w : warnings) built.warnings.push_back(w);
  for (const auto& w : built.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_dataset(out, built, docs, format, candidates, seed);
  std::printf("wrote %d instances from %d graphs to %s\n", built.stats.instances,
              built.stats.graphs, out.c_str());
  return 0;
}

void print_stats_table(const std::string& name, const DatasetStats& s) {
  std::printf("%-16s %6s %6s %10s %10s %10s %9s\n", "Dataset", "Docs", "ECGs",
              "Avg.Nodes", "Avg.Edges", "Instances", "CandiSet");
  std::printf("%-16s %6d %6d %10.1f %10.1f %10d %9d\n", name.c_str(), s.documents,
              s.graphs, s.avg_nodes, s.avg_edges, s.instances, s.candidate_set_size);
}

int run_stats(const std::string& in) {
  auto instances = read_instances(std::filesystem::path(in) / "instances.jsonl");
  auto graphs = read_graphs(std::filesystem::path(in) / "graphs.jsonl");
  json manifest = json::parse(read_file(std::filesystem::path(in) / "manifest.json"));
  int documents = manifest.at("stats").at("documents").get<int>();
  int k = manifest.at("config").at("candidates").get<int>();
  auto stats = compute_stats(instances, graphs, documents, k);
  print_stats_table(std::filesystem::path(in).filename().string(), stats);
  return 0;
}

int run_splits(const std::string& corpus, const std::string& dataset, uint64_t seed,
               const std::string& out) {
  auto docs = ingest(corpus, dataset);
  auto splits = make_splits(docs, dataset, seed);
  json j;
  j["dataset"] = splits.dataset_tag;
  j["seed"] = seed;
  if (dataset == "esc") {
    j["dev_topics"] = splits.esc.dev_topics;
    json folds = json::array();
    for (const auto& f : splits.esc.folds) folds.push_back(f);
    j["folds"] = std::move(folds);
  } else {
    j["train_docs"] = splits.maven.train_docs;
    j["dev_docs"] = splits.maven.dev_docs;
    j["test_docs"] = splits.maven.test_docs;
  }
  std::string body = j.dump(2) + "\n";
  if (out.empty()) {
    std::fputs(body.c_str(), stdout);
  } else {
    write_file(out, body);
    std::printf("wrote splits to %s\n", out.c_str());
  }
  return 0;
}

int run_sep(const std::string& in, const std::string& out, uint64_t seed) {
  auto instances = read_instances(std::filesystem::path(in) / "instances.jsonl");
  auto graphs = read_graphs(std::filesystem::path(in) / "graphs.jsonl");
  std::map<std::string, const EventCausalityGraph*> graph_by_id;
  for (const auto& g : graphs) graph_by_id[g.doc_id] = &g;

  std::vector<CGEPInstance> kept;
  int dropped = 0;
  for (const auto& inst : instances) {
    auto it = graph_by_id.find(inst.graph.doc_id);
    if (it == graph_by_id.end())
      throw Error("sep: no original graph for " + inst.graph.doc_id);
    auto sep = extract_sep_chain(inst, *it->second);
    if (sep)
      kept.push_back(std::move(*sep));
    else
      ++dropped;
  }

  std::set<std::string> doc_set;
  for (const auto& inst : kept) doc_set.insert(doc_of_graph(inst.graph.doc_id));
  auto split = sep_doc_split({doc_set.begin(), doc_set.end()}, seed);

  std::map<std::string, std::vector<CGEPInstance>> by_split;
  std::map<int, int> length_histogram;
  for (auto& inst : kept) {
    length_histogram[static_cast<int>(inst.chain.size())]++;
    by_split[split.at(doc_of_graph(inst.graph.doc_id))].push_back(std::move(inst));
  }
  std::filesystem::create_directories(out);
  for (const char* tag : {"train", "dev", "test"})
    write_instances(std::filesystem::path(out) / ("sep_" + std::string(tag) + ".jsonl"),
                    by_split[tag]);

  json manifest;
  manifest["seed"] = seed;
  manifest["instances"] = static_cast<int>(kept.size());
  manifest["dropped_short_chains"] = dropped;
  json hist = json::object();
  for (const auto& [len, count] : length_histogram) hist[std::to_string(len)] = count;
  manifest["chain_length_histogram"] = std::move(hist);
  json split_j = json::object();
  for (const auto& [doc, tag] : split) split_j[doc] = tag;
  manifest["doc_split"] = std::move(split_j);
  write_file(std::filesystem::path(out) / "sep_manifest.json", manifest.dump(2) + "\n");
  std::printf("kept %zu chains (%d dropped) across %zu documents -> %s\n", kept.size(),
              dropped, doc_set.size(), out.c_str());
  return 0;
}

int run_linearize(const std::string& file, const std::string& id, int max_tokens,
                  bool schema) {
  CGEPInstance chosen;
  bool found = false;
  for (const auto& inst : read_instances(file)) {
    if (id.empty() || inst.instance_id == id) {
      chosen = inst;
      found = true;
      break;
    }
  }
  if (!found) throw Error("linearize: no instance" + (id.empty() ? "" : " " + id) +
                          " in " + file);

  auto tok = make_char_tokenizer();
  auto tpl = linearize(chosen.graph, chosen.anchor_id, max_tokens, *tok);
  std::printf("instance: %s\nanchor:   %s\n", chosen.instance_id.c_str(),
              chosen.anchor_id.c_str());
  std::printf("template: %s\n", tpl.text.c_str());
  if (schema) {
    auto st = schema_template(tpl, chosen.graph, chosen.anchor_id, *tok);
    std::printf("schema:   %s\n", st.text.c_str());
  }
  std::printf("%-6s %-24s %s\n", "dist", "triple", "segment");
  for (size_t i = 0; i < tpl.segments.size(); ++i) {
    const auto& t = tpl.segments[i];
    std::printf("%-6d %-24s %zu\n", t.distance,
                (t.cause_mention + " causes " + t.effect_mention).c_str(), i);
  }
  std::printf("tokens: %zu (mask at %d)\n", tpl.token_ids.size(), tpl.mask_pos);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CGEP dataset builder"};
  app.require_subcommand(1);

  std::string corpus, format = "esc", out, in, dataset, instance_file, instance_id;
  int candidates = 256;
  uint64_t seed = 13;
  int max_tokens = 200;
  bool with_schema = false;

  auto* build = app.add_subcommand("build", "ingest a corpus and emit CGEP instances");
  build->add_option("--corpus", corpus, "corpus directory")->required();
  build->add_option("--format", format, "esc or maven")->required();
  build->add_option("--candidates", candidates, "candidate set size");
  build->add_option("--seed", seed, "sampling seed");
  build->add_option("--out", out, "output directory")->required();

  auto* splits = app.add_subcommand("splits", "derive train/dev/test splits");
  splits->add_option("--corpus", corpus, "corpus directory")->required();
  splits->add_option("--dataset", dataset, "esc or maven")->required();
  splits->add_option("--seed", seed, "split seed");
  splits->add_option("--out", out, "output file (stdout when omitted)");

  auto* sep = app.add_subcommand("sep", "derive the script-event-prediction variant");
  sep->add_option("--in", in, "built dataset directory")->required();
  sep->add_option("--out", out, "output directory")->required();
  sep->add_option("--seed", seed, "document split seed");

  auto* stats = app.add_subcommand("stats", "print dataset statistics");
  stats->add_option("--in", in, "built dataset directory")->required();

  auto* lin = app.add_subcommand("linearize", "print the rendered template of an instance");
  lin->add_option("--instance", instance_file, "instance JSONL file")->required();
  lin->add_option("--id", instance_id, "instance id (default: first)");
  lin->add_option("--max-tokens", max_tokens, "token budget");
  lin->add_flag("--schema", with_schema, "also print the schema template");

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) return run_build(corpus, format, candidates, seed, out);
    if (splits->parsed()) return run_splits(corpus, dataset, seed, out);
    if (sep->parsed()) return run_sep(in, out, seed);
    if (stats->parsed()) return run_stats(in);
    if (lin->parsed()) return run_linearize(instance_file, instance_id, max_tokens, with_schema);
  } catch (const std::exception& e) {
    json err{{"error", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
  return 1;
}
