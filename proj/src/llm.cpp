#include "cgep/llm.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cgep/linearize.hpp"
#include "cgep/util.hpp"

namespace cgep {

using nlohmann::json;

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string LlmPrompt::render() const {
  std::ostringstream out;
  out << graph_definition << "\n\n";
  out << "Events:\n";
  for (size_t i = 0; i < event_texts.size(); ++i)
    out << (i + 1) << ". " << event_texts[i] << "\n";
  out << "\nCandidate events:\n" << candidate_block;
  out << "\n" << query << "\n";
  out << "Rank the " << kLlmRequestCount
      << " most likely events, choosing only from the candidate list above. "
         "Answer with one event per line, most likely first.\n";
  return out.str();
}

LlmPrompt build_prompt(const CGEPInstance& instance, const Tokenizer& tokenizer,
                       int max_tokens) {
  LlmPrompt p;
  GraphPromptTemplate tpl =
      linearize(instance.graph, instance.anchor_id, max_tokens, tokenizer);

  std::ostringstream def;
  def << "A causal event graph is a directed graph whose nodes are events and whose "
         "edges point from a cause event to its effect event. This graph's edges, "
         "written one \"cause causes effect\" triplet per line and ordered by "
         "decreasing graph distance from the anchor event, are:\n";
  for (const auto& t : tpl.segments)
    def << t.cause_mention << " causes " << t.effect_mention << "\n";
  p.graph_definition = def.str();

  for (const auto& node : instance.graph.nodes)
    p.event_texts.push_back(node.mention + ": " + node.context_text());

  std::ostringstream cands;
  std::unordered_set<std::string> seen;
  for (const auto& c : instance.candidates) {
    if (!seen.insert(lower(c.mention)).second) continue;
    cands << "- " << c.mention << "\n";
  }
  p.candidate_block = cands.str();

  const Event& anchor = instance.graph.node(instance.anchor_id);
  p.query = "What are the subsequent events of " + anchor.mention + "?";
  return p;
}

LlmResponse parse_response(const std::string& raw_text) {
  LlmResponse r;
  r.raw_text = raw_text;
  static const std::regex list_marker(R"(^\s*(?:[-*•]+|\(?\d+[.)\]:]?)\s*)");
  std::istringstream in(raw_text);
  std::string line;
  while (std::getline(in, line)) {
    line = std::regex_replace(line, list_marker, "");
    line = trim(line);
    while (!line.empty() && (line.back() == '.' || line.back() == ',' ||
                             line.back() == ';' || line.back() == ':'))
      line.pop_back();
    if (line.size() >= 2 && ((line.front() == '"' && line.back() == '"') ||
                             (line.front() == '\'' && line.back() == '\'')))
      line = line.substr(1, line.size() - 2);
    line = trim(line);
    if (!line.empty()) r.parsed_events.push_back(line);
  }
  return r;
}

RankRecord parse_and_score(const LlmResponse& response, const CGEPInstance& instance,
                           int fallback_rank) {
  if (fallback_rank < 1) throw Error("parse_and_score: fallback rank must be >= 1");
  RankRecord rec;
  rec.instance_id = instance.instance_id;
  rec.candidate_count = static_cast<int>(instance.candidates.size());

  if (trim(response.raw_text).empty()) return rec;  // no generation: rank stays absent

  std::unordered_set<std::string> candidate_set;
  for (const auto& c : instance.candidates) candidate_set.insert(lower(c.mention));
  std::string gold = lower(instance.gold.mention);

  std::vector<std::string> filtered;
  std::unordered_set<std::string> taken;
  for (const auto& e : response.parsed_events) {
    std::string le = lower(e);
    if (!candidate_set.count(le)) continue;   // not a candidate: drop
    if (!taken.insert(le).second) continue;   // duplicate: first occurrence counts
    filtered.push_back(le);
  }

  rec.gold_rank = fallback_rank;
  for (size_t i = 0; i < filtered.size(); ++i) {
    if (filtered[i] == gold) {
      rec.gold_rank = std::min<int>(static_cast<int>(i) + 1, fallback_rank);
      break;
    }
  }
  return rec;
}

ReplayTransport::ReplayTransport(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_))
    throw Error("replay directory not found: " + dir_.string());
}

std::string ReplayTransport::complete(const std::string& prompt) {
  std::string key = hex64(fnv1a64(prompt));
  auto file = dir_ / (key + ".json");
  if (!std::filesystem::exists(file))
    throw Error("no replay fixture for prompt hash " + key + " in " + dir_.string());
  json j = json::parse(read_file(file));
  if (j.at("prompt").get<std::string>() != prompt)
    throw Error("replay fixture " + key + " does not match the prompt (stale fixture?)");
  return j.at("response").get<std::string>();
}

void save_exchange(const std::filesystem::path& dir, const std::string& prompt,
                   const std::string& response) {
  std::filesystem::create_directories(dir);
  json j{{"prompt", prompt}, {"response", response}};
  write_file(dir / (hex64(fnv1a64(prompt)) + ".json"), j.dump(2) + "\n");
}

HttpTransport::HttpTransport(std::optional<std::filesystem::path> record_dir)
    : record_dir_(std::move(record_dir)) {
  const char* url = std::getenv("CGEP_LLM_BASE_URL");
  const char* key = std::getenv("CGEP_LLM_API_KEY");
  const char* model = std::getenv("CGEP_LLM_MODEL");
  if (!url || !key)
    throw Error("live LLM calls need CGEP_LLM_BASE_URL and CGEP_LLM_API_KEY set");
  base_url_ = url;
  api_key_ = key;
  model_ = model ? model : "gpt-3.5-turbo";
}

std::string HttpTransport::complete(const std::string& prompt) {
  httplib::Client client(base_url_);
  client.set_read_timeout(120, 0);
  httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
  json body{{"model", model_},
            {"temperature", 0},
            {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
  auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
  if (!res)
    throw Error("LLM request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error("LLM request returned status " + std::to_string(res->status) + ": " +
                res->body);
  json j = json::parse(res->body);
  std::string text = j.at("choices").at(0).at("message").at("content").get<std::string>();
  if (record_dir_) save_exchange(*record_dir_, prompt, text);
  std::this_thread::sleep_for(std::chrono::milliseconds(250));  // sequential rate limit
  return text;
}

LlmEvalResult llm_evaluate(const std::vector<CGEPInstance>& instances,
                           const Tokenizer& tokenizer, LlmTransport& transport,
                           int fallback_rank) {
  LlmEvalResult out;
  for (const auto& inst : instances) {
    LlmPrompt prompt = build_prompt(inst, tokenizer);
    LlmResponse resp = parse_response(transport.complete(prompt.render()));
    RankRecord rec = parse_and_score(resp, inst, fallback_rank);

    PredictionRecord dump;
    dump.instance_id = inst.instance_id;
    dump.gold_rank = rec.gold_rank;
    std::unordered_set<std::string> candidate_set, taken;
    for (const auto& c : inst.candidates) candidate_set.insert(lower(c.mention));
    for (const auto& e : resp.parsed_events) {
      std::string le = lower(e);
      if (!candidate_set.count(le) || !taken.insert(le).second) continue;
      dump.top.emplace_back(le, 1.0 / static_cast<double>(dump.top.size() + 1));
    }
    out.dump.push_back(std::move(dump));
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace cgep
