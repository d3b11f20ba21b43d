#pragma once

// Zero-shot LLM baseline: assemble a ranked-list prompt from an instance's
// linearized graph, event texts, and candidate pool; parse the generated
// list; filter it to the candidate set; and score the gold's position with
// the absent-gold fallback. Transports are injected: a live HTTP client
// (credential via environment) and a filesystem replay store for tests.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgep/graph.hpp"
#include "cgep/metrics.hpp"
#include "cgep/tokenizer.hpp"

namespace cgep {

struct LlmPrompt {
  std::string graph_definition;           // prose definition of the causal graph
  std::vector<std::string> event_texts;   // indexed event sentences, graph order
  std::string candidate_block;            // every candidate mention exactly once
  std::string query;                      // "What are the subsequent events of {anchor}?"
  std::string render() const;             // full deterministic prompt string
};

struct LlmResponse {
  std::string raw_text;
  std::vector<std::string> parsed_events;  // generation order preserved
};

// Number of ranked events the prompt asks for (more than the 50 scored).
inline constexpr int kLlmRequestCount = 60;

LlmPrompt build_prompt(const CGEPInstance& instance, const Tokenizer& tokenizer,
                       int max_tokens = 200);

// Split raw generation text into candidate mention guesses: one per line,
// with list numbering and bullet markers stripped.
LlmResponse parse_response(const std::string& raw_text);

// Filter the parsed list to candidate mentions (case-insensitive exact match,
// first occurrence wins) and rank the gold within it. A missing gold gets
// fallback_rank; an empty response leaves the rank absent. The returned rank
// never exceeds fallback_rank.
RankRecord parse_and_score(const LlmResponse& response, const CGEPInstance& instance,
                           int fallback_rank);

class LlmTransport {
 public:
  virtual ~LlmTransport() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Replays recorded exchanges from a directory of <fnv1a64(prompt)>.json files
// holding {"prompt": ..., "response": ...}. Pure and deterministic.
class ReplayTransport : public LlmTransport {
 public:
  explicit ReplayTransport(std::filesystem::path dir);
  std::string complete(const std::string& prompt) override;

 private:
  std::filesystem::path dir_;
};

// Writes an exchange in the replay format (used by the live client to record,
// and by tests to build fixtures).
void save_exchange(const std::filesystem::path& dir, const std::string& prompt,
                   const std::string& response);

// Chat-completions HTTP client. Reads CGEP_LLM_BASE_URL, CGEP_LLM_API_KEY,
// and CGEP_LLM_MODEL from the environment; optionally records every exchange
// for later replay. Sequential, with a fixed delay between calls.
class HttpTransport : public LlmTransport {
 public:
  explicit HttpTransport(std::optional<std::filesystem::path> record_dir = std::nullopt);
  std::string complete(const std::string& prompt) override;

 private:
  std::string base_url_, api_key_, model_;
  std::optional<std::filesystem::path> record_dir_;
};

// Full baseline pass: prompt, transport round trip, parse, and score every
// instance. Returns the per-instance records plus a dump mirroring the
// filtered ranked lists.
struct LlmEvalResult {
  std::vector<RankRecord> records;
  std::vector<PredictionRecord> dump;
};

LlmEvalResult llm_evaluate(const std::vector<CGEPInstance>& instances,
                           const Tokenizer& tokenizer, LlmTransport& transport,
                           int fallback_rank);

}  // namespace cgep
