#pragma once

// Ranking evaluation: MRR and Hit@n over per-instance gold ranks, with the
// missing-gold fallback convention (absent gold gets the candidate-set size
// as its rank). Metrics compute on 0-1 internally; tables report 0-100.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgep/graph.hpp"

namespace cgep {

struct RankRecord {
  std::string instance_id;
  std::optional<int> gold_rank;  // 1-based; absent when the gold was never ranked
  int candidate_count = 0;
};

// Rank used for scoring: the recorded rank, else fallback_rank, else the
// record's own candidate count.
int effective_rank(const RankRecord& record,
                   std::optional<int> fallback_rank = std::nullopt);

double mrr(const std::vector<RankRecord>& records,
           std::optional<int> fallback_rank = std::nullopt);

double hit_at_n(const std::vector<RankRecord>& records, int n,
                std::optional<int> fallback_rank = std::nullopt);

inline constexpr std::array<int, 5> kHitNs{1, 3, 10, 20, 50};

struct MetricsRow {
  std::string label;  // "all", "fold1".., "mean"
  size_t instances = 0;
  double mrr = 0.0;              // 0-100
  std::array<double, 5> hit{};   // Hit@{1,3,10,20,50}, 0-100
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  std::string to_text() const;   // columns: MRR Hit@1 Hit@3 Hit@10 Hit@20 Hit@50
  std::string to_json() const;   // machine-readable report
};

MetricsRow score_records(const std::string& label,
                         const std::vector<RankRecord>& records,
                         std::optional<int> fallback_rank = std::nullopt);

// One prediction-dump line per instance: the gold rank and the top-scored
// candidate mentions (capped at 50 on write).
struct PredictionRecord {
  std::string instance_id;
  std::optional<int> gold_rank;
  std::vector<std::pair<std::string, double>> top;
};

std::string prediction_to_json_line(const PredictionRecord& record);
PredictionRecord prediction_from_json_line(const std::string& line);
void write_predictions(const std::filesystem::path& file,
                       const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& file);

// Join a prediction dump against its dataset instances and score it. Each
// dump line must match exactly one instance (duplicate or unknown ids are
// errors). With a fold map (instance_id -> fold label), emits one row per
// fold plus their unweighted mean; otherwise a single "all" row.
MetricsTable evaluate_run(const std::vector<PredictionRecord>& dump,
                          const std::vector<CGEPInstance>& instances,
                          const std::map<std::string, std::string>& fold_of_instance = {},
                          std::optional<int> fallback_rank = std::nullopt);

}  // namespace cgep
