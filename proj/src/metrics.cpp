#include "cgep/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cgep/util.hpp"

namespace cgep {

using nlohmann::json;

int effective_rank(const RankRecord& record, std::optional<int> fallback_rank) {
  if (record.gold_rank) {
    int r = *record.gold_rank;
    if (r < 1) throw Error("rank record " + record.instance_id + ": gold rank must be >= 1");
    if (record.candidate_count > 0 && r > record.candidate_count)
      throw Error("rank record " + record.instance_id + ": gold rank " + std::to_string(r) +
                  " exceeds candidate count " + std::to_string(record.candidate_count));
    return r;
  }
  int fb = fallback_rank.value_or(record.candidate_count);
  if (fb < 1)
    throw Error("rank record " + record.instance_id + ": no usable fallback rank");
  return fb;
}

double mrr(const std::vector<RankRecord>& records, std::optional<int> fallback_rank) {
  if (records.empty()) throw Error("mrr: empty record list");
  double sum = 0.0;
  for (const auto& r : records) sum += 1.0 / effective_rank(r, fallback_rank);
  return sum / static_cast<double>(records.size());
}

double hit_at_n(const std::vector<RankRecord>& records, int n,
                std::optional<int> fallback_rank) {
  if (records.empty()) throw Error("hit_at_n: empty record list");
  if (n < 1) throw Error("hit_at_n: n must be >= 1");
  size_t hits = 0;
  for (const auto& r : records)
    if (effective_rank(r, fallback_rank) <= n) ++hits;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

MetricsRow score_records(const std::string& label, const std::vector<RankRecord>& records,
                         std::optional<int> fallback_rank) {
  MetricsRow row;
  row.label = label;
  row.instances = records.size();
  row.mrr = 100.0 * mrr(records, fallback_rank);
  for (size_t i = 0; i < kHitNs.size(); ++i)
    row.hit[i] = 100.0 * hit_at_n(records, kHitNs[i], fallback_rank);
  return row;
}

std::string MetricsTable::to_text() const {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-8s %10s %6s", "", "instances", "MRR");
  out << buf;
  for (int n : kHitNs) {
    std::snprintf(buf, sizeof(buf), " %8s", ("Hit@" + std::to_string(n)).c_str());
    out << buf;
  }
  out << '\n';
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %10zu %6.2f", row.label.c_str(), row.instances,
                  row.mrr);
    out << buf;
    for (double h : row.hit) {
      std::snprintf(buf, sizeof(buf), " %8.2f", h);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string MetricsTable::to_json() const {
  json j = json::array();
  for (const auto& row : rows) {
    json r{{"label", row.label},
           {"instances", row.instances},
           {"mrr", row.mrr}};
    for (size_t i = 0; i < kHitNs.size(); ++i)
      r["hit@" + std::to_string(kHitNs[i])] = row.hit[i];
    j.push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::string prediction_to_json_line(const PredictionRecord& record) {
  json j;
  j["instance_id"] = record.instance_id;
  if (record.gold_rank)
    j["gold_rank"] = *record.gold_rank;
  else
    j["gold_rank"] = nullptr;
  json top = json::array();
  size_t cap = std::min<size_t>(record.top.size(), 50);
  for (size_t i = 0; i < cap; ++i)
    top.push_back(json{{"mention", record.top[i].first}, {"score", record.top[i].second}});
  j["top"] = std::move(top);
  return j.dump();
}

PredictionRecord prediction_from_json_line(const std::string& line) {
  json j = json::parse(line);
  PredictionRecord out;
  out.instance_id = j.at("instance_id").get<std::string>();
  if (out.instance_id.empty()) throw Error("prediction line: empty instance_id");
  if (j.contains("gold_rank") && !j["gold_rank"].is_null())
    out.gold_rank = j["gold_rank"].get<int>();
  for (const auto& t : j.at("top"))
    out.top.emplace_back(t.at("mention").get<std::string>(), t.at("score").get<double>());
  return out;
}

void write_predictions(const std::filesystem::path& file,
                       const std::vector<PredictionRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << prediction_to_json_line(r) << '\n';
  write_file(file, out.str());
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open prediction dump " + file.string());
  std::vector<PredictionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(prediction_from_json_line(line));
  }
  return out;
}

MetricsTable evaluate_run(const std::vector<PredictionRecord>& dump,
                          const std::vector<CGEPInstance>& instances,
                          const std::map<std::string, std::string>& fold_of_instance,
                          std::optional<int> fallback_rank) {
  if (dump.empty()) throw Error("evaluate_run: empty prediction dump");
  std::unordered_map<std::string, const CGEPInstance*> by_id;
  for (const auto& inst : instances) by_id.emplace(inst.instance_id, &inst);

  std::set<std::string> seen;
  std::map<std::string, std::vector<RankRecord>> grouped;
  for (const auto& p : dump) {
    if (!seen.insert(p.instance_id).second)
      throw Error("evaluate_run: duplicate instance_id " + p.instance_id);
    auto it = by_id.find(p.instance_id);
    if (it == by_id.end())
      throw Error("evaluate_run: unknown instance_id " + p.instance_id);
    RankRecord rec;
    rec.instance_id = p.instance_id;
    rec.gold_rank = p.gold_rank;
    rec.candidate_count = static_cast<int>(it->second->candidates.size());
    std::string group = "all";
    if (!fold_of_instance.empty()) {
      auto fit = fold_of_instance.find(p.instance_id);
      if (fit == fold_of_instance.end())
        throw Error("evaluate_run: instance " + p.instance_id + " missing from fold map");
      group = fit->second;
    }
    grouped[group].push_back(std::move(rec));
  }

  MetricsTable table;
  for (const auto& [label, records] : grouped)
    table.rows.push_back(score_records(label, records, fallback_rank));

  if (table.rows.size() > 1) {
    MetricsRow mean;
    mean.label = "mean";
    for (const auto& row : table.rows) {
      mean.instances += row.instances;
      mean.mrr += row.mrr;
      for (size_t i = 0; i < mean.hit.size(); ++i) mean.hit[i] += row.hit[i];
    }
    double k = static_cast<double>(table.rows.size());
    mean.mrr /= k;
    for (auto& h : mean.hit) h /= k;
    table.rows.push_back(std::move(mean));
  }
  return table;
}

}  // namespace cgep
