#pragma once

// Prediction-side math: supervised contrastive loss over candidate
// representations, masked-token candidate scoring/ranking, cross-entropy
// prediction loss, and the joint objective L = L_p + beta * L_c.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cgep/autograd.hpp"

namespace cgep {

// L_c = -log( exp(z_m . z+ / tau) / sum over {z+} + negatives of exp(z_m . z / tau) ).
// Stable via max-subtracted log-sum-exp inside log_softmax. Empty negative
// set contributes no signal: loss is exactly 0 (and constant).
template <typename S>
Tensor<S> contrastive_loss(const Tensor<S>& z_m, const Tensor<S>& z_pos,
                           const std::vector<Tensor<S>>& z_negs, S tau,
                           bool normalize = false) {
  if (!(tau > S(0))) throw Error("contrastive_loss: temperature must be positive");
  if (z_negs.empty()) return Tensor<S>::constant(Mat<S>::Zero(1, 1));
  Tensor<S> m = normalize ? l2_normalize_row(z_m) : z_m;
  std::vector<Tensor<S>> sims;
  sims.reserve(z_negs.size() + 1);
  S inv_tau = S(1) / tau;
  sims.push_back(scale(dot(m, normalize ? l2_normalize_row(z_pos) : z_pos), inv_tau));
  for (const auto& z : z_negs)
    sims.push_back(scale(dot(m, normalize ? l2_normalize_row(z) : z), inv_tau));
  Tensor<S> logits = concat_cols(sims);          // (1, 1 + n), positive first
  return scale(pick(log_softmax_rows(logits), 0, 0), S(-1));
}

// Mean log-probability of each candidate's subtokens under the vocabulary
// distribution at the mask position. mask_log_probs: (1, V) log-softmax row.
template <typename S>
Tensor<S> candidate_score_row(const Tensor<S>& mask_log_probs,
                              const std::vector<std::vector<int>>& candidate_token_ids) {
  if (mask_log_probs.rows() != 1)
    throw Error("candidate_score_row: expected one log-probability row");
  if (candidate_token_ids.empty())
    throw Error("candidate_score_row: no candidates");
  std::vector<Tensor<S>> scores;
  scores.reserve(candidate_token_ids.size());
  for (size_t c = 0; c < candidate_token_ids.size(); ++c) {
    const auto& ids = candidate_token_ids[c];
    if (ids.empty())
      throw Error("candidate " + std::to_string(c) +
                  ": every subtoken is out of vocabulary");
    Tensor<S> acc = pick(mask_log_probs, 0, ids[0]);
    for (size_t i = 1; i < ids.size(); ++i)
      acc = add(acc, pick(mask_log_probs, 0, ids[i]));
    scores.push_back(scale(acc, S(1) / static_cast<S>(ids.size())));
  }
  return concat_cols(scores);  // (1, k)
}

struct RankedPrediction {
  std::vector<int> order;       // candidate indices, best first
  std::vector<double> scores;   // aligned with the input candidate order
  int gold_rank = 0;            // 1-based position of the gold candidate
};

// Descending by score; ties keep candidate list order (stable).
inline RankedPrediction rank_from_scores(const std::vector<double>& scores, int gold_index) {
  if (scores.empty()) throw Error("rank_from_scores: empty score list");
  if (gold_index < 0 || gold_index >= static_cast<int>(scores.size()))
    throw Error("rank_from_scores: gold index out of range");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error("rank_from_scores: non-finite score");
  RankedPrediction out;
  out.scores = scores;
  out.order.resize(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) out.order[i] = static_cast<int>(i);
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  for (size_t r = 0; r < out.order.size(); ++r)
    if (out.order[r] == gold_index) out.gold_rank = static_cast<int>(r) + 1;
  return out;
}

// Batch-mean cross-entropy over per-instance candidate score rows. Scores
// are normalized by softmax over candidates; the L2 term of the objective is
// the optimizer's weight decay, not part of this value.
template <typename S>
Tensor<S> prediction_loss(const std::vector<Tensor<S>>& score_rows,
                          const std::vector<int>& gold_indices) {
  if (score_rows.empty()) throw Error("prediction_loss: empty batch");
  if (score_rows.size() != gold_indices.size())
    throw Error("prediction_loss: scores/golds size mismatch");
  Tensor<S> total;
  for (size_t i = 0; i < score_rows.size(); ++i) {
    const Tensor<S>& row = score_rows[i];
    if (row.rows() != 1) throw Error("prediction_loss: each score row must be 1xK");
    if (!row.value().allFinite()) throw Error("prediction_loss: non-finite score");
    if (gold_indices[i] < 0 || gold_indices[i] >= row.cols())
      throw Error("prediction_loss: gold index out of range");
    Tensor<S> ce = scale(pick(log_softmax_rows(row), 0, gold_indices[i]), S(-1));
    total = total.defined() ? add(total, ce) : ce;
  }
  return scale(total, S(1) / static_cast<S>(score_rows.size()));
}

// L = L_p + beta * L_c. beta = 0 returns L_p itself so the no-contrast
// ablation is bit-identical to never computing L_c.
template <typename S>
Tensor<S> total_loss(const Tensor<S>& l_p, const Tensor<S>& l_c, S beta) {
  if (beta < S(0)) throw Error("total_loss: beta must be non-negative");
  if (beta == S(0)) return l_p;
  return add(l_p, scale(l_c, beta));
}

}  // namespace cgep
