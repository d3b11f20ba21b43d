#pragma once

// Full event-prediction model: one masked-LM backend encodes the linearized
// graph template (its event-token embeddings enriched by gated fusion of
// per-event context and schema encodings from two further backends), and the
// mask hidden state drives both candidate ranking (vocabulary head) and the
// contrastive objective (candidate representations).

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cgep/autograd.hpp"
#include "cgep/fusion.hpp"
#include "cgep/graph.hpp"
#include "cgep/linearize.hpp"
#include "cgep/nn.hpp"
#include "cgep/predict.hpp"
#include "cgep/tokenizer.hpp"

namespace cgep {

struct ModelOptions {
  int max_tokens = 200;
  FusionMode fusion = FusionMode::full;
  bool random_order = false;           // ablation: ignore distances
  bool normalize_contrast = false;     // L2-normalize vectors before the dot
  bool mention_only_candidates = false;
  int contrast_negatives = 0;          // 0 = use all k-1 candidates
  bool freeze_ecg = false;
  bool freeze_ctxt = false;
  bool freeze_schm = false;
  double tau = 1.0;
  double beta = 0.5;
  uint64_t seed = 0;
};

template <typename S>
class SedgplModel {
 public:
  // base_cfg.name is ignored; the three backends get fixed names and
  // separately derived init seeds (same architecture, independent weights).
  SedgplModel(const Tokenizer& tokenizer, BackendConfig base_cfg, ModelOptions opt)
      : tok_(tokenizer),
        opt_(opt),
        ecg_(named(base_cfg, "ecg")),
        ctxt_(named(base_cfg, "ctxt")),
        schm_(named(base_cfg, "schm")),
        gates_(FusionGates<S>::init(gate_params_, base_cfg.hidden_size,
                                    derive_seed(base_cfg.init_seed, "fuse"))) {
    if (opt_.freeze_ecg) ecg_.set_trainable(false);
    if (opt_.freeze_ctxt) ctxt_.set_trainable(false);
    if (opt_.freeze_schm) schm_.set_trainable(false);
  }

  const ModelOptions& options() const { return opt_; }
  const Tokenizer& tokenizer() const { return tok_; }
  MaskedLmBackend<S>& ecg_backend() { return ecg_; }
  MaskedLmBackend<S>& context_backend() { return ctxt_; }
  MaskedLmBackend<S>& schema_backend() { return schm_; }
  FusionGates<S>& gates() { return gates_; }

  // Every named parameter (checkpoint granularity).
  std::vector<std::pair<std::string, Tensor<S>>> all_params() {
    std::vector<std::pair<std::string, Tensor<S>>> out;
    for (auto* store : {&ecg_.params(), &ctxt_.params(), &schm_.params(), &gate_params_})
      for (auto& [n, t] : store->entries()) out.emplace_back(n, t);
    return out;
  }

  std::vector<Tensor<S>> trainable_params() {
    std::vector<Tensor<S>> out;
    for (auto& [n, t] : all_params())
      if (t.requires_grad()) out.push_back(t);
    return out;
  }

  void zero_grad() {
    for (auto& [n, t] : all_params()) t.clear_grad();
  }

  struct Encoded {
    GraphPromptTemplate mention_tpl;
    Tensor<S> hidden;  // (L, d_h)
    Tensor<S> z_m;     // (1, d_h) hidden state at the mask position
  };

  // Linearize, fuse event-token embeddings, and run the graph encoder.
  Encoded encode_instance(const CGEPInstance& inst) {
    Encoded out;
    out.mention_tpl =
        opt_.random_order
            ? linearize_random_order(inst.graph, inst.anchor_id, opt_.max_tokens, tok_,
                                     derive_seed(opt_.seed, inst.instance_id + "#order"))
            : linearize(inst.graph, inst.anchor_id, opt_.max_tokens, tok_);
    const GraphPromptTemplate& tpl = out.mention_tpl;

    Tensor<S> tok_rows = ecg_.token_embeddings(tpl.token_ids);
    if (opt_.fusion != FusionMode::none)
      tok_rows = fused_token_rows(inst, tpl, tok_rows);

    Tensor<S> h = ecg_.compose_from(tok_rows, segment_ids_for(tpl, ecg_));
    out.hidden = ecg_.encode_from_embeddings(h);
    out.z_m = gather_rows(out.hidden, {tpl.mask_pos});
    return out;
  }

  // Context vector h_c of one graph node: the context backend over the
  // node's leakage-masked sentence, mean-pooled at its mention subtokens.
  Tensor<S> encode_context(const Event& node) {
    return pooled_encoding(ctxt_, node.context_text(), node.context_mention_span(),
                           "encode_context: mention positions unresolvable for event " +
                               node.event_id);
  }

  // Candidate representation z_c: the graph backend over the candidate's
  // leakage-masked sentence (or bare mention), mean-pooled at the mention's
  // subtoken positions.
  Tensor<S> candidate_repr(const CandidateEvent& cand) {
    if (cand.mention.empty()) throw Error("candidate_repr: empty mention");
    std::string text;
    Span span;
    if (opt_.mention_only_candidates) {
      text = cand.mention;
      span = {0, static_cast<int>(cand.mention.size())};
    } else {
      text = cand.sentence;
      span = cand.mention_span;
      if (span.end <= span.start ||
          span.end > static_cast<int>(text.size()) ||
          text.substr(span.start, span.length()) != cand.mention) {
        auto at = text.find(cand.mention);
        if (at == std::string::npos)
          throw Error("candidate_repr: mention '" + cand.mention +
                      "' not locatable in its sentence");
        span = {static_cast<int>(at), static_cast<int>(at + cand.mention.size())};
      }
    }
    return pooled_encoding(ecg_, text, span,
                           "candidate_repr: no subtoken positions for mention '" +
                               cand.mention + "'");
  }

  // Vocabulary token ids of a candidate mention for mask-slot scoring;
  // unknown-token ids are dropped, and a mention with nothing left is an error.
  std::vector<int> mention_score_ids(const CandidateEvent& cand) const {
    if (cand.mention.empty()) throw Error("mention_score_ids: empty mention");
    std::vector<int> ids;
    for (int id : tok_.encode(cand.mention).ids)
      if (id != tok_.unk_id()) ids.push_back(id);
    if (ids.empty())
      throw Error("candidate '" + cand.mention + "': every subtoken is out of vocabulary");
    return ids;
  }

  struct Forward {
    Encoded enc;
    Tensor<S> score_row;  // (1, k) candidate scores (mean subtoken log-prob)
    int gold_index = -1;
    Tensor<S> contrast;   // (1,1); undefined when contrast was skipped
  };

  Forward forward(const CGEPInstance& inst, bool with_contrast) {
    Forward f;
    f.enc = encode_instance(inst);
    f.gold_index = gold_index_of(inst);

    std::vector<std::vector<int>> cand_ids;
    cand_ids.reserve(inst.candidates.size());
    for (const auto& c : inst.candidates) cand_ids.push_back(mention_score_ids(c));
    Tensor<S> log_probs = log_softmax_rows(ecg_.vocab_logits(f.enc.z_m));
    f.score_row = candidate_score_row(log_probs, cand_ids);

    if (with_contrast) {
      Tensor<S> z_pos = candidate_repr(inst.gold);
      std::vector<Tensor<S>> z_negs;
      for (size_t i : contrast_negative_indices(inst))
        z_negs.push_back(candidate_repr(inst.candidates[i]));
      f.contrast = contrastive_loss(f.enc.z_m, z_pos, z_negs, static_cast<S>(opt_.tau),
                                    opt_.normalize_contrast);
    }
    return f;
  }

  // Inference-only ranking of an instance's candidates.
  RankedPrediction rank(const CGEPInstance& inst) {
    NoGrad guard;
    Forward f = forward(inst, false);
    std::vector<double> scores(static_cast<size_t>(f.score_row.cols()));
    for (long c = 0; c < f.score_row.cols(); ++c)
      scores[static_cast<size_t>(c)] = static_cast<double>(f.score_row.value()(0, c));
    return rank_from_scores(scores, f.gold_index);
  }

  int gold_index_of(const CGEPInstance& inst) const {
    for (size_t i = 0; i < inst.candidates.size(); ++i)
      if (inst.candidates[i] == inst.gold) return static_cast<int>(i);
    throw Error("instance " + inst.instance_id + ": gold missing from candidates");
  }

  // Segment-id scheme: triple segments keep their index up to the table edge
  // (min(i, max_segments-1)); the prompt segment has its own dedicated id.
  static std::vector<int> segment_ids_for(const GraphPromptTemplate& tpl,
                                          const MaskedLmBackend<S>& backend) {
    int cap = backend.config().max_segments - 1;
    int prompt_id = backend.config().max_segments;
    std::vector<int> out;
    out.reserve(tpl.token_layout.size());
    for (const auto& layout : tpl.token_layout)
      out.push_back(layout.segment == tpl.prompt_segment ? prompt_id
                                                         : std::min(layout.segment, cap));
    return out;
  }

 private:
  BackendConfig named(BackendConfig cfg, const char* name) {
    cfg.name = name;
    cfg.init_seed = derive_seed(cfg.init_seed, name);
    return cfg;
  }

  // [CLS] text [SEP] through `backend`, mean-pooled over the tokens covering
  // [span.start, span.end) of text.
  Tensor<S> pooled_encoding(MaskedLmBackend<S>& backend, const std::string& text,
                            const Span& span, const std::string& empty_error) {
    Tokenized t = tok_.encode(text);
    std::vector<int> inner = tok_.positions_in_span(t, span.start, span.end);
    if (inner.empty()) throw Error(empty_error);
    std::vector<int> ids;
    ids.reserve(t.ids.size() + 2);
    ids.push_back(tok_.cls_id());
    ids.insert(ids.end(), t.ids.begin(), t.ids.end());
    ids.push_back(tok_.sep_id());
    std::vector<int> segs(ids.size(), 0);
    Tensor<S> hidden = backend.encode(ids, segs);
    std::vector<int> pooled;
    pooled.reserve(inner.size());
    for (int p : inner) pooled.push_back(p + 1);  // offset for [CLS]
    return mean_rows(hidden, pooled);
  }

  // Replace event-token embedding rows with gate-fused enrichments, one
  // occurrence at a time (every occurrence of a repeated event is fused).
  Tensor<S> fused_token_rows(const CGEPInstance& inst, const GraphPromptTemplate& tpl,
                             Tensor<S> tok_rows) {
    GraphPromptTemplate schema = schema_template(tpl, inst.graph, inst.anchor_id, tok_);
    if (schema.occurrences.size() != tpl.occurrences.size())
      throw Error("schema/mention template alignment mismatch for instance " +
                  inst.instance_id);
    Tensor<S> schema_hidden =
        schm_.encode(schema.token_ids, segment_ids_for(schema, schm_));

    std::unordered_map<std::string, Tensor<S>> context_cache;
    for (size_t i = 0; i < tpl.occurrences.size(); ++i) {
      const EventOccurrence& occ = tpl.occurrences[i];
      const EventOccurrence& socc = schema.occurrences[i];
      if (occ.event_id != socc.event_id || occ.segment != socc.segment)
        throw Error("schema/mention occurrence mismatch for instance " + inst.instance_id);

      auto it = context_cache.find(occ.event_id);
      if (it == context_cache.end())
        it = context_cache.emplace(occ.event_id, encode_context(inst.graph.node(occ.event_id)))
                 .first;
      Tensor<S> h_c = it->second;
      Tensor<S> h_s = mean_rows(schema_hidden, socc.positions);
      Tensor<S> h_r = fuse_semantic(gates_, h_c, h_s, opt_.fusion);
      Tensor<S> h_g = gather_rows(tok_rows, occ.positions);
      Tensor<S> fused = fuse_event(gates_, h_g, h_r, opt_.fusion);
      tok_rows = scatter_rows_replace(tok_rows, occ.positions, fused);
    }
    return tok_rows;
  }

  // Indices of the contrast negatives: all non-gold candidates, or a seeded
  // subsample when the configuration caps them.
  std::vector<size_t> contrast_negative_indices(const CGEPInstance& inst) {
    int gold = gold_index_of(inst);
    std::vector<size_t> all;
    for (size_t i = 0; i < inst.candidates.size(); ++i)
      if (static_cast<int>(i) != gold) all.push_back(i);
    if (opt_.contrast_negatives <= 0 ||
        all.size() <= static_cast<size_t>(opt_.contrast_negatives))
      return all;
    DetRng rng(derive_seed(opt_.seed, inst.instance_id + "#negs"));
    auto picks = rng.sample_indices(all.size(), static_cast<size_t>(opt_.contrast_negatives));
    std::vector<size_t> out;
    out.reserve(picks.size());
    for (size_t p : picks) out.push_back(all[p]);
    return out;
  }

  const Tokenizer& tok_;
  ModelOptions opt_;
  MaskedLmBackend<S> ecg_, ctxt_, schm_;
  ParamStore<S> gate_params_;
  FusionGates<S> gates_;
};

}  // namespace cgep
