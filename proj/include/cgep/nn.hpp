#pragma once

// Masked-LM encoder backend: embedding composition (token + segment +
// position), a post-LN transformer stack, and an untied vocabulary head.
// Profile-agnostic: the toy profile (2 layers, d_h 64, char vocab, random
// init) drives CPU tests; the pretrained profile (12 layers, d_h 768) is the
// same code with bigger tables and weights loaded from a checkpoint.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cgep/autograd.hpp"
#include "cgep/util.hpp"

namespace cgep {

struct BackendConfig {
  std::string name;       // parameter name prefix, e.g. "ecg"
  int vocab_size = 0;
  int hidden_size = 64;   // d_h
  int layers = 2;
  int heads = 4;
  int ff_size = 128;
  int max_positions = 512;
  int max_segments = 16;  // triple segments clamp to max_segments-1; the
                          // prompt segment gets the extra id max_segments
  uint64_t init_seed = 0;
};

inline BackendConfig toy_backend_config(std::string name, int vocab_size, uint64_t seed) {
  BackendConfig c;
  c.name = std::move(name);
  c.vocab_size = vocab_size;
  c.init_seed = seed;
  return c;
}

inline BackendConfig pretrained_backend_config(std::string name, int vocab_size,
                                               uint64_t seed) {
  BackendConfig c;
  c.name = std::move(name);
  c.vocab_size = vocab_size;
  c.hidden_size = 768;
  c.layers = 12;
  c.heads = 12;
  c.ff_size = 3072;
  c.init_seed = seed;
  return c;
}

// Named parameter registry; iteration order is creation order.
template <typename S>
class ParamStore {
 public:
  Tensor<S> create(const std::string& name, Mat<S> init) {
    if (find(name)) throw Error("parameter '" + name + "' already exists");
    entries_.emplace_back(name, Tensor<S>::param(std::move(init)));
    return entries_.back().second;
  }
  Tensor<S>* find(const std::string& name) {
    for (auto& [n, t] : entries_)
      if (n == name) return &t;
    return nullptr;
  }
  std::vector<std::pair<std::string, Tensor<S>>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Tensor<S>>>& entries() const { return entries_; }
  void zero_grad() {
    for (auto& [n, t] : entries_) t.clear_grad();
  }
  size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor<S>>> entries_;
};

namespace detail {

template <typename S>
Mat<S> normal_init(long rows, long cols, double stddev, uint64_t seed) {
  DetRng rng(seed);
  Mat<S> m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = static_cast<S>(rng.normal() * stddev);
  return m;
}

}  // namespace detail

template <typename S>
class MaskedLmBackend {
 public:
  explicit MaskedLmBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.vocab_size <= 0) throw Error("backend '" + cfg_.name + "': empty vocabulary");
    if (cfg_.hidden_size % cfg_.heads != 0)
      throw Error("backend '" + cfg_.name + "': hidden size not divisible by head count");
    long d = cfg_.hidden_size;
    tok_emb_ = init_normal("tok_emb", cfg_.vocab_size, d);
    seg_emb_ = init_normal("seg_emb", cfg_.max_segments + 1, d);
    pos_emb_ = init_normal("pos_emb", cfg_.max_positions, d);
    emb_ln_g_ = init_const("emb_ln.g", 1, d, S(1));
    emb_ln_b_ = init_const("emb_ln.b", 1, d, S(0));
    layers_.resize(cfg_.layers);
    for (int i = 0; i < cfg_.layers; ++i) {
      std::string p = "layer" + std::to_string(i) + ".";
      Layer& L = layers_[i];
      L.wq = init_normal(p + "attn.wq", d, d);
      L.bq = init_const(p + "attn.bq", 1, d, S(0));
      L.wk = init_normal(p + "attn.wk", d, d);
      L.bk = init_const(p + "attn.bk", 1, d, S(0));
      L.wv = init_normal(p + "attn.wv", d, d);
      L.bv = init_const(p + "attn.bv", 1, d, S(0));
      L.wo = init_normal(p + "attn.wo", d, d);
      L.bo = init_const(p + "attn.bo", 1, d, S(0));
      L.ln1_g = init_const(p + "ln1.g", 1, d, S(1));
      L.ln1_b = init_const(p + "ln1.b", 1, d, S(0));
      L.w1 = init_normal(p + "ff.w1", d, cfg_.ff_size);
      L.b1 = init_const(p + "ff.b1", 1, cfg_.ff_size, S(0));
      L.w2 = init_normal(p + "ff.w2", cfg_.ff_size, d);
      L.b2 = init_const(p + "ff.b2", 1, d, S(0));
      L.ln2_g = init_const(p + "ln2.g", 1, d, S(1));
      L.ln2_b = init_const(p + "ln2.b", 1, d, S(0));
    }
    head_w_ = init_normal("vocab_head.w", cfg_.vocab_size, d);
    head_b_ = init_const("vocab_head.b", 1, cfg_.vocab_size, S(0));
  }

  const BackendConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }

  // Highest legal segment id (the prompt's own id).
  int prompt_segment_id() const { return cfg_.max_segments; }

  // Token + segment + position embedding sum; no normalization yet so the
  // additive identities hold exactly.
  Tensor<S> compose_input(const std::vector<int>& token_ids,
                          const std::vector<int>& segment_ids) {
    return compose_from(token_embeddings(token_ids), segment_ids);
  }

  Tensor<S> token_embeddings(const std::vector<int>& token_ids) {
    for (int id : token_ids)
      if (id < 0 || id >= cfg_.vocab_size)
        throw Error("backend '" + cfg_.name + "': token id " + std::to_string(id) +
                    " outside vocabulary of " + std::to_string(cfg_.vocab_size));
    return gather_rows(tok_emb_, token_ids);
  }

  // Adds segment and position embeddings to per-position token rows (which
  // may have been fused upstream).
  Tensor<S> compose_from(const Tensor<S>& token_rows, const std::vector<int>& segment_ids) {
    long n = token_rows.rows();
    if (static_cast<long>(segment_ids.size()) != n)
      throw Error("backend '" + cfg_.name + "': segment ids do not cover the sequence");
    if (n > cfg_.max_positions)
      throw Error("backend '" + cfg_.name + "': sequence length " + std::to_string(n) +
                  " exceeds " + std::to_string(cfg_.max_positions) +
                  " positions (the linearizer should have truncated)");
    for (int s : segment_ids)
      if (s < 0 || s > cfg_.max_segments)
        throw Error("backend '" + cfg_.name + "': segment id " + std::to_string(s) +
                    " outside table of " + std::to_string(cfg_.max_segments + 1));
    std::vector<int> positions(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) positions[static_cast<size_t>(i)] = static_cast<int>(i);
    return add(add(token_rows, gather_rows(seg_emb_, segment_ids)),
               gather_rows(pos_emb_, positions));
  }

  // Embedding layer norm plus the transformer stack; one hidden row per token.
  Tensor<S> encode_from_embeddings(Tensor<S> h) {
    Tensor<S> x = layer_norm_rows(h, emb_ln_g_, emb_ln_b_);
    for (Layer& L : layers_) {
      x = layer_norm_rows(add(x, attention(L, x)), L.ln1_g, L.ln1_b);
      Tensor<S> ff = add_rowvec(
          matmul(gelu(add_rowvec(matmul(x, L.w1), L.b1)), L.w2), L.b2);
      x = layer_norm_rows(add(x, ff), L.ln2_g, L.ln2_b);
    }
    return x;
  }

  Tensor<S> encode(const std::vector<int>& token_ids, const std::vector<int>& segment_ids) {
    return encode_from_embeddings(compose_input(token_ids, segment_ids));
  }

  // (n, d_h) hidden rows -> (n, vocab) logits.
  Tensor<S> vocab_logits(const Tensor<S>& hidden_rows) {
    return add_rowvec(matmul(hidden_rows, head_w_, false, true), head_b_);
  }

  // Enables/disables gradient tracking for every parameter of this backend.
  void set_trainable(bool trainable) {
    for (auto& [n, t] : params_.entries()) t.node()->requires_grad = trainable;
  }

 private:
  struct Layer {
    Tensor<S> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<S> ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };

  Tensor<S> init_normal(const std::string& suffix, long rows, long cols) {
    std::string name = cfg_.name + "." + suffix;
    return params_.create(
        name, detail::normal_init<S>(rows, cols, 0.02, derive_seed(cfg_.init_seed, name)));
  }
  Tensor<S> init_const(const std::string& suffix, long rows, long cols, S v) {
    return params_.create(cfg_.name + "." + suffix, Mat<S>::Constant(rows, cols, v));
  }

  Tensor<S> attention(Layer& L, const Tensor<S>& x) {
    Tensor<S> q = add_rowvec(matmul(x, L.wq), L.bq);
    Tensor<S> k = add_rowvec(matmul(x, L.wk), L.bk);
    Tensor<S> v = add_rowvec(matmul(x, L.wv), L.bv);
    long hd = cfg_.hidden_size / cfg_.heads;
    S inv_sqrt = S(1) / static_cast<S>(std::sqrt(static_cast<double>(hd)));
    std::vector<Tensor<S>> heads;
    heads.reserve(static_cast<size_t>(cfg_.heads));
    for (int h = 0; h < cfg_.heads; ++h) {
      Tensor<S> qh = slice_cols(q, h * hd, hd);
      Tensor<S> kh = slice_cols(k, h * hd, hd);
      Tensor<S> vh = slice_cols(v, h * hd, hd);
      Tensor<S> attn = softmax_rows(scale(matmul(qh, kh, false, true), inv_sqrt));
      heads.push_back(matmul(attn, vh));
    }
    return add_rowvec(matmul(concat_cols(heads), L.wo), L.bo);
  }

  BackendConfig cfg_;
  ParamStore<S> params_;
  Tensor<S> tok_emb_, seg_emb_, pos_emb_, emb_ln_g_, emb_ln_b_;
  std::vector<Layer> layers_;
  Tensor<S> head_w_, head_b_;
};

// Decoupled-weight-decay Adam over a fixed parameter list. The L2
// regularization term of the objective is realized here as weight decay.
template <typename S>
class AdamW {
 public:
  struct Hyper {
    S lr = S(5e-6);
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S eps = S(1e-8);
    S weight_decay = S(0.01);
  };

  AdamW(std::vector<Tensor<S>> params, Hyper h) : params_(std::move(params)), h_(h) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
      v_.push_back(Mat<S>::Zero(p.rows(), p.cols()));
    }
  }

  void step() {
    ++t_;
    S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(h_.beta1), t_));
    S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(h_.beta2), t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor<S>& p = params_[i];
      if (!p.has_grad()) continue;  // parameter untouched this step
      const Mat<S>& g = p.grad();
      m_[i] = h_.beta1 * m_[i] + (S(1) - h_.beta1) * g;
      v_[i].array() = h_.beta2 * v_[i].array() + (S(1) - h_.beta2) * g.array().square();
      Mat<S> mhat = m_[i] / bc1;
      Mat<S> vhat = v_[i] / bc2;
      p.value().array() -=
          h_.lr * (mhat.array() / (vhat.array().sqrt() + h_.eps) +
                   h_.weight_decay * p.value().array());
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.clear_grad();
  }

  long step_count() const { return t_; }

 private:
  std::vector<Tensor<S>> params_;
  std::vector<Mat<S>> m_, v_;
  long t_ = 0;
  Hyper h_;
};

}  // namespace cgep
