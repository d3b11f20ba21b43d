#pragma once

// Gated fusion of an event's context-sentence vector (h_c), schema vector
// (h_s), and graph-template token embedding (h_g):
//   g_r = sigmoid(h_c W_r + h_s U_r),  h_r = g_r (.) h_c + (1 - g_r) (.) h_s
//   g_e = sigmoid(h_g W_e + h_r U_e),  h~  = g_e (.) h_g + (1 - g_e) (.) h_r
// Ablation switches reproduce the no-context / no-schema / no-fusion variants.

#include <cstdint>
#include <string>

#include "cgep/autograd.hpp"
#include "cgep/nn.hpp"

namespace cgep {

enum class FusionMode {
  full,        // both gates active
  no_context,  // h_r = h_s
  no_schema,   // h_r = h_c
  none,        // bypass fusion entirely; template tokens stay as embedded
};

inline FusionMode fusion_mode_from_flags(bool no_ctxt, bool no_schm) {
  if (no_ctxt && no_schm) return FusionMode::none;
  if (no_ctxt) return FusionMode::no_context;
  if (no_schm) return FusionMode::no_schema;
  return FusionMode::full;
}

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::full: return "full";
    case FusionMode::no_context: return "no_context";
    case FusionMode::no_schema: return "no_schema";
    case FusionMode::none: return "none";
  }
  return "?";
}

template <typename S>
struct FusionGates {
  Tensor<S> w_r, u_r, w_e, u_e;  // each d_h x d_h

  static FusionGates init(ParamStore<S>& store, int d, uint64_t seed) {
    FusionGates g;
    g.w_r = store.create("fuse.w_r", detail::normal_init<S>(d, d, 0.02,
                                                            derive_seed(seed, "fuse.w_r")));
    g.u_r = store.create("fuse.u_r", detail::normal_init<S>(d, d, 0.02,
                                                            derive_seed(seed, "fuse.u_r")));
    g.w_e = store.create("fuse.w_e", detail::normal_init<S>(d, d, 0.02,
                                                            derive_seed(seed, "fuse.w_e")));
    g.u_e = store.create("fuse.u_e", detail::normal_init<S>(d, d, 0.02,
                                                            derive_seed(seed, "fuse.u_e")));
    return g;
  }
};

namespace detail {
template <typename S>
void check_fusable(const Tensor<S>& a, const Tensor<S>& b, const Tensor<S>& w,
                   const char* op) {
  if (a.cols() != b.cols() || a.rows() != b.rows())
    throw Error(std::string(op) + ": input shapes differ");
  if (w.rows() != a.cols() || w.cols() != a.cols())
    throw Error(std::string(op) + ": gate matrices do not match d_h");
}
}  // namespace detail

// Event enrichment vector from context and schema vectors (rows align 1:1).
template <typename S>
Tensor<S> fuse_semantic(const FusionGates<S>& p, const Tensor<S>& h_c, const Tensor<S>& h_s,
                        FusionMode mode = FusionMode::full) {
  if (mode == FusionMode::no_context) return h_s;
  if (mode == FusionMode::no_schema) return h_c;
  detail::check_fusable(h_c, h_s, p.w_r, "fuse_semantic");
  Tensor<S> gate = sigmoid(add(matmul(h_c, p.w_r), matmul(h_s, p.u_r)));
  return add(hadamard(gate, h_c), hadamard(one_minus(gate), h_s));
}

// Fuses the enrichment vector (one row) into each of the occurrence's token
// embedding rows. mode == none bypasses the gate and returns h_g unchanged.
template <typename S>
Tensor<S> fuse_event(const FusionGates<S>& p, const Tensor<S>& h_g, const Tensor<S>& h_r,
                     FusionMode mode = FusionMode::full) {
  if (mode == FusionMode::none) return h_g;
  Tensor<S> r = h_r.rows() == h_g.rows() ? h_r : repeat_rows(h_r, h_g.rows());
  detail::check_fusable(h_g, r, p.w_e, "fuse_event");
  Tensor<S> gate = sigmoid(add(matmul(h_g, p.w_e), matmul(r, p.u_e)));
  return add(hadamard(gate, h_g), hadamard(one_minus(gate), r));
}

}  // namespace cgep
