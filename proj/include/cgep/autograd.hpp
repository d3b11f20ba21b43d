#pragma once

// Minimal reverse-mode autodiff over dense Eigen matrices. Every value is a
// 2-D matrix (scalars are 1x1); ops record a backward closure and the tape is
// replayed in reverse topological order. Templated on the scalar type so the
// same model code runs in float for training and double for numeric checks.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cgep/util.hpp"

namespace cgep {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

// RAII switch that disables tape construction (inference paths).
struct NoGrad {
  bool prev;
  NoGrad() : prev(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGrad() { detail::grad_mode() = prev; }
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;
};

template <typename S>
struct TensorNode {
  Mat<S> value;
  Mat<S> grad;
  bool requires_grad = false;
  bool grad_alloc = false;
  std::vector<std::shared_ptr<TensorNode<S>>> parents;
  std::function<void()> backward;

  void ensure_grad() {
    if (!grad_alloc) {
      grad = Mat<S>::Zero(value.rows(), value.cols());
      grad_alloc = true;
    }
  }
  void clear_grad() { grad_alloc = false; }
};

template <typename S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode<S>> n) : node_(std::move(n)) {}

  static Tensor constant(Mat<S> v) {
    auto n = std::make_shared<TensorNode<S>>();
    n->value = std::move(v);
    return Tensor(n);
  }
  static Tensor param(Mat<S> v) {
    auto n = std::make_shared<TensorNode<S>>();
    n->value = std::move(v);
    n->requires_grad = true;
    return Tensor(n);
  }

  bool defined() const { return node_ != nullptr; }
  const Mat<S>& value() const { return node_->value; }
  Mat<S>& value() { return node_->value; }
  const Mat<S>& grad() const {
    if (!node_->grad_alloc)
      throw Error("tensor gradient was never populated; run backward first");
    return node_->grad;
  }
  bool has_grad() const { return node_ && node_->grad_alloc; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void clear_grad() { node_->clear_grad(); }
  long rows() const { return node_->value.rows(); }
  long cols() const { return node_->value.cols(); }
  S scalar() const {
    if (rows() != 1 || cols() != 1) throw Error("scalar() on a non-1x1 tensor");
    return node_->value(0, 0);
  }
  std::shared_ptr<TensorNode<S>> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<S>> node_;
};

namespace detail {

template <typename S>
Tensor<S> make_op(Mat<S> value, std::vector<Tensor<S>> parents,
                  std::function<void(TensorNode<S>*)> bw) {
  auto n = std::make_shared<TensorNode<S>>();
  n->value = std::move(value);
  bool need = false;
  for (const auto& p : parents) need = need || p.node()->requires_grad;
  if (need && grad_mode()) {
    n->requires_grad = true;
    for (auto& p : parents) n->parents.push_back(p.node());
    TensorNode<S>* raw = n.get();
    n->backward = [raw, bw = std::move(bw)] { bw(raw); };
  }
  return Tensor<S>(n);
}

template <typename S>
void accumulate(TensorNode<S>* p, const Mat<S>& g) {
  if (!p->requires_grad) return;
  p->ensure_grad();
  p->grad += g;
}

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                std::to_string(b.cols()) + ")");
}

}  // namespace detail

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "add");
  return detail::make_op<S>(a.value() + b.value(), {a, b}, [](TensorNode<S>* n) {
    detail::accumulate(n->parents[0].get(), n->grad);
    detail::accumulate(n->parents[1].get(), n->grad);
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "sub");
  return detail::make_op<S>(a.value() - b.value(), {a, b}, [](TensorNode<S>* n) {
    detail::accumulate(n->parents[0].get(), n->grad);
    detail::accumulate<S>(n->parents[1].get(), -n->grad);
  });
}

// Broadcast a 1xD row vector over every row of an LxD matrix.
template <typename S>
Tensor<S> add_rowvec(const Tensor<S>& m, const Tensor<S>& row) {
  if (row.rows() != 1 || row.cols() != m.cols())
    throw Error("add_rowvec: expected 1x" + std::to_string(m.cols()) + " row vector");
  Mat<S> out = m.value();
  out.rowwise() += row.value().row(0);
  return detail::make_op<S>(std::move(out), {m, row}, [](TensorNode<S>* n) {
    detail::accumulate(n->parents[0].get(), n->grad);
    detail::accumulate<S>(n->parents[1].get(), n->grad.colwise().sum());
  });
}

template <typename S>
Tensor<S> hadamard(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "hadamard");
  return detail::make_op<S>(a.value().cwiseProduct(b.value()), {a, b}, [](TensorNode<S>* n) {
    detail::accumulate<S>(n->parents[0].get(),
                          n->grad.cwiseProduct(n->parents[1]->value));
    detail::accumulate<S>(n->parents[1].get(),
                          n->grad.cwiseProduct(n->parents[0]->value));
  });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S k) {
  return detail::make_op<S>(a.value() * k, {a}, [k](TensorNode<S>* n) {
    detail::accumulate<S>(n->parents[0].get(), n->grad * k);
  });
}

template <typename S>
Tensor<S> one_minus(const Tensor<S>& a) {
  Mat<S> out = Mat<S>::Ones(a.rows(), a.cols()) - a.value();
  return detail::make_op<S>(std::move(out), {a}, [](TensorNode<S>* n) {
    detail::accumulate<S>(n->parents[0].get(), -n->grad);
  });
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b, bool trans_a = false,
                 bool trans_b = false) {
  long ar = trans_a ? a.cols() : a.rows();
  long ac = trans_a ? a.rows() : a.cols();
  long br = trans_b ? b.cols() : b.rows();
  long bc = trans_b ? b.rows() : b.cols();
  if (ac != br)
    throw Error("matmul: inner dimensions differ (" + std::to_string(ac) + " vs " +
                std::to_string(br) + ")");
  Mat<S> out(ar, bc);
  if (!trans_a && !trans_b) out = a.value() * b.value();
  else if (trans_a && !trans_b) out = a.value().transpose() * b.value();
  else if (!trans_a && trans_b) out = a.value() * b.value().transpose();
  else out = a.value().transpose() * b.value().transpose();
  return detail::make_op<S>(std::move(out), {a, b}, [trans_a, trans_b](TensorNode<S>* n) {
    const Mat<S>& av = n->parents[0]->value;
    const Mat<S>& bv = n->parents[1]->value;
    const Mat<S>& g = n->grad;
    if (n->parents[0]->requires_grad) {
      Mat<S> da;
      if (!trans_a) da = trans_b ? Mat<S>(g * bv) : Mat<S>(g * bv.transpose());
      else da = trans_b ? Mat<S>(bv.transpose() * g.transpose()) : Mat<S>(bv * g.transpose());
      detail::accumulate(n->parents[0].get(), da);
    }
    if (n->parents[1]->requires_grad) {
      Mat<S> db;
      if (!trans_b) db = trans_a ? Mat<S>(av * g) : Mat<S>(av.transpose() * g);
      else db = trans_a ? Mat<S>(g.transpose() * av.transpose()) : Mat<S>(g.transpose() * av);
      detail::accumulate(n->parents[1].get(), db);
    }
  });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  Mat<S> y = a.value().unaryExpr([](S x) { return S(1) / (S(1) + std::exp(-x)); });
  return detail::make_op<S>(y, {a}, [y](TensorNode<S>* n) {
    Mat<S> d = n->grad.cwiseProduct(y.cwiseProduct(Mat<S>(Mat<S>::Ones(y.rows(), y.cols()) - y)));
    detail::accumulate(n->parents[0].get(), d);
  });
}

// Exact (erf) GELU.
template <typename S>
Tensor<S> gelu(const Tensor<S>& a) {
  const S inv_sqrt2 = S(1) / std::sqrt(S(2));
  const S inv_sqrt2pi = S(1) / std::sqrt(S(2) * S(M_PI));
  Mat<S> y = a.value().unaryExpr(
      [=](S x) { return S(0.5) * x * (S(1) + std::erf(x * inv_sqrt2)); });
  return detail::make_op<S>(std::move(y), {a}, [=](TensorNode<S>* n) {
    const Mat<S>& x = n->parents[0]->value;
    Mat<S> d = x.unaryExpr([=](S v) {
      return S(0.5) * (S(1) + std::erf(v * inv_sqrt2)) +
             v * inv_sqrt2pi * std::exp(S(-0.5) * v * v);
    });
    detail::accumulate<S>(n->parents[0].get(), n->grad.cwiseProduct(d));
  });
}

template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& a) {
  Mat<S> y = a.value();
  for (long r = 0; r < y.rows(); ++r) {
    S mx = y.row(r).maxCoeff();
    y.row(r).array() = (y.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  return detail::make_op<S>(y, {a}, [y](TensorNode<S>* n) {
    Mat<S> d(y.rows(), y.cols());
    for (long r = 0; r < y.rows(); ++r) {
      S dot = n->grad.row(r).cwiseProduct(y.row(r)).sum();
      d.row(r).array() = y.row(r).array() * (n->grad.row(r).array() - dot);
    }
    detail::accumulate(n->parents[0].get(), d);
  });
}

template <typename S>
Tensor<S> log_softmax_rows(const Tensor<S>& a) {
  Mat<S> y = a.value();
  Mat<S> p(y.rows(), y.cols());
  for (long r = 0; r < y.rows(); ++r) {
    S mx = y.row(r).maxCoeff();
    S lse = mx + std::log((y.row(r).array() - mx).exp().sum());
    y.row(r).array() -= lse;
    p.row(r).array() = y.row(r).array().exp();
  }
  return detail::make_op<S>(std::move(y), {a}, [p](TensorNode<S>* n) {
    Mat<S> d(p.rows(), p.cols());
    for (long r = 0; r < p.rows(); ++r) {
      S total = n->grad.row(r).sum();
      d.row(r) = n->grad.row(r) - p.row(r) * total;
    }
    detail::accumulate(n->parents[0].get(), d);
  });
}

// Per-row layer norm with learned gain/bias (1xD each).
template <typename S>
Tensor<S> layer_norm_rows(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                          S eps = S(1e-5)) {
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 ||
      beta.cols() != x.cols())
    throw Error("layer_norm_rows: gain/bias must be 1x" + std::to_string(x.cols()));
  long rows = x.rows(), d = x.cols();
  Mat<S> xhat(rows, d);
  Mat<S> inv_std(rows, 1);
  for (long r = 0; r < rows; ++r) {
    S mu = x.value().row(r).mean();
    S var = (x.value().row(r).array() - mu).square().mean();
    S is = S(1) / std::sqrt(var + eps);
    inv_std(r, 0) = is;
    xhat.row(r).array() = (x.value().row(r).array() - mu) * is;
  }
  Mat<S> out(rows, d);
  for (long r = 0; r < rows; ++r)
    out.row(r) = xhat.row(r).cwiseProduct(gamma.value().row(0)) + beta.value().row(0);
  return detail::make_op<S>(std::move(out), {x, gamma, beta},
                            [xhat, inv_std](TensorNode<S>* n) {
    long rows = xhat.rows(), d = xhat.cols();
    const Mat<S>& g = n->grad;
    const Mat<S>& gamma_v = n->parents[1]->value;
    if (n->parents[1]->requires_grad)
      detail::accumulate<S>(n->parents[1].get(), g.cwiseProduct(xhat).colwise().sum());
    if (n->parents[2]->requires_grad)
      detail::accumulate<S>(n->parents[2].get(), g.colwise().sum());
    if (n->parents[0]->requires_grad) {
      Mat<S> dx(rows, d);
      for (long r = 0; r < rows; ++r) {
        Eigen::Matrix<S, 1, Eigen::Dynamic> dxhat =
            g.row(r).cwiseProduct(gamma_v.row(0));
        S m1 = dxhat.mean();
        S m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
        dx.row(r).array() =
            inv_std(r, 0) * (dxhat.array() - m1 - xhat.row(r).array() * m2);
      }
      detail::accumulate(n->parents[0].get(), dx);
    }
  });
}

// Row lookup: out[i] = table[idx[i]]. Duplicate indices are fine (grads add).
template <typename S>
Tensor<S> gather_rows(const Tensor<S>& table, std::vector<int> idx) {
  Mat<S> out(static_cast<long>(idx.size()), table.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.rows())
      throw Error("gather_rows: index " + std::to_string(idx[i]) + " out of range [0, " +
                  std::to_string(table.rows()) + ")");
    out.row(static_cast<long>(i)) = table.value().row(idx[i]);
  }
  return detail::make_op<S>(std::move(out), {table}, [idx = std::move(idx)](TensorNode<S>* n) {
    if (!n->parents[0]->requires_grad) return;
    n->parents[0]->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      n->parents[0]->grad.row(idx[i]) += n->grad.row(static_cast<long>(i));
  });
}

// Copy of base with rows idx[i] replaced by rep row i. Indices must be unique.
template <typename S>
Tensor<S> scatter_rows_replace(const Tensor<S>& base, std::vector<int> idx,
                               const Tensor<S>& rep) {
  if (static_cast<long>(idx.size()) != rep.rows() || rep.cols() != base.cols())
    throw Error("scatter_rows_replace: replacement shape mismatch");
  std::unordered_set<int> uniq(idx.begin(), idx.end());
  if (uniq.size() != idx.size())
    throw Error("scatter_rows_replace: duplicate row index");
  Mat<S> out = base.value();
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= base.rows())
      throw Error("scatter_rows_replace: index " + std::to_string(idx[i]) + " out of range");
    out.row(idx[i]) = rep.value().row(static_cast<long>(i));
  }
  return detail::make_op<S>(std::move(out), {base, rep},
                            [idx = std::move(idx)](TensorNode<S>* n) {
    if (n->parents[0]->requires_grad) {
      Mat<S> db = n->grad;
      for (int r : idx) db.row(r).setZero();
      detail::accumulate(n->parents[0].get(), db);
    }
    if (n->parents[1]->requires_grad) {
      Mat<S> dr(static_cast<long>(idx.size()), n->grad.cols());
      for (size_t i = 0; i < idx.size(); ++i)
        dr.row(static_cast<long>(i)) = n->grad.row(idx[i]);
      detail::accumulate(n->parents[1].get(), dr);
    }
  });
}

// Mean of the selected rows, as a 1xD tensor.
template <typename S>
Tensor<S> mean_rows(const Tensor<S>& m, std::vector<int> idx) {
  if (idx.empty()) throw Error("mean_rows: empty index set");
  Mat<S> out = Mat<S>::Zero(1, m.cols());
  for (int r : idx) {
    if (r < 0 || r >= m.rows())
      throw Error("mean_rows: index " + std::to_string(r) + " out of range");
    out.row(0) += m.value().row(r);
  }
  out /= static_cast<S>(idx.size());
  return detail::make_op<S>(std::move(out), {m}, [idx = std::move(idx)](TensorNode<S>* n) {
    if (!n->parents[0]->requires_grad) return;
    n->parents[0]->ensure_grad();
    S w = S(1) / static_cast<S>(idx.size());
    for (int r : idx) n->parents[0]->grad.row(r) += n->grad.row(0) * w;
  });
}

// Replicate a 1xD row n times; gradient sums back over the copies.
template <typename S>
Tensor<S> repeat_rows(const Tensor<S>& row, long n) {
  if (row.rows() != 1) throw Error("repeat_rows: input must be a single row");
  if (n < 1) throw Error("repeat_rows: count must be positive");
  Mat<S> out(n, row.cols());
  for (long r = 0; r < n; ++r) out.row(r) = row.value().row(0);
  return detail::make_op<S>(std::move(out), {row}, [](TensorNode<S>* n_) {
    detail::accumulate<S>(n_->parents[0].get(), n_->grad.colwise().sum());
  });
}

// Stack 1xD rows into an NxD matrix.
template <typename S>
Tensor<S> stack_rows(const std::vector<Tensor<S>>& rows) {
  if (rows.empty()) throw Error("stack_rows: nothing to stack");
  long d = rows[0].cols();
  Mat<S> out(static_cast<long>(rows.size()), d);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].rows() != 1 || rows[i].cols() != d)
      throw Error("stack_rows: all inputs must be 1x" + std::to_string(d));
    out.row(static_cast<long>(i)) = rows[i].value().row(0);
  }
  return detail::make_op<S>(std::move(out), rows, [](TensorNode<S>* n) {
    for (size_t i = 0; i < n->parents.size(); ++i)
      detail::accumulate<S>(n->parents[i].get(), n->grad.row(static_cast<long>(i)));
  });
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& a, long start, long count) {
  if (start < 0 || count <= 0 || start + count > a.cols())
    throw Error("slice_cols: range [" + std::to_string(start) + ", " +
                std::to_string(start + count) + ") outside 0.." + std::to_string(a.cols()));
  Mat<S> out = a.value().middleCols(start, count);
  return detail::make_op<S>(std::move(out), {a}, [start, count](TensorNode<S>* n) {
    if (!n->parents[0]->requires_grad) return;
    n->parents[0]->ensure_grad();
    n->parents[0]->grad.middleCols(start, count) += n->grad;
  });
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw Error("concat_cols: nothing to concatenate");
  long rows = parts[0].rows(), total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw Error("concat_cols: row count mismatch");
    total += p.cols();
  }
  Mat<S> out(rows, total);
  long at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return detail::make_op<S>(std::move(out), parts, [](TensorNode<S>* n) {
    long at = 0;
    for (auto& p : n->parents) {
      detail::accumulate<S>(p.get(), n->grad.middleCols(at, p->value.cols()));
      at += p->value.cols();
    }
  });
}

template <typename S>
Tensor<S> pick(const Tensor<S>& a, long r, long c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols())
    throw Error("pick: (" + std::to_string(r) + ", " + std::to_string(c) + ") out of range");
  Mat<S> out(1, 1);
  out(0, 0) = a.value()(r, c);
  return detail::make_op<S>(std::move(out), {a}, [r, c](TensorNode<S>* n) {
    if (!n->parents[0]->requires_grad) return;
    n->parents[0]->ensure_grad();
    n->parents[0]->grad(r, c) += n->grad(0, 0);
  });
}

template <typename S>
Tensor<S> sum_all(const Tensor<S>& a) {
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return detail::make_op<S>(std::move(out), {a}, [](TensorNode<S>* n) {
    detail::accumulate<S>(n->parents[0].get(),
                          Mat<S>::Constant(n->parents[0]->value.rows(),
                                           n->parents[0]->value.cols(), n->grad(0, 0)));
  });
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& a) {
  return scale(sum_all(a), S(1) / static_cast<S>(a.rows() * a.cols()));
}

// 1x1 dot product of two 1xD rows.
template <typename S>
Tensor<S> dot(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rows() != 1 || b.rows() != 1)
    throw Error("dot: expects two row vectors");
  return matmul(a, b, false, true);
}

// Elementwise product with a differentiable 1x1 scalar tensor.
template <typename S>
Tensor<S> mul_by_scalar(const Tensor<S>& a, const Tensor<S>& s) {
  if (s.rows() != 1 || s.cols() != 1) throw Error("mul_by_scalar: scalar must be 1x1");
  return detail::make_op<S>(Mat<S>(a.value() * s.value()(0, 0)), {a, s},
                            [](TensorNode<S>* n) {
    const Mat<S>& av = n->parents[0]->value;
    S sv = n->parents[1]->value(0, 0);
    detail::accumulate<S>(n->parents[0].get(), n->grad * sv);
    if (n->parents[1]->requires_grad) {
      Mat<S> ds(1, 1);
      ds(0, 0) = n->grad.cwiseProduct(av).sum();
      detail::accumulate(n->parents[1].get(), ds);
    }
  });
}

// Elementwise power of a 1x1 scalar tensor (used for inverse norms).
template <typename S>
Tensor<S> pow_scalar(const Tensor<S>& a, S p) {
  if (a.rows() != 1 || a.cols() != 1) throw Error("pow_scalar: input must be 1x1");
  S base = a.value()(0, 0);
  if (base <= S(0)) throw Error("pow_scalar: base must be positive");
  Mat<S> out(1, 1);
  out(0, 0) = std::pow(base, p);
  return detail::make_op<S>(std::move(out), {a}, [p](TensorNode<S>* n) {
    S base = n->parents[0]->value(0, 0);
    Mat<S> d(1, 1);
    d(0, 0) = n->grad(0, 0) * p * std::pow(base, p - S(1));
    detail::accumulate(n->parents[0].get(), d);
  });
}

// Row vector scaled to unit L2 norm.
template <typename S>
Tensor<S> l2_normalize_row(const Tensor<S>& x) {
  if (x.rows() != 1) throw Error("l2_normalize_row: input must be a single row");
  if (x.value().row(0).norm() == S(0))
    throw Error("l2_normalize_row: zero vector");
  return mul_by_scalar(x, pow_scalar(dot(x, x), S(-0.5)));
}

// Backprop from a 1x1 loss through the recorded tape.
template <typename S>
void backward(const Tensor<S>& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw Error("backward: loss must be a 1x1 tensor");
  if (!loss.node()->requires_grad)
    throw Error("backward: loss does not depend on any parameter");

  // iterative DFS postorder; reversed it yields children before parents
  std::vector<TensorNode<S>*> order;
  std::unordered_set<TensorNode<S>*> visited;
  std::vector<std::pair<TensorNode<S>*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode<S>* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // leaf (parameter) grads accumulate across calls; interior node grads are
  // per-traversal scratch and reset here
  for (TensorNode<S>* n : order)
    if (!n->parents.empty()) n->clear_grad();

  loss.node()->ensure_grad();
  loss.node()->grad(0, 0) += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward && (*it)->grad_alloc) (*it)->backward();
}

}  // namespace cgep
