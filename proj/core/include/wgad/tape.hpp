#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wgad/tensor.hpp"

namespace wgad {

// Map from parameter name to its gradient, shapes matching the parameters.
template <class T>
using Gradient = std::map<std::string, Tensor<T>>;

enum class LeafKind : uint8_t { none, param, input, constant };

enum class OpKind : uint8_t {
  leaf,
  matmul,
  transpose,
  add,
  sub,
  mul,
  div,
  axpb,        // alpha * a + beta, elementwise
  tanh_fn,
  sigmoid_fn,
  leaky_relu,  // slope in alpha; right-derivative (slope 1) at the kink
  clamp_min,   // max(a, alpha); derivative 1 where a >= alpha, else 0
  step_mask,   // (a >= alpha ? 1 : beta); derivative registered as zero
  log_fn,
  exp_fn,
  sqrt_fn,
  sum,         // full reduction to 1x1
  row_sum,     // NxD -> Nx1
  col_sum,     // NxD -> 1xD
  bcast_rows,  // 1xD -> NxD, N in alpha
  bcast_cols,  // Nx1 -> NxD, D in alpha
};

// Reverse-mode tape over rank-2 tensors. Nodes are appended eagerly (values
// computed on the spot) and stay topologically ordered. Two consumers:
//   backward()       — plain reverse sweep into flat buffers, for parameter
//                      gradients of a scalar.
//   input_gradient() — emits the reverse sweep *as tape ops*, so the gradient
//                      w.r.t. an input is itself differentiable. That closure
//                      property is what makes the gradient penalty trainable.
// A tape is confined to one unit of execution and rebuilt per minibatch.
template <class T>
class Tape {
 public:
  struct Node {
    OpKind op = OpKind::leaf;
    int a = -1, b = -1;
    double alpha = 0.0, beta = 0.0;
    Tensor<T> value;
    LeafKind leaf_kind = LeafKind::none;
    std::string name;  // leaves only
  };

  int param(Tensor<T> v, std::string name) { return push_leaf(std::move(v), LeafKind::param, std::move(name)); }
  int input(Tensor<T> v, std::string name) { return push_leaf(std::move(v), LeafKind::input, std::move(name)); }
  int constant(Tensor<T> v) { return push_leaf(std::move(v), LeafKind::constant, ""); }
  int constant_scalar(double v) {
    Tensor<T> t(1, 1);
    t[0] = static_cast<T>(v);
    return constant(std::move(t));
  }

  int matmul(int a, int b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (A.cols() != B.rows()) {
      throw AutodiffError("matmul shape mismatch " + A.shape_str() + " @ " + B.shape_str());
    }
    Tensor<T> out(A.rows(), B.cols());
    out.mat().noalias() = A.mat() * B.mat();
    return push_op(OpKind::matmul, a, b, 0, 0, std::move(out));
  }

  int transpose(int a) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.cols(), A.rows());
    out.mat().noalias() = A.mat().transpose();
    return push_op(OpKind::transpose, a, -1, 0, 0, std::move(out));
  }

  int add(int a, int b) { return binary_ew(OpKind::add, a, b); }
  int sub(int a, int b) { return binary_ew(OpKind::sub, a, b); }
  int mul(int a, int b) { return binary_ew(OpKind::mul, a, b); }
  int div(int a, int b) { return binary_ew(OpKind::div, a, b); }

  int axpb(int a, double alpha, double beta) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.shape());
    const T ca = static_cast<T>(alpha), cb = static_cast<T>(beta);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = ca * A[i] + cb;
    return push_op(OpKind::axpb, a, -1, alpha, beta, std::move(out));
  }

  int tanh_op(int a) { return unary_fn(OpKind::tanh_fn, a, [](T v) { return static_cast<T>(std::tanh(static_cast<double>(v))); }); }

  int sigmoid(int a) {
    return unary_fn(OpKind::sigmoid_fn, a, [](T v) {
      // split by sign to stay stable for large |v|
      if (v >= T(0)) {
        T e = static_cast<T>(std::exp(-static_cast<double>(v)));
        return T(1) / (T(1) + e);
      }
      T e = static_cast<T>(std::exp(static_cast<double>(v)));
      return e / (T(1) + e);
    });
  }

  int leaky_relu(int a, double slope) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.shape());
    const T s = static_cast<T>(slope);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] >= T(0) ? A[i] : s * A[i];
    return push_op(OpKind::leaky_relu, a, -1, slope, 0, std::move(out));
  }

  int clamp_min(int a, double bound) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.shape());
    const T c = static_cast<T>(bound);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] >= c ? A[i] : c;
    return push_op(OpKind::clamp_min, a, -1, bound, 0, std::move(out));
  }

  int step_mask(int a, double thresh, double lo) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.shape());
    const T th = static_cast<T>(thresh), l = static_cast<T>(lo);
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] >= th ? T(1) : l;
    return push_op(OpKind::step_mask, a, -1, thresh, lo, std::move(out));
  }

  int log_op(int a) {
    return unary_fn(OpKind::log_fn, a, [](T v) {
      if (v <= T(0)) throw AutodiffError("log of non-positive value on tape");
      return static_cast<T>(std::log(static_cast<double>(v)));
    });
  }

  int exp_op(int a) { return unary_fn(OpKind::exp_fn, a, [](T v) { return static_cast<T>(std::exp(static_cast<double>(v))); }); }

  int sqrt_op(int a) {
    return unary_fn(OpKind::sqrt_fn, a, [](T v) {
      if (v < T(0)) throw AutodiffError("sqrt of negative value on tape");
      return static_cast<T>(std::sqrt(static_cast<double>(v)));
    });
  }

  int sum(int a) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(1, 1);
    T acc = T(0);
    for (int64_t i = 0; i < A.numel(); ++i) acc += A[i];
    out[0] = acc;
    return push_op(OpKind::sum, a, -1, 0, 0, std::move(out));
  }

  int row_sum(int a) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.rows(), 1);
    for (int64_t i = 0; i < A.rows(); ++i) {
      T acc = T(0);
      for (int64_t j = 0; j < A.cols(); ++j) acc += A(i, j);
      out(i, 0) = acc;
    }
    return push_op(OpKind::row_sum, a, -1, 0, 0, std::move(out));
  }

  int col_sum(int a) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(1, A.cols());
    for (int64_t i = 0; i < A.rows(); ++i)
      for (int64_t j = 0; j < A.cols(); ++j) out(0, j) += A(i, j);
    return push_op(OpKind::col_sum, a, -1, 0, 0, std::move(out));
  }

  int bcast_rows(int a, int64_t n) {
    const Tensor<T>& A = value(a);
    if (A.rows() != 1) throw AutodiffError("bcast_rows expects a 1xD tensor, got " + A.shape_str());
    Tensor<T> out(n, A.cols());
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < A.cols(); ++j) out(i, j) = A(0, j);
    return push_op(OpKind::bcast_rows, a, -1, static_cast<double>(n), 0, std::move(out));
  }

  int bcast_cols(int a, int64_t n) {
    const Tensor<T>& A = value(a);
    if (A.cols() != 1) throw AutodiffError("bcast_cols expects an Nx1 tensor, got " + A.shape_str());
    Tensor<T> out(A.rows(), n);
    for (int64_t i = 0; i < A.rows(); ++i)
      for (int64_t j = 0; j < n; ++j) out(i, j) = A(i, 0);
    return push_op(OpKind::bcast_cols, a, -1, static_cast<double>(n), 0, std::move(out));
  }

  const Tensor<T>& value(int id) const { return nodes_[check_id(id)].value; }
  const Node& node(int id) const { return nodes_[check_id(id)]; }
  double scalar_value(int id) const {
    const Tensor<T>& v = value(id);
    if (v.rank() != 2 || v.rows() != 1 || v.cols() != 1) {
      throw AutodiffError("expected a scalar node, got shape " + v.shape_str());
    }
    return static_cast<double>(v[0]);
  }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Recomputes every non-leaf value in order with the same kernels; used to
  // check that replaying the tape reproduces recorded outputs bit-for-bit.
  void replay() {
    for (size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (n.op == OpKind::leaf) continue;
      n.value = compute(n);
    }
  }

  // Reverse sweep into flat buffers. `output` must be a 1x1 scalar. Returns a
  // gradient entry for every parameter leaf; parameters outside the output's
  // ancestry get exact zeros.
  Gradient<T> backward(int output) const {
    (void)scalar_value(output);
    std::vector<char> needed = ancestors_of(output);
    std::vector<Tensor<T>> adj(nodes_.size());
    adj[static_cast<size_t>(output)] = Tensor<T>::full(1, 1, T(1));
    for (int i = output; i >= 0; --i) {
      if (!needed[static_cast<size_t>(i)]) continue;
      const Tensor<T>& g = adj[static_cast<size_t>(i)];
      if (g.empty()) continue;
      accumulate_operands(i, g, adj);
    }
    Gradient<T> grads;
    for (const Node& n : nodes_) {
      if (n.leaf_kind != LeafKind::param) continue;
      int id = static_cast<int>(&n - nodes_.data());
      Tensor<T>& a = adj[static_cast<size_t>(id)];
      Tensor<T> g = a.empty() ? Tensor<T>(n.value.shape()) : std::move(a);
      if (!g.all_finite()) {
        throw AutodiffError("non-finite gradient accumulated for parameter '" + n.name + "'");
      }
      grads.emplace(n.name, std::move(g));
    }
    return grads;
  }

  // Appends the reverse sweep for d(output)/d(input_leaf) as new tape ops and
  // returns the node holding that gradient, so scalars built from it can be
  // differentiated again by backward(). If output does not depend on the
  // input, a zero constant of the input's shape is returned.
  int input_gradient(int output, int input_leaf) {
    (void)scalar_value(output);
    const Node& leaf = nodes_[static_cast<size_t>(check_id(input_leaf))];
    if (leaf.leaf_kind != LeafKind::input) {
      throw AutodiffError("input_gradient target must be a marked input leaf");
    }
    const int limit = output;  // only differentiate the pre-existing graph
    std::vector<char> feeds_output = ancestors_of(output);
    std::vector<char> from_input(nodes_.size(), 0);
    from_input[static_cast<size_t>(input_leaf)] = 1;
    for (int i = 0; i <= limit; ++i) {
      const Node& n = nodes_[static_cast<size_t>(i)];
      if (n.op == OpKind::leaf) continue;
      bool r = (n.a >= 0 && from_input[static_cast<size_t>(n.a)]) ||
               (n.b >= 0 && from_input[static_cast<size_t>(n.b)]);
      if (r) from_input[static_cast<size_t>(i)] = 1;
    }
    if (!from_input[static_cast<size_t>(output)]) {
      return constant(Tensor<T>(leaf.value.shape()));
    }
    std::vector<int> adj(static_cast<size_t>(limit) + 1, -1);
    adj[static_cast<size_t>(output)] = constant_scalar(1.0);
    for (int i = output; i >= 0; --i) {
      if (!feeds_output[static_cast<size_t>(i)] || !from_input[static_cast<size_t>(i)]) continue;
      if (adj[static_cast<size_t>(i)] < 0) continue;
      emit_operand_contributions(i, adj, from_input);
    }
    int result = adj[static_cast<size_t>(input_leaf)];
    return result >= 0 ? result : constant(Tensor<T>(leaf.value.shape()));
  }

 private:
  int check_id(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw AutodiffError("node id out of range");
    return id;
  }

  int push_leaf(Tensor<T> v, LeafKind kind, std::string name) {
    if (v.rank() != 2) throw AutodiffError("tape tensors must be rank-2, got " + v.shape_str());
    if (!v.all_finite()) throw AutodiffError("non-finite values in tape leaf '" + name + "'");
    if (kind == LeafKind::param && !param_names_.insert(name).second) {
      throw AutodiffError("parameter leaf '" + name + "' bound twice on one tape");
    }
    Node n;
    n.op = OpKind::leaf;
    n.value = std::move(v);
    n.leaf_kind = kind;
    n.name = std::move(name);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push_op(OpKind op, int a, int b, double alpha, double beta, Tensor<T> out) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.alpha = alpha;
    n.beta = beta;
    n.value = std::move(out);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int binary_ew(OpKind op, int a, int b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (!A.same_shape(B)) {
      throw AutodiffError("elementwise op shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    }
    Tensor<T> out(A.shape());
    switch (op) {
      case OpKind::add:
        for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] + B[i];
        break;
      case OpKind::sub:
        for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] - B[i];
        break;
      case OpKind::mul:
        for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] * B[i];
        break;
      case OpKind::div:
        for (int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] / B[i];
        break;
      default:
        throw AutodiffError("not an elementwise op");
    }
    return push_op(op, a, b, 0, 0, std::move(out));
  }

  template <class Fn>
  int unary_fn(OpKind op, int a, Fn&& fn) {
    const Tensor<T>& A = value(a);
    Tensor<T> out(A.shape());
    for (int64_t i = 0; i < A.numel(); ++i) out[i] = fn(A[i]);
    return push_op(op, a, -1, 0, 0, std::move(out));
  }

  std::vector<char> ancestors_of(int output) const {
    std::vector<char> mark(nodes_.size(), 0);
    std::vector<int> stack{output};
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      if (mark[static_cast<size_t>(i)]) continue;
      mark[static_cast<size_t>(i)] = 1;
      const Node& n = nodes_[static_cast<size_t>(i)];
      if (n.a >= 0) stack.push_back(n.a);
      if (n.b >= 0) stack.push_back(n.b);
    }
    return mark;
  }

  // Recomputes a node's value from its operands (replay path).
  Tensor<T> compute(const Node& n) const {
    Tape scratch;  // reuse the eager kernels without duplicating them
    switch (n.op) {
      case OpKind::matmul:
      case OpKind::add:
      case OpKind::sub:
      case OpKind::mul:
      case OpKind::div: {
        int a = scratch.constant(value(n.a));
        int b = scratch.constant(value(n.b));
        int r = -1;
        if (n.op == OpKind::matmul) r = scratch.matmul(a, b);
        else if (n.op == OpKind::add) r = scratch.add(a, b);
        else if (n.op == OpKind::sub) r = scratch.sub(a, b);
        else if (n.op == OpKind::mul) r = scratch.mul(a, b);
        else r = scratch.div(a, b);
        return scratch.value(r);
      }
      default: {
        int a = scratch.constant(value(n.a));
        int r = -1;
        switch (n.op) {
          case OpKind::transpose: r = scratch.transpose(a); break;
          case OpKind::axpb: r = scratch.axpb(a, n.alpha, n.beta); break;
          case OpKind::tanh_fn: r = scratch.tanh_op(a); break;
          case OpKind::sigmoid_fn: r = scratch.sigmoid(a); break;
          case OpKind::leaky_relu: r = scratch.leaky_relu(a, n.alpha); break;
          case OpKind::clamp_min: r = scratch.clamp_min(a, n.alpha); break;
          case OpKind::step_mask: r = scratch.step_mask(a, n.alpha, n.beta); break;
          case OpKind::log_fn: r = scratch.log_op(a); break;
          case OpKind::exp_fn: r = scratch.exp_op(a); break;
          case OpKind::sqrt_fn: r = scratch.sqrt_op(a); break;
          case OpKind::sum: r = scratch.sum(a); break;
          case OpKind::row_sum: r = scratch.row_sum(a); break;
          case OpKind::col_sum: r = scratch.col_sum(a); break;
          case OpKind::bcast_rows: r = scratch.bcast_rows(a, static_cast<int64_t>(n.alpha)); break;
          case OpKind::bcast_cols: r = scratch.bcast_cols(a, static_cast<int64_t>(n.alpha)); break;
          default: throw AutodiffError("replay of unsupported op");
        }
        return scratch.value(r);
      }
    }
  }

  static void acc_into(Tensor<T>& slot, const Tensor<T>& delta) {
    if (slot.empty()) {
      slot = delta;
      return;
    }
    for (int64_t i = 0; i < slot.numel(); ++i) slot[i] += delta[i];
  }

  // Buffer-based chain rules, one case per op.
  void accumulate_operands(int i, const Tensor<T>& g, std::vector<Tensor<T>>& adj) const {
    const Node& n = nodes_[static_cast<size_t>(i)];
    auto slot = [&adj](int id) -> Tensor<T>& { return adj[static_cast<size_t>(id)]; };
    switch (n.op) {
      case OpKind::leaf:
      case OpKind::step_mask:
        return;
      case OpKind::matmul: {
        const Tensor<T>& A = value(n.a);
        const Tensor<T>& B = value(n.b);
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        da.mat().noalias() += g.mat() * B.mat().transpose();
        Tensor<T>& db = slot(n.b);
        if (db.empty()) db = Tensor<T>(B.shape());
        db.mat().noalias() += A.mat().transpose() * g.mat();
        return;
      }
      case OpKind::transpose: {
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(value(n.a).shape());
        da.mat().noalias() += g.mat().transpose();
        return;
      }
      case OpKind::add:
        acc_into(slot(n.a), g);
        acc_into(slot(n.b), g);
        return;
      case OpKind::sub: {
        acc_into(slot(n.a), g);
        Tensor<T>& db = slot(n.b);
        if (db.empty()) db = Tensor<T>(g.shape());
        for (int64_t k = 0; k < g.numel(); ++k) db[k] -= g[k];
        return;
      }
      case OpKind::mul: {
        const Tensor<T>& A = value(n.a);
        const Tensor<T>& B = value(n.b);
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += g[k] * B[k];
        Tensor<T>& db = slot(n.b);
        if (db.empty()) db = Tensor<T>(B.shape());
        for (int64_t k = 0; k < g.numel(); ++k) db[k] += g[k] * A[k];
        return;
      }
      case OpKind::div: {
        const Tensor<T>& B = value(n.b);
        const Tensor<T>& Y = n.value;
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(value(n.a).shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += g[k] / B[k];
        Tensor<T>& db = slot(n.b);
        if (db.empty()) db = Tensor<T>(B.shape());
        for (int64_t k = 0; k < g.numel(); ++k) db[k] -= g[k] * Y[k] / B[k];
        return;
      }
      case OpKind::axpb: {
        const T ca = static_cast<T>(n.alpha);
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(value(n.a).shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += ca * g[k];
        return;
      }
      case OpKind::tanh_fn: {
        const Tensor<T>& Y = n.value;
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(Y.shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += g[k] * (T(1) - Y[k] * Y[k]);
        return;
      }
      case OpKind::sigmoid_fn: {
        const Tensor<T>& Y = n.value;
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(Y.shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += g[k] * Y[k] * (T(1) - Y[k]);
        return;
      }
      case OpKind::leaky_relu: {
        const Tensor<T>& A = value(n.a);
        const T s = static_cast<T>(n.alpha);
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += g[k] * (A[k] >= T(0) ? T(1) : s);
        return;
      }
      case OpKind::clamp_min: {
        const Tensor<T>& A = value(n.a);
        const T c = static_cast<T>(n.alpha);
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += g[k] * (A[k] >= c ? T(1) : T(0));
        return;
      }
      case OpKind::log_fn: {
        const Tensor<T>& A = value(n.a);
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += g[k] / A[k];
        return;
      }
      case OpKind::exp_fn: {
        const Tensor<T>& Y = n.value;
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(Y.shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += g[k] * Y[k];
        return;
      }
      case OpKind::sqrt_fn: {
        const Tensor<T>& Y = n.value;
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(Y.shape());
        for (int64_t k = 0; k < g.numel(); ++k) da[k] += g[k] * T(0.5) / Y[k];
        return;
      }
      case OpKind::sum: {
        const Tensor<T>& A = value(n.a);
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        const T gv = g[0];
        for (int64_t k = 0; k < da.numel(); ++k) da[k] += gv;
        return;
      }
      case OpKind::row_sum: {
        const Tensor<T>& A = value(n.a);
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        for (int64_t r = 0; r < A.rows(); ++r)
          for (int64_t c = 0; c < A.cols(); ++c) da(r, c) += g(r, 0);
        return;
      }
      case OpKind::col_sum: {
        const Tensor<T>& A = value(n.a);
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        for (int64_t r = 0; r < A.rows(); ++r)
          for (int64_t c = 0; c < A.cols(); ++c) da(r, c) += g(0, c);
        return;
      }
      case OpKind::bcast_rows: {
        const Tensor<T>& A = value(n.a);  // 1xD
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        for (int64_t r = 0; r < g.rows(); ++r)
          for (int64_t c = 0; c < g.cols(); ++c) da(0, c) += g(r, c);
        return;
      }
      case OpKind::bcast_cols: {
        const Tensor<T>& A = value(n.a);  // Nx1
        Tensor<T>& da = slot(n.a);
        if (da.empty()) da = Tensor<T>(A.shape());
        for (int64_t r = 0; r < g.rows(); ++r)
          for (int64_t c = 0; c < g.cols(); ++c) da(r, 0) += g(r, c);
        return;
      }
    }
    throw AutodiffError("backward of unsupported op");
  }

  // Op-emitting chain rules mirroring accumulate_operands. Contributions are
  // only emitted toward operands on a path back to the input leaf.
  void emit_operand_contributions(int i, std::vector<int>& adj, const std::vector<char>& from_input) {
    const Node n = nodes_[static_cast<size_t>(i)];  // copy: emission reallocates nodes_
    const int g = adj[static_cast<size_t>(i)];
    auto wants = [&](int id) { return id >= 0 && from_input[static_cast<size_t>(id)]; };
    auto deposit = [&](int id, int contribution) {
      int& slot = adj[static_cast<size_t>(id)];
      slot = slot < 0 ? contribution : add(slot, contribution);
    };
    switch (n.op) {
      case OpKind::leaf:
      case OpKind::step_mask:
        return;
      case OpKind::matmul:
        if (wants(n.a)) deposit(n.a, matmul(g, transpose(n.b)));
        if (wants(n.b)) deposit(n.b, matmul(transpose(n.a), g));
        return;
      case OpKind::transpose:
        if (wants(n.a)) deposit(n.a, transpose(g));
        return;
      case OpKind::add:
        if (wants(n.a)) deposit(n.a, g);
        if (wants(n.b)) deposit(n.b, g);
        return;
      case OpKind::sub:
        if (wants(n.a)) deposit(n.a, g);
        if (wants(n.b)) deposit(n.b, axpb(g, -1.0, 0.0));
        return;
      case OpKind::mul:
        if (wants(n.a)) deposit(n.a, mul(g, n.b));
        if (wants(n.b)) deposit(n.b, mul(g, n.a));
        return;
      case OpKind::div:
        if (wants(n.a)) deposit(n.a, div(g, n.b));
        if (wants(n.b)) deposit(n.b, axpb(mul(g, div(i, n.b)), -1.0, 0.0));
        return;
      case OpKind::axpb:
        if (wants(n.a)) deposit(n.a, axpb(g, n.alpha, 0.0));
        return;
      case OpKind::tanh_fn:
        if (wants(n.a)) deposit(n.a, mul(g, axpb(mul(i, i), -1.0, 1.0)));
        return;
      case OpKind::sigmoid_fn:
        if (wants(n.a)) deposit(n.a, mul(g, mul(i, axpb(i, -1.0, 1.0))));
        return;
      case OpKind::leaky_relu:
        // the mask is piecewise-constant in the activation input, so the
        // penalty's parameter gradient exists almost everywhere
        if (wants(n.a)) deposit(n.a, mul(g, step_mask(n.a, 0.0, n.alpha)));
        return;
      case OpKind::clamp_min:
        if (wants(n.a)) deposit(n.a, mul(g, step_mask(n.a, n.alpha, 0.0)));
        return;
      case OpKind::log_fn:
        if (wants(n.a)) deposit(n.a, div(g, n.a));
        return;
      case OpKind::exp_fn:
        if (wants(n.a)) deposit(n.a, mul(g, i));
        return;
      case OpKind::sqrt_fn:
        if (wants(n.a)) deposit(n.a, div(axpb(g, 0.5, 0.0), i));
        return;
      case OpKind::sum: {
        if (!wants(n.a)) return;
        const int64_t rows = value(n.a).rows(), cols = value(n.a).cols();
        int expanded = g;
        if (rows > 1) expanded = bcast_rows(expanded, rows);
        if (cols > 1) expanded = bcast_cols(expanded, cols);
        deposit(n.a, expanded);
        return;
      }
      case OpKind::row_sum:
        if (wants(n.a)) deposit(n.a, bcast_cols(g, value(n.a).cols()));
        return;
      case OpKind::col_sum:
        if (wants(n.a)) deposit(n.a, bcast_rows(g, value(n.a).rows()));
        return;
      case OpKind::bcast_rows:
        if (wants(n.a)) deposit(n.a, col_sum(g));
        return;
      case OpKind::bcast_cols:
        if (wants(n.a)) deposit(n.a, row_sum(g));
        return;
    }
    throw AutodiffError("input_gradient of unsupported op");
  }

  std::vector<Node> nodes_;
  std::set<std::string> param_names_;
};

// Central-difference check: perturbs each coordinate of `point`, evaluates
// `fn`, and compares the finite-difference gradient against `analytic_grad`
// elementwise. Returns the worst relative error, with denominator
// max(|a|, |b|, 1e-8).
inline double finite_diff_check(const std::function<double(const TensorD&)>& fn,
                                const TensorD& point, double step,
                                const TensorD& analytic_grad) {
  if (step <= 0) throw AutodiffError("finite_diff_check requires step > 0");
  if (!point.same_shape(analytic_grad)) {
    throw AutodiffError("analytic gradient shape " + analytic_grad.shape_str() +
                        " does not match point " + point.shape_str());
  }
  TensorD p = point;
  double worst = 0.0;
  for (int64_t i = 0; i < p.numel(); ++i) {
    const double saved = p[i];
    p[i] = saved + step;
    const double fp = fn(p);
    p[i] = saved - step;
    const double fm = fn(p);
    p[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw AutodiffError("function not finite at perturbed point");
    }
    const double fd = (fp - fm) / (2.0 * step);
    const double an = analytic_grad[i];
    const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
    worst = std::max(worst, std::fabs(fd - an) / denom);
  }
  return worst;
}

}  // namespace wgad
