// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sentmatch/tensor.hpp"

namespace sentmatch {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph *graph = nullptr;
  std::uint32_t id = 0;

  bool valid() const { return graph != nullptr; }
};

namespace kernel {

inline double dot(const double *a, const double *b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double *x, double *y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace kernel

/// Tape of eagerly evaluated operations. Every op computes its value on
/// creation and, when any input needs a gradient, appends one backward step.
/// backward() replays the tape in reverse, so each step runs once and after
/// all of its consumers.
///
/// Parameters enter as leaves that alias the parameter storage. Gradients
/// land in per-graph buffers and are moved into Parameter::grad by
/// accumulate_param_grads(), which lets the caller fix the summation order
/// across graphs.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph &, std::uint32_t out)>;

  explicit Graph(bool record = true) : recording_(record) {}
  Graph(const Graph &) = delete;
  Graph &operator=(const Graph &) = delete;

  bool recording() const { return recording_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t tape_length() const { return tape_.size(); }

  Var constant(Tensor t) {
    Node n;
    n.shape = std::move(t.shape);
    n.own = std::move(t.data);
    return push(std::move(n));
  }

  Var constant(Shape shape, std::vector<double> values) {
    return constant(Tensor(std::move(shape), std::move(values)));
  }

  Var scalar(double v) { return constant(Tensor({1}, {v})); }

  /// Leaf aliasing the parameter's value. Repeated calls return the same node.
  Var param(Parameter &p) {
    if (auto it = leaf_index_.find(&p); it != leaf_index_.end()) return {this, it->second};
    Node n;
    n.shape = p.value.shape;
    n.ext = p.value.data.data();
    n.requires_grad = recording_ && !p.constant;
    n.param = &p;
    Var v = push(std::move(n));
    leaf_index_.emplace(&p, v.id);
    leaves_.push_back(v.id);
    return v;
  }

  const Shape &shape(Var v) const { return nodes_[v.id].shape; }
  std::size_t size(Var v) const { return nodes_[v.id].size(); }

  std::span<const double> value(Var v) const {
    const Node &n = nodes_[v.id];
    return {n.data(), n.size()};
  }

  Tensor tensor(Var v) const {
    auto s = value(v);
    return Tensor(shape(v), std::vector<double>(s.begin(), s.end()));
  }

  double item(Var v) const {
    if (size(v) != 1) throw ShapeError("item() on non-scalar " + shape_str(shape(v)));
    return value(v)[0];
  }

  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient accumulated at a node by the last backward(); empty when none reached it.
  std::span<const double> grad(Var v) const {
    const Node &n = nodes_[v.id];
    return {n.grad.data(), n.grad.size()};
  }

  void backward(Var root, double seed = 1.0) {
    if (size(root) != 1)
      throw ShapeError("backward() needs a scalar root, got " + shape_str(shape(root)));
    if (!nodes_[root.id].requires_grad) return;
    grad_buffer(root.id)[0] += seed;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
      if (nodes_[it->out].grad.empty()) continue;
      it->fn(*this, it->out);
    }
  }

  void zero_grad() {
    for (auto &n : nodes_) n.grad.clear();
  }

  /// Adds (scale * leaf gradient) into each trainable parameter touched by this graph.
  void accumulate_param_grads(double scale = 1.0) const {
    for (auto id : leaves_) {
      const Node &n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      Parameter &p = *n.param;
      if (p.grad.size() != p.size()) p.grad.assign(p.size(), 0.0);
      for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += scale * n.grad[i];
    }
  }

  // Op-author interface.

  Var emit(Shape shape, std::vector<double> values, std::initializer_list<Var> inputs,
           BackwardFn fn) {
    return emit(std::move(shape), std::move(values), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
  }

  Var emit(Shape shape, std::vector<double> values, std::span<const Var> inputs, BackwardFn fn) {
    bool needs = false;
    if (recording_)
      for (const Var &in : inputs) {
        if (in.graph != this) throw std::logic_error("op inputs belong to a different graph");
        needs = needs || nodes_[in.id].requires_grad;
      }
    Node n;
    n.shape = std::move(shape);
    n.own = std::move(values);
    if (n.own.size() != shape_size(n.shape))
      throw std::logic_error("op produced " + std::to_string(n.own.size()) + " values for shape " +
                             shape_str(n.shape));
    n.requires_grad = needs;
    Var out = push(std::move(n));
    if (needs) tape_.push_back({out.id, std::move(fn)});
    return out;
  }

  const double *data_ptr(std::uint32_t id) const { return nodes_[id].data(); }

  /// Gradient buffer of an input, or nullptr when the input needs no gradient.
  double *grad_of(std::uint32_t id) {
    if (!nodes_[id].requires_grad) return nullptr;
    return grad_buffer(id);
  }

  const double *out_grad(std::uint32_t id) const { return nodes_[id].grad.data(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> own;
    const double *ext = nullptr;
    std::vector<double> grad;
    bool requires_grad = false;
    Parameter *param = nullptr;

    const double *data() const { return ext ? ext : own.data(); }
    std::size_t size() const { return shape_size(shape); }
  };

  struct Step {
    std::uint32_t out;
    BackwardFn fn;
  };

  Var push(Node n) {
    if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max())
      throw std::length_error("graph node limit reached");
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  double *grad_buffer(std::uint32_t id) {
    Node &n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.size(), 0.0);
    return n.grad.data();
  }

  bool recording_;
  std::vector<Node> nodes_;
  std::vector<Step> tape_;
  std::vector<std::uint32_t> leaves_;
  std::unordered_map<const Parameter *, std::uint32_t> leaf_index_;
};

namespace detail {

inline Graph &graph_of(Var v) {
  if (!v.valid()) throw std::logic_error("operation on an empty Var");
  return *v.graph;
}

inline void require_same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw std::logic_error("operands belong to different graphs");
}

inline std::vector<double> values_of(Var v) {
  auto s = v.graph->value(v);
  return {s.begin(), s.end()};
}

enum class BinaryOp { add, sub, mul };

inline Var binary(BinaryOp op, Var a, Var b) {
  Graph &g = graph_of(a);
  require_same_graph(a, b);
  const Shape sa = g.shape(a), sb = g.shape(b);
  const std::size_t na = g.size(a), nb = g.size(b);
  Shape out_shape;
  if (sa == sb) {
    out_shape = sa;
  } else if (nb == 1) {
    out_shape = sa;
  } else if (na == 1) {
    out_shape = sb;
  } else {
    throw ShapeError("elementwise shape mismatch: " + shape_str(sa) + " vs " + shape_str(sb));
  }
  const std::size_t n = shape_size(out_shape);
  const std::size_t step_a = na == 1 ? 0 : 1, step_b = nb == 1 ? 0 : 1;
  const double *pa = g.data_ptr(a.id), *pb = g.data_ptr(b.id);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pa[i * step_a], y = pb[i * step_b];
    out[i] = op == BinaryOp::add ? x + y : op == BinaryOp::sub ? x - y : x * y;
  }
  const std::uint32_t ia = a.id, ib = b.id;
  return g.emit(std::move(out_shape), std::move(out), {a, b},
                [=](Graph &gr, std::uint32_t o) {
                  const double *go = gr.out_grad(o);
                  const double *xa = gr.data_ptr(ia), *xb = gr.data_ptr(ib);
                  if (double *ga = gr.grad_of(ia)) {
                    for (std::size_t i = 0; i < n; ++i) {
                      const double d = op == BinaryOp::mul ? go[i] * xb[i * step_b] : go[i];
                      ga[i * step_a] += d;
                    }
                  }
                  if (double *gb = gr.grad_of(ib)) {
                    for (std::size_t i = 0; i < n; ++i) {
                      const double d = op == BinaryOp::add   ? go[i]
                                       : op == BinaryOp::sub ? -go[i]
                                                             : go[i] * xa[i * step_a];
                      gb[i * step_b] += d;
                    }
                  }
                });
}

/// Pointwise map whose derivative is expressed through (input, output).
template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Graph &g = graph_of(a);
  const std::size_t n = g.size(a);
  const double *pa = g.data_ptr(a.id);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(pa[i]);
  const std::uint32_t ia = a.id;
  return g.emit(g.shape(a), std::move(out), {a}, [=](Graph &gr, std::uint32_t o) {
    double *ga = gr.grad_of(ia);
    if (!ga) return;
    const double *go = gr.out_grad(o), *x = gr.data_ptr(ia), *y = gr.data_ptr(o);
    for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * deriv(x[i], y[i]);
  });
}

/// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape &s, std::size_t axis) {
  if (axis >= s.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace detail

// Elementwise arithmetic. Shapes must agree, except that a single-element
// operand is broadcast against the other.

inline Var add(Var a, Var b) { return detail::binary(detail::BinaryOp::add, a, b); }
inline Var sub(Var a, Var b) { return detail::binary(detail::BinaryOp::sub, a, b); }
inline Var mul(Var a, Var b) { return detail::binary(detail::BinaryOp::mul, a, b); }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

inline Var scale(Var a, double c) {
  return detail::unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var add_scalar(Var a, double c) {
  return detail::unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

/// 1 - a, the highway carry gate.
inline Var one_minus(Var a) {
  return detail::unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

inline Var abs(Var a) {
  return detail::unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Var tanh(Var a) {
  return detail::unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var a) {
  return detail::unary(
      a, [](double x) { return kernel::sigmoid(x); }, [](double, double y) { return y * (1.0 - y); });
}

/// max(0, x); the subgradient at 0 is 0.
inline Var relu(Var a) {
  return detail::unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var square(Var a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Var sum(Var a) {
  Graph &g = detail::graph_of(a);
  const std::size_t n = g.size(a);
  const double *pa = g.data_ptr(a.id);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += pa[i];
  const std::uint32_t ia = a.id;
  return g.emit({1}, {s}, {a}, [=](Graph &gr, std::uint32_t o) {
    double *ga = gr.grad_of(ia);
    if (!ga) return;
    const double go = gr.out_grad(o)[0];
    for (std::size_t i = 0; i < n; ++i) ga[i] += go;
  });
}

inline Var sum_squares(Var a) {
  Graph &g = detail::graph_of(a);
  const std::size_t n = g.size(a);
  const double *pa = g.data_ptr(a.id);
  const double s = kernel::dot(pa, pa, n);
  const std::uint32_t ia = a.id;
  return g.emit({1}, {s}, {a}, [=](Graph &gr, std::uint32_t o) {
    double *ga = gr.grad_of(ia);
    if (!ga) return;
    const double go = gr.out_grad(o)[0];
    const double *x = gr.data_ptr(ia);
    for (std::size_t i = 0; i < n; ++i) ga[i] += 2.0 * go * x[i];
  });
}

/// Inner product of two equally sized tensors.
inline Var dot(Var a, Var b) {
  Graph &g = detail::graph_of(a);
  detail::require_same_graph(a, b);
  if (g.size(a) != g.size(b))
    throw ShapeError("dot size mismatch: " + shape_str(g.shape(a)) + " vs " + shape_str(g.shape(b)));
  const std::size_t n = g.size(a);
  const double s = kernel::dot(g.data_ptr(a.id), g.data_ptr(b.id), n);
  const std::uint32_t ia = a.id, ib = b.id;
  return g.emit({1}, {s}, {a, b}, [=](Graph &gr, std::uint32_t o) {
    const double go = gr.out_grad(o)[0];
    if (double *ga = gr.grad_of(ia)) kernel::axpy(go, gr.data_ptr(ib), ga, n);
    if (double *gb = gr.grad_of(ib)) kernel::axpy(go, gr.data_ptr(ia), gb, n);
  });
}

/// Single element of a tensor (flat index) as a scalar.
inline Var pick(Var a, std::size_t index) {
  Graph &g = detail::graph_of(a);
  if (index >= g.size(a))
    throw ShapeError("pick index " + std::to_string(index) + " out of range for " + shape_str(g.shape(a)));
  const std::uint32_t ia = a.id;
  return g.emit({1}, {g.data_ptr(a.id)[index]}, {a}, [=](Graph &gr, std::uint32_t o) {
    if (double *ga = gr.grad_of(ia)) ga[index] += gr.out_grad(o)[0];
  });
}

/// (m x k) . (k x n) -> (m x n)
inline Var matmul(Var a, Var b) {
  Graph &g = detail::graph_of(a);
  detail::require_same_graph(a, b);
  const Shape sa = g.shape(a), sb = g.shape(b);
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw ShapeError("matmul shape mismatch: " + shape_str(sa) + " . " + shape_str(sb));
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  const double *pa = g.data_ptr(a.id), *pb = g.data_ptr(b.id);
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) kernel::axpy(pa[i * k + p], pb + p * n, out.data() + i * n, n);
  const std::uint32_t ia = a.id, ib = b.id;
  return g.emit({m, n}, std::move(out), {a, b}, [=](Graph &gr, std::uint32_t o) {
    const double *go = gr.out_grad(o);
    const double *xa = gr.data_ptr(ia), *xb = gr.data_ptr(ib);
    if (double *ga = gr.grad_of(ia)) {
      // dA = dOut . B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += kernel::dot(go + i * n, xb + p * n, n);
    }
    if (double *gb = gr.grad_of(ib)) {
      // dB = A^T . dOut
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) kernel::axpy(xa[i * k + p], go + i * n, gb + p * n, n);
    }
  });
}

/// (m x k) . [k] -> [m]
inline Var matvec(Var w, Var x) {
  Graph &g = detail::graph_of(w);
  detail::require_same_graph(w, x);
  const Shape sw = g.shape(w);
  if (sw.size() != 2 || g.size(x) != sw[1])
    throw ShapeError("matvec shape mismatch: " + shape_str(sw) + " . " + shape_str(g.shape(x)));
  const std::size_t m = sw[0], k = sw[1];
  const double *pw = g.data_ptr(w.id), *px = g.data_ptr(x.id);
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = kernel::dot(pw + i * k, px, k);
  const std::uint32_t iw = w.id, ix = x.id;
  return g.emit({m}, std::move(out), {w, x}, [=](Graph &gr, std::uint32_t o) {
    const double *go = gr.out_grad(o);
    const double *xw = gr.data_ptr(iw), *xx = gr.data_ptr(ix);
    if (double *gw = gr.grad_of(iw))
      for (std::size_t i = 0; i < m; ++i)
        if (go[i] != 0.0) kernel::axpy(go[i], xx, gw + i * k, k);
    if (double *gx = gr.grad_of(ix))
      for (std::size_t i = 0; i < m; ++i)
        if (go[i] != 0.0) kernel::axpy(go[i], xw + i * k, gx, k);
  });
}

/// Numerically stable softmax over a vector.
inline Var softmax(Var a) {
  Graph &g = detail::graph_of(a);
  const std::size_t n = g.size(a);
  const double *pa = g.data_ptr(a.id);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(pa[i])) throw std::domain_error("softmax: non-finite input");
    mx = std::max(mx, pa[i]);
  }
  std::vector<double> out(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += (out[i] = std::exp(pa[i] - mx));
  for (auto &v : out) v /= z;
  const std::uint32_t ia = a.id;
  return g.emit(g.shape(a), std::move(out), {a}, [=](Graph &gr, std::uint32_t o) {
    double *ga = gr.grad_of(ia);
    if (!ga) return;
    const double *go = gr.out_grad(o), *y = gr.data_ptr(o);
    const double s = kernel::dot(go, y, n);
    for (std::size_t i = 0; i < n; ++i) ga[i] += y[i] * (go[i] - s);
  });
}

inline Var log_softmax(Var a) {
  Graph &g = detail::graph_of(a);
  const std::size_t n = g.size(a);
  const double *pa = g.data_ptr(a.id);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(pa[i])) throw std::domain_error("log_softmax: non-finite input");
    mx = std::max(mx, pa[i]);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(pa[i] - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] - lz;
  const std::uint32_t ia = a.id;
  return g.emit(g.shape(a), std::move(out), {a}, [=](Graph &gr, std::uint32_t o) {
    double *ga = gr.grad_of(ia);
    if (!ga) return;
    const double *go = gr.out_grad(o), *y = gr.data_ptr(o);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += go[i];
    for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] - std::exp(y[i]) * s;
  });
}

/// Relabels the shape; data order is unchanged.
inline Var reshape(Var a, Shape shape) {
  Graph &g = detail::graph_of(a);
  if (shape_size(shape) != g.size(a))
    throw ShapeError("reshape " + shape_str(g.shape(a)) + " -> " + shape_str(shape) +
                     " changes element count");
  const std::size_t n = g.size(a);
  const std::uint32_t ia = a.id;
  return g.emit(std::move(shape), detail::values_of(a), {a}, [=](Graph &gr, std::uint32_t o) {
    if (double *ga = gr.grad_of(ia)) kernel::axpy(1.0, gr.out_grad(o), ga, n);
  });
}

inline Var concat(std::size_t axis, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Graph &g = detail::graph_of(parts[0]);
  const Shape first = g.shape(parts[0]);
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var &p : parts) {
    detail::require_same_graph(parts[0], p);
    const Shape s = g.shape(p);
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d)
      if (d != axis && s[d] != first[d]) ok = false;
    if (!ok) throw ShapeError("concat extent mismatch: " + shape_str(first) + " vs " + shape_str(s));
    out_shape[axis] += s[axis];
  }
  const auto out_split = detail::split_axis(out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> widths, offsets;
  std::size_t offset = 0;
  for (const Var &p : parts) {
    const std::size_t w = g.shape(p)[axis] * out_split.inner;
    const double *src = g.data_ptr(p.id);
    for (std::size_t o = 0; o < out_split.outer; ++o)
      std::copy_n(src + o * w, w, out.data() + o * out_split.extent * out_split.inner + offset);
    ids.push_back(p.id);
    widths.push_back(w);
    offsets.push_back(offset);
    offset += w;
  }
  const std::size_t row = out_split.extent * out_split.inner, outer = out_split.outer;
  return g.emit(std::move(out_shape), std::move(out), parts, [=](Graph &gr, std::uint32_t o) {
    const double *go = gr.out_grad(o);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      double *gp = gr.grad_of(ids[k]);
      if (!gp) continue;
      for (std::size_t r = 0; r < outer; ++r)
        kernel::axpy(1.0, go + r * row + offsets[k], gp + r * widths[k], widths[k]);
    }
  });
}

inline Var concat(std::size_t axis, std::initializer_list<Var> parts) {
  return concat(axis, std::span<const Var>(parts.begin(), parts.size()));
}

/// Stacks equally shaped tensors along a new leading axis.
inline Var stack(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("stack of zero tensors");
  Graph &g = detail::graph_of(parts[0]);
  std::vector<Var> lifted;
  lifted.reserve(parts.size());
  for (const Var &p : parts) {
    if (g.shape(p) != g.shape(parts[0]))
      throw ShapeError("stack shape mismatch: " + shape_str(g.shape(parts[0])) + " vs " +
                       shape_str(g.shape(p)));
    Shape s = g.shape(p);
    s.insert(s.begin(), 1);
    lifted.push_back(reshape(p, std::move(s)));
  }
  return concat(0, lifted);
}

/// Elements [begin, end) along `axis`.
inline Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Graph &g = detail::graph_of(a);
  const auto sp = detail::split_axis(g.shape(a), axis);
  if (begin >= end || end > sp.extent)
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range on axis " +
                     std::to_string(axis) + " of " + shape_str(g.shape(a)));
  Shape out_shape = g.shape(a);
  out_shape[axis] = end - begin;
  const std::size_t w = (end - begin) * sp.inner, row = sp.extent * sp.inner, off = begin * sp.inner,
                    outer = sp.outer;
  const double *src = g.data_ptr(a.id);
  std::vector<double> out(outer * w);
  for (std::size_t o = 0; o < outer; ++o) std::copy_n(src + o * row + off, w, out.data() + o * w);
  const std::uint32_t ia = a.id;
  return g.emit(std::move(out_shape), std::move(out), {a}, [=](Graph &gr, std::uint32_t o) {
    double *ga = gr.grad_of(ia);
    if (!ga) return;
    const double *go = gr.out_grad(o);
    for (std::size_t r = 0; r < outer; ++r) kernel::axpy(1.0, go + r * w, ga + r * row + off, w);
  });
}

/// Row `r` of a matrix as a vector.
inline Var row(Var a, std::size_t r) {
  Graph &g = detail::graph_of(a);
  if (g.shape(a).size() != 2) throw ShapeError("row() needs a matrix, got " + shape_str(g.shape(a)));
  return reshape(slice(a, 0, r, r + 1), {g.shape(a)[1]});
}

/// Maximum along `axis`; the gradient goes to the first maximal position.
inline Var max_over_axis(Var a, std::size_t axis) {
  Graph &g = detail::graph_of(a);
  const auto sp = detail::split_axis(g.shape(a), axis);
  Shape out_shape = g.shape(a);
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  const double *src = g.data_ptr(a.id);
  std::vector<double> out(sp.outer * sp.inner);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      std::size_t best = o * sp.extent * sp.inner + i;
      for (std::size_t e = 1; e < sp.extent; ++e) {
        const std::size_t idx = (o * sp.extent + e) * sp.inner + i;
        if (src[idx] > src[best]) best = idx;
      }
      out[o * sp.inner + i] = src[best];
      arg[o * sp.inner + i] = best;
    }
  const std::uint32_t ia = a.id;
  return g.emit(std::move(out_shape), std::move(out), {a},
                [ia, arg = std::move(arg)](Graph &gr, std::uint32_t o) {
                  double *ga = gr.grad_of(ia);
                  if (!ga) return;
                  const double *go = gr.out_grad(o);
                  for (std::size_t k = 0; k < arg.size(); ++k) ga[arg[k]] += go[k];
                });
}

/// General axis permutation: out.shape[i] = in.shape[perm[i]].
inline Var permute(Var a, std::vector<std::size_t> perm) {
  Graph &g = detail::graph_of(a);
  const Shape in = g.shape(a);
  const std::size_t r = in.size();
  if (perm.size() != r) throw ShapeError("permute rank mismatch for " + shape_str(in));
  std::vector<bool> seen(r, false);
  for (auto p : perm) {
    if (p >= r || seen[p]) throw ShapeError("permute: invalid axis order");
    seen[p] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in[perm[i]];
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  const std::size_t n = g.size(a);
  // map[k] = input flat index of output flat index k
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < r; ++d) src += idx[d] * in_stride[perm[d]];
    map[k] = src;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  const double *src = g.data_ptr(a.id);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = src[map[k]];
  const std::uint32_t ia = a.id;
  return g.emit(std::move(out_shape), std::move(out), {a},
                [ia, map = std::move(map)](Graph &gr, std::uint32_t o) {
                  double *ga = gr.grad_of(ia);
                  if (!ga) return;
                  const double *go = gr.out_grad(o);
                  for (std::size_t k = 0; k < map.size(); ++k) ga[map[k]] += go[k];
                });
}

/// Temporal convolution over a (time x in_frames) input.
///
/// `weight` is (out_frames x width*in_frames): each filter sees `width`
/// consecutive input rows flattened row-major. Output row t covers input
/// rows [t*stride, t*stride + width). Output length is (T - width)/stride + 1.
inline Var conv1d(Var input, Var weight, Var bias, std::size_t width, std::size_t stride = 1) {
  Graph &g = detail::graph_of(input);
  detail::require_same_graph(input, weight);
  detail::require_same_graph(input, bias);
  const Shape si = g.shape(input), sw = g.shape(weight);
  if (si.size() != 2) throw ShapeError("conv1d input must be (time x frames), got " + shape_str(si));
  if (width == 0 || stride == 0) throw ShapeError("conv1d width and stride must be positive");
  const std::size_t steps = si[0], in_frames = si[1];
  if (steps < width)
    throw ShapeError("conv1d: time extent " + std::to_string(steps) + " is smaller than kernel width " +
                     std::to_string(width));
  const std::size_t window = width * in_frames;
  if (sw.size() != 2 || sw[1] != window)
    throw ShapeError("conv1d weight " + shape_str(sw) + " does not match window " + std::to_string(window));
  const std::size_t out_frames = sw[0];
  if (g.size(bias) != out_frames)
    throw ShapeError("conv1d bias " + shape_str(g.shape(bias)) + " does not match " +
                     std::to_string(out_frames) + " filters");
  const std::size_t out_steps = (steps - width) / stride + 1;
  const double *x = g.data_ptr(input.id), *w = g.data_ptr(weight.id), *b = g.data_ptr(bias.id);
  std::vector<double> out(out_steps * out_frames);
  for (std::size_t t = 0; t < out_steps; ++t) {
    const double *win = x + t * stride * in_frames;
    for (std::size_t f = 0; f < out_frames; ++f)
      out[t * out_frames + f] = b[f] + kernel::dot(w + f * window, win, window);
  }
  const std::uint32_t ix = input.id, iw = weight.id, ib = bias.id;
  return g.emit({out_steps, out_frames}, std::move(out), {input, weight, bias},
                [=](Graph &gr, std::uint32_t o) {
                  const double *go = gr.out_grad(o);
                  const double *xv = gr.data_ptr(ix), *wv = gr.data_ptr(iw);
                  double *gx = gr.grad_of(ix), *gw = gr.grad_of(iw), *gb = gr.grad_of(ib);
                  for (std::size_t t = 0; t < out_steps; ++t) {
                    const double *win = xv + t * stride * in_frames;
                    for (std::size_t f = 0; f < out_frames; ++f) {
                      const double d = go[t * out_frames + f];
                      if (d == 0.0) continue;
                      if (gb) gb[f] += d;
                      if (gw) kernel::axpy(d, win, gw + f * window, window);
                      if (gx) kernel::axpy(d, wv + f * window, gx + t * stride * in_frames, window);
                    }
                  }
                });
}

}  // namespace sentmatch
