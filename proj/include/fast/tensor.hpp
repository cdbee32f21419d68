#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fast/error.hpp"

namespace fast {

using Real = double;

/// Dense row-major matrix. Rank is at most two; vectors are stored as 1 x n rows.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::size_t rows, std::size_t cols, Real fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw Error("tensor: non-finite fill value");
  }

  Tensor(std::size_t rows, std::size_t cols, std::vector<Real> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error("tensor: data length " + std::to_string(data_.size()) +
                  " does not match shape " + shape_string());
    }
    for (Real v : data_) {
      if (!std::isfinite(v)) throw Error("tensor: non-finite value rejected");
    }
  }

  static Tensor row(std::vector<Real> values) {
    const std::size_t n = values.size();
    return Tensor(1, n, std::move(values));
  }

  static Tensor from_rows(const std::vector<std::vector<Real>>& rows) {
    if (rows.empty()) return Tensor();
    std::vector<Real> flat;
    flat.reserve(rows.size() * rows.front().size());
    for (const auto& r : rows) {
      if (r.size() != rows.front().size()) throw Error("tensor: ragged rows");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return Tensor(rows.size(), rows.front().size(), std::move(flat));
  }

  static Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real& operator[](std::size_t i) { return data_[i]; }

  std::span<const Real> data() const { return data_; }
  std::span<Real> data() { return data_; }
  std::span<const Real> row_span(std::size_t r) const {
    return std::span<const Real>(data_).subspan(r * cols_, cols_);
  }

  std::string shape_string() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

/// Plain (untaped) kernels shared by the tape and by inference-only code.
namespace kernels {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw Error(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                b.shape_string());
  }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw Error("matmul: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Real aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

/// a^T * b
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  Tensor out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const Real aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

/// a * b^T
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      Real s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
  return out;
}

inline void add_into(Tensor& acc, const Tensor& x) {
  require_same_shape(acc, x, "accumulate");
  auto d = acc.data();
  auto s = x.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

inline void add_scaled_into(Tensor& acc, const Tensor& x, Real scale) {
  require_same_shape(acc, x, "accumulate");
  auto d = acc.data();
  auto s = x.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

inline Real sigmoid(Real x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

/// Softmax over a 1 x k row, max-subtracted.
inline std::vector<Real> softmax(std::span<const Real> logits) {
  const Real mx = *std::max_element(logits.begin(), logits.end());
  std::vector<Real> p(logits.size());
  Real z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (Real& v : p) v /= z;
  return p;
}

inline Real squared_norm(const Tensor& t) {
  Real s = 0.0;
  for (Real v : t.data()) s += v * v;
  return s;
}

}  // namespace kernels

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient of a scalar loss, keyed by parameter name.
using Gradients = std::map<std::string, Tensor>;

/// Records operations in execution order, which is also a topological order,
/// and replays them backwards to accumulate exact gradients.
///
/// A tape is a single-threaded unit of work. Parameters are copied in by value
/// so that several tapes may read the same parameter set concurrently.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push("constant", std::move(value), {}, nullptr); }

  /// Leaf tied to a named parameter. Repeated calls with the same name reuse the node.
  Var parameter(const std::string& name, const Tensor& value) {
    if (auto it = param_nodes_.find(name); it != param_nodes_.end()) {
      return Var(this, it->second);
    }
    Var v = push("parameter", value, {}, nullptr);
    nodes_[v.id_].param_name = name;
    param_nodes_.emplace(name, v.id_);
    return v;
  }

  /// Appends a node. `backward` reads grad(self) and accumulates into grad(input).
  Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    if (!value.all_finite()) {
      throw Error(std::string(op) + ": produced a non-finite value");
    }
    for (std::size_t in : inputs) {
      if (in >= nodes_.size()) throw Error(std::string(op) + ": input from another tape");
    }
    return push(op, std::move(value), std::move(inputs), std::move(backward));
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  std::size_t input(std::size_t id, std::size_t k) const { return nodes_[id].inputs[k]; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient slot for a node, allocated as zeros on first use.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
    return n.grad;
  }
  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }

  /// Smallest non-zero |input| seen by any ReLU; infinity when none.
  Real relu_margin() const { return relu_margin_; }
  void note_relu_input(Real x) {
    if (x != 0.0) relu_margin_ = std::min(relu_margin_, std::abs(x));
  }

  /// Reverse sweep from a scalar loss. Every parameter node appears in the
  /// result (zeros when the loss does not depend on it); other leaves do not.
  Gradients backward(Var loss) {
    if (loss.tape_ != this) throw Error("backward: loss belongs to another tape");
    if (!value(loss.id_).is_scalar()) {
      throw Error("backward: loss must be scalar, got " + value(loss.id_).shape_string());
    }
    for (Node& n : nodes_) n.has_grad = false;
    grad(loss.id_)(0, 0) = 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, i);
    }
    Gradients out;
    for (const auto& [name, id] : param_nodes_) {
      out.emplace(name, has_grad(id) ? nodes_[id].grad
                                     : Tensor(nodes_[id].value.rows(), nodes_[id].value.cols()));
    }
    return out;
  }

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string param_name;
  };

  Var push(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> param_nodes_;
  Real relu_margin_ = std::numeric_limits<Real>::infinity();
};

inline const Tensor& Var::value() const {
  if (tape_ == nullptr) throw Error("var: unbound");
  return tape_->value(id_);
}

namespace detail {

inline Tape& same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw Error(std::string(op) + ": operands live on different tapes");
  }
  return *a.tape();
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b, "matmul");
  Tensor out = kernels::matmul(a.value(), b.value());
  return t.record("matmul", std::move(out), {a.id(), b.id()}, [](Tape& tp, std::size_t self) {
    const std::size_t ia = tp.input(self, 0);
    const std::size_t ib = tp.input(self, 1);
    const Tensor& g = tp.grad(self);
    kernels::add_into(tp.grad(ia), kernels::matmul_nt(g, tp.value(ib)));
    kernels::add_into(tp.grad(ib), kernels::matmul_tn(tp.value(ia), g));
  });
}

/// Elementwise sum. A 1 x c right operand is broadcast over the rows of an
/// r x c left operand (bias-row addition); no other broadcasting exists.
inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool bias_row = !av.same_shape(bv) && bv.rows() == 1 && bv.cols() == av.cols();
  if (!av.same_shape(bv) && !bias_row) {
    throw Error("add: shape mismatch " + av.shape_string() + " vs " + bv.shape_string());
  }
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias_row ? bv(0, c) : bv(r, c);
  }
  return t.record("add", std::move(out), {a.id(), b.id()}, [bias_row](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    kernels::add_into(tp.grad(tp.input(self, 0)), g);
    Tensor& gb = tp.grad(tp.input(self, 1));
    if (!bias_row) {
      kernels::add_into(gb, g);
      return;
    }
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b, "sub");
  kernels::require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  kernels::add_scaled_into(out, b.value(), -1.0);
  return t.record("sub", std::move(out), {a.id(), b.id()}, [](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    kernels::add_into(tp.grad(tp.input(self, 0)), g);
    kernels::add_scaled_into(tp.grad(tp.input(self, 1)), g, -1.0);
  });
}

inline Var mul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b, "mul");
  kernels::require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return t.record("mul", std::move(out), {a.id(), b.id()}, [](Tape& tp, std::size_t self) {
    const std::size_t ia = tp.input(self, 0);
    const std::size_t ib = tp.input(self, 1);
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * tp.value(ib)[i];
    Tensor& gb = tp.grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * tp.value(ia)[i];
  });
}

inline Var scale(const Var& a, Real s) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (Real& v : out.data()) v *= s;
  return t.record("scale", std::move(out), {a.id()}, [s](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    kernels::add_scaled_into(tp.grad(tp.input(self, 0)), g, s);
  });
}

/// Stacks operands vertically; all must share a column count.
inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_rows: no operands");
  Tape& t = *parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    detail::same_tape(parts.front(), p, "concat_rows");
    if (p.cols() != cols) {
      throw Error("concat_rows: shape mismatch " + parts.front().value().shape_string() + " vs " +
                  p.value().shape_string());
    }
    rows += p.rows();
    ids.push_back(p.id());
  }
  Tensor out(rows, cols);
  std::size_t r0 = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + r0 * cols);
    r0 += p.rows();
  }
  const std::size_t count = ids.size();
  return t.record("concat_rows", std::move(out), ids, [count](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < count; ++k) {
      Tensor& gi = tp.grad(tp.input(self, k));
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[offset + i];
      offset += gi.size();
    }
  });
}

/// Joins operands horizontally; all must share a row count.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols: no operands");
  Tape& t = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    detail::same_tape(parts.front(), p, "concat_cols");
    if (p.rows() != rows) {
      throw Error("concat_cols: shape mismatch " + parts.front().value().shape_string() + " vs " +
                  p.value().shape_string());
    }
    cols += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Tensor out(rows, cols);
  std::size_t c0 = 0;
  for (const Var& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, c0 + c) = p.value()(r, c);
    }
    c0 += p.cols();
  }
  return t.record("concat_cols", std::move(out), ids, [widths](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    std::size_t c0 = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Tensor& gi = tp.grad(tp.input(self, k));
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < widths[k]; ++c) gi(r, c) += g(r, c0 + c);
      }
      c0 += widths[k];
    }
  });
}

inline Var concat_cols(const Var& a, const Var& b) { return concat_cols(std::vector<Var>{a, b}); }

/// Column-wise mean over rows: r x c -> 1 x c.
inline Var mean_rows(const Var& a) {
  const Tensor& av = a.value();
  if (av.rows() == 0) throw Error("mean_rows: empty operand " + av.shape_string());
  Tensor out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(0, c) += av(r, c);
  }
  const Real inv = 1.0 / static_cast<Real>(av.rows());
  for (Real& v : out.data()) v *= inv;
  return a.tape()->record("mean_rows", std::move(out), {a.id()}, [inv](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(tp.input(self, 0));
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(0, c) * inv;
    }
  });
}

inline Var sum(const Var& a) {
  Real s = 0.0;
  for (Real v : a.value().data()) s += v;
  return a.tape()->record("sum", Tensor(1, 1, s), {a.id()}, [](Tape& tp, std::size_t self) {
    const Real g = tp.grad(self)(0, 0);
    for (Real& v : tp.grad(tp.input(self, 0)).data()) v += g;
  });
}

/// relu'(0) is taken as 0.
inline Var relu(const Var& a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (Real& v : out.data()) {
    t.note_relu_input(v);
    v = v > 0.0 ? v : 0.0;
  }
  return t.record("relu", std::move(out), {a.id()}, [](Tape& tp, std::size_t self) {
    const std::size_t ia = tp.input(self, 0);
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (tp.value(ia)[i] > 0.0) ga[i] += g[i];
    }
  });
}

inline Var tanh(const Var& a) {
  Tensor out = a.value();
  for (Real& v : out.data()) v = std::tanh(v);
  return a.tape()->record("tanh", std::move(out), {a.id()}, [](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor& ga = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (Real& v : out.data()) v = kernels::sigmoid(v);
  return a.tape()->record("sigmoid", std::move(out), {a.id()}, [](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor& ga = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

/// Rows [begin, end).
inline Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin > end || end > av.rows()) {
    throw Error("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                ") out of bounds for " + av.shape_string());
  }
  Tensor out(end - begin, av.cols());
  std::copy(av.data().begin() + begin * av.cols(), av.data().begin() + end * av.cols(),
            out.data().begin());
  return a.tape()->record("slice_rows", std::move(out), {a.id()}, [begin](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(tp.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * ga.cols() + i] += g[i];
  });
}

/// Selects rows by index, with repetition allowed (embedding lookup).
inline Var gather_rows(const Var& a, std::vector<std::size_t> indices) {
  const Tensor& av = a.value();
  Tensor out(indices.size(), av.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= av.rows()) {
      throw Error("gather_rows: index " + std::to_string(indices[r]) + " out of bounds for " +
                  av.shape_string());
    }
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(indices[r], c);
  }
  return a.tape()->record("gather_rows", std::move(out), {a.id()},
                          [idx = std::move(indices)](Tape& tp, std::size_t self) {
                            const Tensor& g = tp.grad(self);
                            Tensor& ga = tp.grad(tp.input(self, 0));
                            for (std::size_t r = 0; r < idx.size(); ++r) {
                              for (std::size_t c = 0; c < g.cols(); ++c) ga(idx[r], c) += g(r, c);
                            }
                          });
}

/// -log softmax(logits)[target] for a 1 x k row of logits, max-subtracted.
inline Var softmax_cross_entropy(const Var& logits, std::size_t target) {
  const Tensor& lv = logits.value();
  if (lv.rows() != 1 || lv.cols() < 2) {
    throw Error("softmax_cross_entropy: expected 1 x k logits with k >= 2, got " + lv.shape_string());
  }
  if (target >= lv.cols()) {
    throw Error("softmax_cross_entropy: target " + std::to_string(target) + " out of range for " +
                std::to_string(lv.cols()) + " classes");
  }
  const Real mx = *std::max_element(lv.data().begin(), lv.data().end());
  Real z = 0.0;
  for (Real v : lv.data()) z += std::exp(v - mx);
  const Real loss = std::log(z) + mx - lv(0, target);
  return logits.tape()->record(
      "softmax_cross_entropy", Tensor(1, 1, loss), {logits.id()}, [target](Tape& tp, std::size_t self) {
        const Real g = tp.grad(self)(0, 0);
        const std::size_t in = tp.input(self, 0);
        const auto p = kernels::softmax(tp.value(in).data());
        Tensor& gl = tp.grad(in);
        for (std::size_t k = 0; k < p.size(); ++k) gl(0, k) += g * (p[k] - (k == target ? 1.0 : 0.0));
      });
}

}  // namespace fast
