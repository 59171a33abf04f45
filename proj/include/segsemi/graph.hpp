#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "segsemi/parameter.hpp"
#include "segsemi/tensor.hpp"

namespace segsemi {

// Handle to a node of a Graph. Only meaningful for the graph that made it.
struct Var {
  static constexpr std::uint32_t kNone = 0xffffffffu;
  std::uint32_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

// Half-open row interval [begin, end).
struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Tape-based reverse-mode differentiation over dense tensors.
//
// Nodes are appended in evaluation order, which is a topological order;
// backward() walks them once in reverse. Parameters enter through
// parameter(), and backward() adds their gradients into Parameter::grad, so
// several graphs can accumulate into the same store one after another.
//
// A graph built with record = false keeps values only and never allocates
// gradients; such graphs may run concurrently over a shared store.
template <class S>
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Tensor<S> value);
  Var parameter(Parameter<S>& p);
  // Same values, no gradient path.
  Var detach(Var x);

  // x [T, Cin], w [taps, Cin, Cout], bias [Cout] or none -> [T, Cout]
  Var conv1d(Var x, Var w, Var bias, std::size_t dilation);
  // [m, k] x [k, n] -> [m, n]
  Var matmul(Var a, Var b);
  Var transpose(Var a);

  Var add(Var a, Var b);
  // x [m, n] + row [1, n] (or [n]) broadcast over rows.
  Var add_row(Var x, Var row);
  Var mul(Var a, Var b);
  Var scale(Var a, S factor);
  // Scalar sum of all entries, shape [1].
  Var sum(Var x);

  Var relu(Var x);
  Var sigmoid(Var x);
  Var tanh(Var x);
  // Inverted dropout; identity when rate is 0.
  Var dropout(Var x, S rate, std::mt19937_64& rng);

  // Row-wise over the last axis of a 2-D tensor.
  Var softmax(Var x);
  Var log_softmax(Var x);

  // Per-range, per-column max over rows -> [ranges, cols].
  Var segment_max_pool(Var x, std::vector<RowRange> ranges);

  Var concat_cols(Var a, Var b);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var x, std::size_t begin, std::size_t end);
  Var gather_rows(Var x, std::vector<std::size_t> rows);

  // Mean over rows of -logp[r, targets[r]] -> scalar.
  Var nll(Var logp, std::vector<std::size_t> targets);
  // (1/(T*C)) * sum over t>=1, c of min(tau, |x[t,c] - x[t-1,c]|)^2 -> scalar.
  // Zero gradient where the clamp is active.
  Var truncated_smoothing(Var logp, S tau);
  // (1/(T*C)) * sum of min(tau, |a - b|) -> scalar.
  Var truncated_l1(Var a, Var b, S tau);

  void backward(Var loss);

  const Tensor<S>& value(Var v) const { return node(v).value; }
  // Empty tensor when no gradient reached the node.
  const Tensor<S>& grad(Var v) const { return node(v).grad; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad = false;
    Parameter<S>* param = nullptr;
    std::function<void(Graph&, const Tensor<S>&)> backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  Tensor<S>& grad_buffer(std::uint32_t id);
  bool needs(Var v) const { return v.valid() && nodes_[v.id].requires_grad; }
  Var push(Tensor<S> value, bool requires_grad, std::function<void(Graph&, const Tensor<S>&)> backward);

  bool record_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace segsemi
