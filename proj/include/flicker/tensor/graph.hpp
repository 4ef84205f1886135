#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flicker/tensor/parameters.hpp"
#include "flicker/tensor/tensor.hpp"

namespace flicker {

// Handle to a node inside one Graph.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// Row partition of a matrix: segment s covers rows [offsets[s], offsets[s+1]).
struct Segments {
  std::vector<std::size_t> offsets{0};

  static Segments from_sizes(std::span<const std::size_t> sizes);
  std::size_t count() const { return offsets.size() - 1; }
  std::size_t total() const { return offsets.back(); }
  std::size_t begin(std::size_t s) const { return offsets[s]; }
  std::size_t end(std::size_t s) const { return offsets[s + 1]; }
  std::size_t size(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
};

enum class Op : std::uint8_t {
  Constant,
  Param,
  MatMul,
  Add,
  AddRow,
  Sub,
  Mul,
  MulCol,
  Scale,
  AddScalar,
  Concat,
  Slice,
  GatherRows,
  Pick,
  Softmax,
  SegmentSoftmax,
  Relu,
  Elu,
  Tanh,
  Sigmoid,
  Abs,
  Square,
  Sum,
  RowSum,
  SegmentSum,
  SegmentMean,
  Attention,
};

std::string_view op_name(Op op);

struct Node {
  Op op = Op::Constant;
  std::vector<std::uint32_t> inputs;
  Tensor value;
  Tensor grad;
  bool needs_grad = false;
  Parameter* param = nullptr;
  std::vector<std::int64_t> index;
  Segments segments;
  std::size_t aux = 0;
  double scalar = 0.0;
  // Attention: normalized weights laid out [query][head][key in segment].
  std::vector<double> cache;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the reverse of
// creation order is a valid topological order and the graph is acyclic by
// construction. A graph is single-owner; separate graphs may live on separate
// threads as long as they only read shared parameters.
class Graph {
 public:
  Var constant(Tensor value);
  // One node per parameter per graph; gradients flow into Parameter::grad on backward().
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  // Elementwise sum of equal shapes; a (1 x C) right operand broadcasts over rows.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  // Elementwise product of equal shapes; a (R x 1) right operand broadcasts over columns.
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var add_scalar(Var a, double k);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts);
  Var slice(Var a, std::size_t col_begin, std::size_t col_count);
  // Row i of the result is row rows[i] of a, or zeros when rows[i] < 0.
  Var gather_rows(Var a, std::vector<std::int64_t> rows);
  // (R x 1) column holding a(i, cols[i]).
  Var pick(Var a, std::vector<std::int64_t> cols);

  Var softmax(Var a);
  // Softmax down each column independently inside every row segment.
  Var segment_softmax(Var a, Segments seg);
  Var relu(Var a);
  Var elu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var abs(Var a);
  Var square(Var a);

  Var sum(Var a);
  Var mean(Var a);
  Var row_sum(Var a);
  Var segment_sum(Var a, Segments seg);
  Var mean_pool(Var a, Segments seg);

  // Scaled dot-product attention where query row i attends to the key/value
  // rows of segment i. Columns of q/k (and of v) split evenly into `heads`.
  // With key_rows, segment positions index into key_rows, which names the
  // k/v rows to use; rows may be shared between queries.
  Var attention(Var q, Var k, Var v, Segments keys, std::size_t heads, std::vector<std::int64_t> key_rows = {});

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  const Node& node(Var v) const { return nodes_.at(v.id); }
  std::size_t size() const { return nodes_.size(); }

  // Weights of an Attention node for one query and head.
  std::span<const double> attention_weights(Var attn, std::size_t query, std::size_t head) const;

  // Backpropagates from a 1x1 node; parameter gradients are accumulated.
  void backward(Var root);

  // Hash of the active branch of every piecewise op (relu, abs). Two
  // evaluations with equal signatures lie in the same smooth piece.
  std::uint64_t branch_signature() const;

 private:
  Var push(Node node);
  Node& at(Var v) { return nodes_.at(v.id); }
  void accumulate(std::uint32_t id, const Tensor& g);
  void backward_node(std::uint32_t id);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
};

}  // namespace flicker
