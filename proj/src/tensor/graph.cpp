#include "flicker/tensor/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace flicker {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

MapC view(const Tensor& t) {
  return MapC(t.storage().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
Map view(Tensor& t) {
  return Map(t.storage().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_error(Op op, const Tensor& a, const Tensor& b, const std::string& detail = {}) {
  std::string msg = std::string(op_name(op)) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string();
  if (!detail.empty()) msg += " (" + detail + ")";
  throw std::invalid_argument(msg);
}

void check_segments(Op op, const Segments& seg, std::size_t rows) {
  if (seg.offsets.empty() || seg.offsets.front() != 0 || seg.total() != rows) {
    throw std::invalid_argument(std::string(op_name(op)) + ": segments cover " +
                                std::to_string(seg.offsets.empty() ? 0 : seg.total()) + " rows, input has " +
                                std::to_string(rows));
  }
  for (std::size_t s = 0; s + 1 < seg.offsets.size(); ++s) {
    if (seg.offsets[s] > seg.offsets[s + 1]) {
      throw std::invalid_argument(std::string(op_name(op)) + ": segment offsets must be non-decreasing");
    }
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Param: return "param";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::AddRow: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::MulCol: return "mul";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::GatherRows: return "gather_rows";
    case Op::Pick: return "pick";
    case Op::Softmax: return "softmax";
    case Op::SegmentSoftmax: return "segment_softmax";
    case Op::Relu: return "relu";
    case Op::Elu: return "elu";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Abs: return "abs";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::RowSum: return "row_sum";
    case Op::SegmentSum: return "segment_sum";
    case Op::SegmentMean: return "mean_pool";
    case Op::Attention: return "attention";
  }
  return "unknown";
}

Segments Segments::from_sizes(std::span<const std::size_t> sizes) {
  Segments s;
  s.offsets.reserve(sizes.size() + 1);
  for (auto n : sizes) s.offsets.push_back(s.offsets.back() + n);
  return s;
}

Var Graph::push(Node node) {
  if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max() - 1) {
    throw std::length_error("graph: node limit reached");
  }
  if (node.op != Op::Param) {
    for (auto in : node.inputs) node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  Node n;
  n.op = Op::Param;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.rows()) shape_error(Op::MatMul, A, B, "inner dimensions differ");
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a.id, b.id};
  n.value = Tensor::matrix(A.rows(), B.cols());
  if (A.rows() > 0 && B.cols() > 0) {
    if (A.cols() == 0) {
      n.value.fill(0.0);
    } else {
      view(n.value).noalias() = view(A) * view(B);
    }
  }
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  Node n;
  n.inputs = {a.id, b.id};
  if (A.same_shape(B)) {
    n.op = Op::Add;
    n.value = A;
    add_into(n.value, B);
  } else if (B.rows() == 1 && B.cols() == A.cols()) {
    n.op = Op::AddRow;
    n.value = A;
    for (std::size_t r = 0; r < A.rows(); ++r) {
      auto row = n.value.row_span(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += B[c];
    }
  } else {
    shape_error(Op::Add, A, B);
  }
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B)) shape_error(Op::Sub, A, B);
  Node n;
  n.op = Op::Sub;
  n.inputs = {a.id, b.id};
  n.value = A;
  auto d = n.value.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= B[i];
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  Node n;
  n.inputs = {a.id, b.id};
  n.value = A;
  if (A.same_shape(B)) {
    n.op = Op::Mul;
    auto d = n.value.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= B[i];
  } else if (B.cols() == 1 && B.rows() == A.rows()) {
    n.op = Op::MulCol;
    for (std::size_t r = 0; r < A.rows(); ++r) {
      for (auto& x : n.value.row_span(r)) x *= B[r];
    }
  } else {
    shape_error(Op::Mul, A, B);
  }
  return push(std::move(n));
}

Var Graph::scale(Var a, double k) {
  Node n;
  n.op = Op::Scale;
  n.inputs = {a.id};
  n.scalar = k;
  n.value = value(a);
  for (auto& x : n.value.data()) x *= k;
  return push(std::move(n));
}

Var Graph::add_scalar(Var a, double k) {
  Node n;
  n.op = Op::AddScalar;
  n.inputs = {a.id};
  n.scalar = k;
  n.value = value(a);
  for (auto& x : n.value.data()) x += k;
  return push(std::move(n));
}

Var Graph::concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  for (auto p : parts) {
    const Tensor& t = value(p);
    if (t.rows() != rows) shape_error(Op::Concat, value(parts[0]), t, "row counts differ");
    cols += t.cols();
  }
  Node n;
  n.op = Op::Concat;
  n.value = Tensor::matrix(rows, cols);
  std::size_t off = 0;
  for (auto p : parts) {
    const Tensor& t = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(t.row_span(r).begin(), t.row_span(r).end(), n.value.row_span(r).begin() + off);
    }
    off += t.cols();
    n.inputs.push_back(p.id);
  }
  return push(std::move(n));
}

Var Graph::slice(Var a, std::size_t col_begin, std::size_t col_count) {
  const Tensor& A = value(a);
  if (col_begin + col_count > A.cols()) {
    throw std::invalid_argument("slice: columns [" + std::to_string(col_begin) + ", " +
                                std::to_string(col_begin + col_count) + ") out of range for " + A.shape_string());
  }
  Node n;
  n.op = Op::Slice;
  n.inputs = {a.id};
  n.aux = col_begin;
  n.value = Tensor::matrix(A.rows(), col_count);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    auto src = A.row_span(r).subspan(col_begin, col_count);
    std::copy(src.begin(), src.end(), n.value.row_span(r).begin());
  }
  return push(std::move(n));
}

Var Graph::gather_rows(Var a, std::vector<std::int64_t> rows) {
  const Tensor& A = value(a);
  Node n;
  n.op = Op::GatherRows;
  n.inputs = {a.id};
  n.value = Tensor::matrix(rows.size(), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0) continue;
    if (static_cast<std::size_t>(rows[i]) >= A.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                              A.shape_string());
    }
    auto src = A.row_span(static_cast<std::size_t>(rows[i]));
    std::copy(src.begin(), src.end(), n.value.row_span(i).begin());
  }
  n.index = std::move(rows);
  return push(std::move(n));
}

Var Graph::pick(Var a, std::vector<std::int64_t> cols) {
  const Tensor& A = value(a);
  if (cols.size() != A.rows()) {
    throw std::invalid_argument("pick: " + std::to_string(cols.size()) + " indices for " + A.shape_string());
  }
  Node n;
  n.op = Op::Pick;
  n.inputs = {a.id};
  n.value = Tensor::matrix(A.rows(), 1);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] < 0 || static_cast<std::size_t>(cols[i]) >= A.cols()) {
      throw std::out_of_range("pick: column " + std::to_string(cols[i]) + " out of range for " + A.shape_string());
    }
    n.value[i] = A(i, static_cast<std::size_t>(cols[i]));
  }
  n.index = std::move(cols);
  return push(std::move(n));
}

Var Graph::softmax(Var a) {
  Node n;
  n.op = Op::Softmax;
  n.inputs = {a.id};
  n.value = value(a);
  for (std::size_t r = 0; r < n.value.rows(); ++r) {
    auto row = n.value.row_span(r);
    if (row.empty()) continue;
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (auto& x : row) {
      x = std::exp(x - mx);
      z += x;
    }
    for (auto& x : row) x /= z;
  }
  return push(std::move(n));
}

Var Graph::segment_softmax(Var a, Segments seg) {
  const Tensor& A = value(a);
  check_segments(Op::SegmentSoftmax, seg, A.rows());
  Node n;
  n.op = Op::SegmentSoftmax;
  n.inputs = {a.id};
  n.value = A;
  Tensor& Y = n.value;
  for (std::size_t s = 0; s < seg.count(); ++s) {
    if (seg.size(s) == 0) continue;
    for (std::size_t c = 0; c < Y.cols(); ++c) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) mx = std::max(mx, Y(r, c));
      double z = 0.0;
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
        Y(r, c) = std::exp(Y(r, c) - mx);
        z += Y(r, c);
      }
      for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) Y(r, c) /= z;
    }
  }
  n.segments = std::move(seg);
  return push(std::move(n));
}

namespace {

template <typename F>
Tensor map_values(const Tensor& a, F f) {
  Tensor out = a;
  for (auto& x : out.data()) x = f(x);
  return out;
}

}  // namespace

Var Graph::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.inputs = {a.id};
  n.value = map_values(value(a), [](double x) { return x > 0.0 ? x : 0.0; });
  return push(std::move(n));
}

Var Graph::elu(Var a) {
  Node n;
  n.op = Op::Elu;
  n.inputs = {a.id};
  n.value = map_values(value(a), [](double x) { return x > 0.0 ? x : std::expm1(x); });
  return push(std::move(n));
}

Var Graph::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.inputs = {a.id};
  n.value = map_values(value(a), [](double x) { return std::tanh(x); });
  return push(std::move(n));
}

Var Graph::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.inputs = {a.id};
  n.value = map_values(value(a), [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return push(std::move(n));
}

Var Graph::abs(Var a) {
  Node n;
  n.op = Op::Abs;
  n.inputs = {a.id};
  n.value = map_values(value(a), [](double x) { return std::fabs(x); });
  return push(std::move(n));
}

Var Graph::square(Var a) {
  Node n;
  n.op = Op::Square;
  n.inputs = {a.id};
  n.value = map_values(value(a), [](double x) { return x * x; });
  return push(std::move(n));
}

Var Graph::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.inputs = {a.id};
  double s = 0.0;
  for (double x : value(a).data()) s += x;
  n.value = Tensor::matrix(1, 1, s);
  return push(std::move(n));
}

Var Graph::mean(Var a) {
  const std::size_t count = value(a).size();
  if (count == 0) throw std::invalid_argument("mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(count));
}

Var Graph::row_sum(Var a) {
  const Tensor& A = value(a);
  Node n;
  n.op = Op::RowSum;
  n.inputs = {a.id};
  n.value = Tensor::matrix(A.rows(), 1);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double s = 0.0;
    for (double x : A.row_span(r)) s += x;
    n.value[r] = s;
  }
  return push(std::move(n));
}

Var Graph::segment_sum(Var a, Segments seg) {
  const Tensor& A = value(a);
  check_segments(Op::SegmentSum, seg, A.rows());
  Node n;
  n.op = Op::SegmentSum;
  n.inputs = {a.id};
  n.value = Tensor::matrix(seg.count(), A.cols());
  for (std::size_t s = 0; s < seg.count(); ++s) {
    auto out = n.value.row_span(s);
    for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
      auto in = A.row_span(r);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += in[c];
    }
  }
  n.segments = std::move(seg);
  return push(std::move(n));
}

Var Graph::mean_pool(Var a, Segments seg) {
  const Tensor& A = value(a);
  check_segments(Op::SegmentMean, seg, A.rows());
  Node n;
  n.op = Op::SegmentMean;
  n.inputs = {a.id};
  n.value = Tensor::matrix(seg.count(), A.cols());
  for (std::size_t s = 0; s < seg.count(); ++s) {
    if (seg.size(s) == 0) continue;
    auto out = n.value.row_span(s);
    for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
      auto in = A.row_span(r);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += in[c];
    }
    const double inv = 1.0 / static_cast<double>(seg.size(s));
    for (auto& x : out) x *= inv;
  }
  n.segments = std::move(seg);
  return push(std::move(n));
}

Var Graph::attention(Var q, Var k, Var v, Segments keys, std::size_t heads, std::vector<std::int64_t> key_rows) {
  const Tensor& Q = value(q);
  const Tensor& K = value(k);
  const Tensor& V = value(v);
  if (K.rows() == 0) throw std::invalid_argument("attention: empty key set");
  if (Q.cols() != K.cols()) shape_error(Op::Attention, Q, K, "query/key widths differ");
  if (K.rows() != V.rows()) shape_error(Op::Attention, K, V, "key/value row counts differ");
  if (heads == 0 || Q.cols() % heads != 0 || V.cols() % heads != 0) {
    throw std::invalid_argument("attention: " + std::to_string(heads) + " heads do not divide widths " +
                                Q.shape_string() + " / " + V.shape_string());
  }
  if (keys.count() != Q.rows()) {
    throw std::invalid_argument("attention: " + std::to_string(keys.count()) + " key segments for " +
                                std::to_string(Q.rows()) + " queries");
  }
  check_segments(Op::Attention, keys, key_rows.empty() ? K.rows() : key_rows.size());
  for (std::size_t i = 0; i < keys.count(); ++i) {
    if (keys.size(i) == 0) throw std::invalid_argument("attention: empty key set for query " + std::to_string(i));
  }
  for (auto r : key_rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= K.rows()) {
      throw std::out_of_range("attention: key row " + std::to_string(r) + " out of range for " + K.shape_string());
    }
  }
  auto row = [&key_rows](std::size_t p) {
    return key_rows.empty() ? p : static_cast<std::size_t>(key_rows[p]);
  };

  const std::size_t dq = Q.cols() / heads;
  const std::size_t dv = V.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dq));

  Node n;
  n.op = Op::Attention;
  n.inputs = {q.id, k.id, v.id};
  n.aux = heads;
  n.value = Tensor::matrix(Q.rows(), V.cols());
  n.cache.reserve(heads * K.rows());
  for (std::size_t i = 0; i < Q.rows(); ++i) {
    const std::size_t b = keys.begin(i);
    const std::size_t m = keys.size(i);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t w0 = n.cache.size();
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dq; ++c) s += Q(i, h * dq + c) * K(row(b + j), h * dq + c);
        s *= scale;
        n.cache.push_back(s);
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        n.cache[w0 + j] = std::exp(n.cache[w0 + j] - mx);
        z += n.cache[w0 + j];
      }
      for (std::size_t j = 0; j < m; ++j) n.cache[w0 + j] /= z;
      for (std::size_t j = 0; j < m; ++j) {
        const double w = n.cache[w0 + j];
        for (std::size_t c = 0; c < dv; ++c) n.value(i, h * dv + c) += w * V(row(b + j), h * dv + c);
      }
    }
  }
  n.segments = std::move(keys);
  n.index = std::move(key_rows);
  return push(std::move(n));
}

std::span<const double> Graph::attention_weights(Var attn, std::size_t query, std::size_t head) const {
  const Node& n = nodes_.at(attn.id);
  if (n.op != Op::Attention) throw std::invalid_argument("attention_weights: node is not an attention op");
  // Layout is [query][head][key]; segments are contiguous so offsets are heads * begin.
  const std::size_t m = n.segments.size(query);
  const std::size_t base = n.aux * n.segments.begin(query) + head * m;
  return {n.cache.data() + base, m};
}

void Graph::accumulate(std::uint32_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.empty() && !n.value.empty()) {
    n.grad = g;
  } else {
    add_into(n.grad, g);
  }
}

void Graph::backward(Var root) {
  Node& r = at(root);
  if (r.value.size() != 1) {
    throw std::invalid_argument("backward: root must be 1x1, got " + r.value.shape_string());
  }
  if (!r.value.all_finite()) throw std::runtime_error("backward: non-finite root value");
  for (auto& n : nodes_) n.grad = Tensor{};
  if (!r.needs_grad) return;
  r.grad = Tensor(r.value.shape(), 1.0);
  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.op == Op::Param) {
      Parameter& p = *n.param;
      if (!p.grad.same_shape(p.value)) p.grad = Tensor(p.value.shape(), 0.0);
      add_into(p.grad, n.grad);
      continue;
    }
    backward_node(id);
  }
}

void Graph::backward_node(std::uint32_t id) {
  // Copies keep references stable while accumulate() may touch other nodes.
  const Node& n = nodes_[id];
  const Tensor& G = n.grad;
  auto in = [&](std::size_t i) -> const Node& { return nodes_[n.inputs[i]]; };
  auto wants = [&](std::size_t i) { return nodes_[n.inputs[i]].needs_grad; };

  switch (n.op) {
    case Op::Constant:
    case Op::Param:
      break;
    case Op::MatMul: {
      const Tensor& A = in(0).value;
      const Tensor& B = in(1).value;
      if (wants(0)) {
        Tensor dA = Tensor::matrix(A.rows(), A.cols());
        if (B.cols() > 0) view(dA).noalias() = view(G) * view(B).transpose();
        accumulate(n.inputs[0], dA);
      }
      if (wants(1)) {
        Tensor dB = Tensor::matrix(B.rows(), B.cols());
        if (A.rows() > 0) view(dB).noalias() = view(A).transpose() * view(G);
        accumulate(n.inputs[1], dB);
      }
      break;
    }
    case Op::Add:
      if (wants(0)) accumulate(n.inputs[0], G);
      if (wants(1)) accumulate(n.inputs[1], G);
      break;
    case Op::AddRow: {
      if (wants(0)) accumulate(n.inputs[0], G);
      if (wants(1)) {
        Tensor dB = Tensor::matrix(1, G.cols());
        for (std::size_t r = 0; r < G.rows(); ++r) {
          auto g = G.row_span(r);
          for (std::size_t c = 0; c < g.size(); ++c) dB[c] += g[c];
        }
        accumulate(n.inputs[1], dB);
      }
      break;
    }
    case Op::Sub: {
      if (wants(0)) accumulate(n.inputs[0], G);
      if (wants(1)) {
        Tensor dB = G;
        for (auto& x : dB.data()) x = -x;
        accumulate(n.inputs[1], dB);
      }
      break;
    }
    case Op::Mul: {
      const Tensor& A = in(0).value;
      const Tensor& B = in(1).value;
      if (wants(0)) {
        Tensor dA = G;
        for (std::size_t i = 0; i < dA.size(); ++i) dA[i] *= B[i];
        accumulate(n.inputs[0], dA);
      }
      if (wants(1)) {
        Tensor dB = G;
        for (std::size_t i = 0; i < dB.size(); ++i) dB[i] *= A[i];
        accumulate(n.inputs[1], dB);
      }
      break;
    }
    case Op::MulCol: {
      const Tensor& A = in(0).value;
      const Tensor& B = in(1).value;
      if (wants(0)) {
        Tensor dA = G;
        for (std::size_t r = 0; r < dA.rows(); ++r) {
          for (auto& x : dA.row_span(r)) x *= B[r];
        }
        accumulate(n.inputs[0], dA);
      }
      if (wants(1)) {
        Tensor dB = Tensor::matrix(B.rows(), 1);
        for (std::size_t r = 0; r < A.rows(); ++r) {
          double s = 0.0;
          for (std::size_t c = 0; c < A.cols(); ++c) s += G(r, c) * A(r, c);
          dB[r] = s;
        }
        accumulate(n.inputs[1], dB);
      }
      break;
    }
    case Op::Scale: {
      Tensor dA = G;
      for (auto& x : dA.data()) x *= n.scalar;
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::AddScalar:
      accumulate(n.inputs[0], G);
      break;
    case Op::Concat: {
      std::size_t off = 0;
      for (std::size_t p = 0; p < n.inputs.size(); ++p) {
        const std::size_t c = in(p).value.cols();
        if (wants(p)) {
          Tensor d = Tensor::matrix(G.rows(), c);
          for (std::size_t r = 0; r < G.rows(); ++r) {
            auto src = G.row_span(r).subspan(off, c);
            std::copy(src.begin(), src.end(), d.row_span(r).begin());
          }
          accumulate(n.inputs[p], d);
        }
        off += c;
      }
      break;
    }
    case Op::Slice: {
      const Tensor& A = in(0).value;
      Tensor dA = Tensor::matrix(A.rows(), A.cols());
      for (std::size_t r = 0; r < G.rows(); ++r) {
        auto src = G.row_span(r);
        std::copy(src.begin(), src.end(), dA.row_span(r).begin() + n.aux);
      }
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::GatherRows: {
      const Tensor& A = in(0).value;
      Tensor dA = Tensor::matrix(A.rows(), A.cols());
      for (std::size_t i = 0; i < n.index.size(); ++i) {
        if (n.index[i] < 0) continue;
        auto dst = dA.row_span(static_cast<std::size_t>(n.index[i]));
        auto src = G.row_span(i);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
      }
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Pick: {
      const Tensor& A = in(0).value;
      Tensor dA = Tensor::matrix(A.rows(), A.cols());
      for (std::size_t i = 0; i < n.index.size(); ++i) dA(i, static_cast<std::size_t>(n.index[i])) += G[i];
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Softmax: {
      const Tensor& Y = n.value;
      Tensor dA = Tensor::matrix(Y.rows(), Y.cols());
      for (std::size_t r = 0; r < Y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < Y.cols(); ++c) dot += G(r, c) * Y(r, c);
        for (std::size_t c = 0; c < Y.cols(); ++c) dA(r, c) = Y(r, c) * (G(r, c) - dot);
      }
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::SegmentSoftmax: {
      const Tensor& Y = n.value;
      const Segments& seg = n.segments;
      Tensor dA = Tensor::matrix(Y.rows(), Y.cols());
      for (std::size_t s = 0; s < seg.count(); ++s) {
        for (std::size_t c = 0; c < Y.cols(); ++c) {
          double dot = 0.0;
          for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) dot += G(r, c) * Y(r, c);
          for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) dA(r, c) = Y(r, c) * (G(r, c) - dot);
        }
      }
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Relu: {
      const Tensor& X = in(0).value;
      Tensor dA = G;
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] = X[i] > 0.0 ? dA[i] : 0.0;
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Elu: {
      const Tensor& X = in(0).value;
      const Tensor& Y = n.value;
      Tensor dA = G;
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] *= X[i] > 0.0 ? 1.0 : Y[i] + 1.0;
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Tanh: {
      const Tensor& Y = n.value;
      Tensor dA = G;
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] *= 1.0 - Y[i] * Y[i];
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Sigmoid: {
      const Tensor& Y = n.value;
      Tensor dA = G;
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] *= Y[i] * (1.0 - Y[i]);
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Abs: {
      const Tensor& X = in(0).value;
      Tensor dA = G;
      for (std::size_t i = 0; i < dA.size(); ++i) {
        dA[i] *= X[i] > 0.0 ? 1.0 : (X[i] < 0.0 ? -1.0 : 0.0);
      }
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Square: {
      const Tensor& X = in(0).value;
      Tensor dA = G;
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] *= 2.0 * X[i];
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Sum: {
      const Tensor& A = in(0).value;
      accumulate(n.inputs[0], Tensor(A.shape(), G[0]));
      break;
    }
    case Op::RowSum: {
      const Tensor& A = in(0).value;
      Tensor dA = Tensor::matrix(A.rows(), A.cols());
      for (std::size_t r = 0; r < A.rows(); ++r) {
        for (auto& x : dA.row_span(r)) x = G[r];
      }
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::SegmentSum:
    case Op::SegmentMean: {
      const Tensor& A = in(0).value;
      const Segments& seg = n.segments;
      Tensor dA = Tensor::matrix(A.rows(), A.cols());
      for (std::size_t s = 0; s < seg.count(); ++s) {
        if (seg.size(s) == 0) continue;
        const double k = n.op == Op::SegmentMean ? 1.0 / static_cast<double>(seg.size(s)) : 1.0;
        auto g = G.row_span(s);
        for (std::size_t r = seg.begin(s); r < seg.end(s); ++r) {
          auto d = dA.row_span(r);
          for (std::size_t c = 0; c < d.size(); ++c) d[c] = g[c] * k;
        }
      }
      accumulate(n.inputs[0], dA);
      break;
    }
    case Op::Attention: {
      const Tensor& Q = in(0).value;
      const Tensor& K = in(1).value;
      const Tensor& V = in(2).value;
      const Segments& seg = n.segments;
      const std::size_t heads = n.aux;
      const std::size_t dq = Q.cols() / heads;
      const std::size_t dv = V.cols() / heads;
      const double scale = 1.0 / std::sqrt(static_cast<double>(dq));
      Tensor dQ = Tensor::matrix(Q.rows(), Q.cols());
      Tensor dK = Tensor::matrix(K.rows(), K.cols());
      Tensor dV = Tensor::matrix(V.rows(), V.cols());
      auto row = [&n](std::size_t p) {
        return n.index.empty() ? p : static_cast<std::size_t>(n.index[p]);
      };
      std::vector<double> da;
      for (std::size_t i = 0; i < Q.rows(); ++i) {
        const std::size_t b = seg.begin(i);
        const std::size_t m = seg.size(i);
        for (std::size_t h = 0; h < heads; ++h) {
          const double* w = n.cache.data() + heads * b + h * m;
          da.assign(m, 0.0);
          double dot = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < dv; ++c) {
              const double g = G(i, h * dv + c);
              s += g * V(row(b + j), h * dv + c);
              dV(row(b + j), h * dv + c) += w[j] * g;
            }
            da[j] = s;
            dot += w[j] * s;
          }
          for (std::size_t j = 0; j < m; ++j) {
            const double ds = w[j] * (da[j] - dot) * scale;
            for (std::size_t c = 0; c < dq; ++c) {
              dQ(i, h * dq + c) += ds * K(row(b + j), h * dq + c);
              dK(row(b + j), h * dq + c) += ds * Q(i, h * dq + c);
            }
          }
        }
      }
      if (wants(0)) accumulate(n.inputs[0], dQ);
      if (wants(1)) accumulate(n.inputs[1], dK);
      if (wants(2)) accumulate(n.inputs[2], dV);
      break;
    }
  }
}

std::uint64_t Graph::branch_signature() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (n.op != Op::Relu && n.op != Op::Abs) continue;
    mix(id);
    const Tensor& x = nodes_[n.inputs[0]].value;
    for (double v : x.data()) mix(v > 0.0 ? 1u : (v < 0.0 ? 2u : 3u));
  }
  return h;
}

}  // namespace flicker
