#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace mlada {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("tensor of shape " + shape_string() + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged row list");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(values));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::select_rows(std::span<const std::size_t> indices) const {
  Tensor out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw ShapeError("row index out of range");
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.values_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

std::string Tensor::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::add_row: return "add_row";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::mul_scalar: return "mul_scalar";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softmax_rows: return "softmax_rows";
    case OpKind::log_softmax_rows: return "log_softmax_rows";
    case OpKind::log_clamped: return "log_clamped";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::gather: return "gather";
    case OpKind::grad_reverse: return "grad_reverse";
    case OpKind::pairwise_sq_dist: return "pairwise_sq_dist";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->value(id_); }
const Tensor& Var::adjoint() const { return graph_->adjoint(id_); }

double Var::item() const {
  const Tensor& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("item() on " + v.shape_string() + " node");
  return v[0];
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("leaf tensor contains a non-finite value");
  Node node;
  node.op = OpKind::leaf;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(OpKind op, std::initializer_list<Var> parents, Tensor value, double scalar,
                  std::vector<std::size_t> index) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op_name(op)) + " produced a non-finite value");
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.scalar = scalar;
  node.index = std::move(index);
  for (Var p : parents) {
    if (&p.graph() != this) throw UsageError("operands belong to different graphs");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Graph::zero_adjoints() {
  for (Node& n : nodes_) {
    if (!n.adjoint.empty()) std::fill(n.adjoint.values().begin(), n.adjoint.values().end(), 0.0);
  }
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw UsageError("loss belongs to a different graph");
  const Tensor& root = nodes_[loss.id()].value;
  if (root.rows() != 1 || root.cols() != 1) {
    throw UsageError("backward() needs a 1x1 loss, got " + root.shape_string());
  }
  // Adjoints of this pass are built separately so that repeated calls add
  // exactly one gradient per call to the stored adjoints.
  std::vector<Tensor> pass(loss.id() + 1);
  pass[loss.id()] = Tensor::scalar(1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || pass[id].empty()) continue;
    propagate(node, pass[id], pass);
  }
  for (std::size_t id = 0; id <= loss.id(); ++id) {
    Node& node = nodes_[id];
    if (!node.requires_grad) continue;
    if (node.adjoint.empty()) node.adjoint = Tensor(node.value.rows(), node.value.cols());
    if (pass[id].empty()) continue;
    auto dst = node.adjoint.values();
    auto src = pass[id].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

namespace {

Tensor& slot(std::vector<Tensor>& pass, std::size_t id, const Tensor& like) {
  if (pass[id].empty()) pass[id] = Tensor(like.rows(), like.cols());
  return pass[id];
}

}  // namespace

void Graph::propagate(const Node& node, const Tensor& g, std::vector<Tensor>& pass) {
  auto wants = [&](std::size_t k) { return nodes_[node.parents[k]].requires_grad; };
  auto parent_value = [&](std::size_t k) -> const Tensor& { return nodes_[node.parents[k]].value; };
  auto target = [&](std::size_t k) -> Tensor& {
    return slot(pass, node.parents[k], nodes_[node.parents[k]].value);
  };
  const Tensor& y = node.value;

  switch (node.op) {
    case OpKind::leaf:
      break;
    case OpKind::matmul: {
      const Tensor& a = parent_value(0);
      const Tensor& b = parent_value(1);
      const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
      if (wants(0)) {
        Tensor& da = target(0);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g(i, j) * b(p, j);
            da(i, p) += acc;
          }
      }
      if (wants(1)) {
        Tensor& db = target(1);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            for (std::size_t j = 0; j < n; ++j) db(p, j) += av * g(i, j);
          }
      }
      break;
    }
    case OpKind::add:
    case OpKind::sub: {
      const double sign = node.op == OpKind::sub ? -1.0 : 1.0;
      if (wants(0)) {
        Tensor& d = target(0);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      if (wants(1)) {
        Tensor& d = target(1);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += sign * g[i];
      }
      break;
    }
    case OpKind::add_row: {
      if (wants(0)) {
        Tensor& d = target(0);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      if (wants(1)) {
        Tensor& d = target(1);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) d[c] += g(r, c);
      }
      break;
    }
    case OpKind::mul: {
      const Tensor& a = parent_value(0);
      const Tensor& b = parent_value(1);
      if (wants(0)) {
        Tensor& d = target(0);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * b[i];
      }
      if (wants(1)) {
        Tensor& d = target(1);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * a[i];
      }
      break;
    }
    case OpKind::mul_scalar:
    case OpKind::grad_reverse: {
      const double s = node.op == OpKind::grad_reverse ? -node.scalar : node.scalar;
      Tensor& d = target(0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += s * g[i];
      break;
    }
    case OpKind::add_scalar: {
      Tensor& d = target(0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      break;
    }
    case OpKind::relu: {
      const Tensor& x = parent_value(0);
      Tensor& d = target(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > 0.0) d[i] += g[i];
      break;
    }
    case OpKind::sigmoid: {
      Tensor& d = target(0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case OpKind::softmax_rows: {
      Tensor& d = target(0);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) += y(r, c) * (g(r, c) - dot);
      }
      break;
    }
    case OpKind::log_softmax_rows: {
      Tensor& d = target(0);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) total += g(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) += g(r, c) - std::exp(y(r, c)) * total;
      }
      break;
    }
    case OpKind::log_clamped: {
      const Tensor& x = parent_value(0);
      Tensor& d = target(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] >= kProbFloor && x[i] <= 1.0) d[i] += g[i] / x[i];
      break;
    }
    case OpKind::sum:
    case OpKind::mean: {
      const Tensor& x = parent_value(0);
      const double s = node.op == OpKind::mean ? g[0] / static_cast<double>(x.size()) : g[0];
      Tensor& d = target(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s;
      break;
    }
    case OpKind::gather: {
      Tensor& d = target(0);
      for (std::size_t k = 0; k < node.index.size(); ++k) d[node.index[k]] += g[k];
      break;
    }
    case OpKind::pairwise_sq_dist: {
      const Tensor& x = parent_value(0);
      Tensor& d = target(0);
      const std::size_t b = x.rows(), m = x.cols();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
          if (i == j) continue;
          const double w = 2.0 * (g(i, j) + g(j, i));
          if (w == 0.0) continue;
          for (std::size_t c = 0; c < m; ++c) d(i, c) += w * (x(i, c) - x(j, c));
        }
      break;
    }
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + av.shape_string() + " * " +
                     bv.shape_string());
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av(i, p);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += s * bv(p, j);
    }
  return a.graph().record(OpKind::matmul, {a, b}, std::move(out));
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.graph().record(OpKind::add, {a, b}, std::move(out));
}

Var add_row(Var x, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw ShapeError("add_row: cannot add " + rv.shape_string() + " to rows of " +
                     xv.shape_string());
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += rv[c];
  return x.graph().record(OpKind::add_row, {x, row}, std::move(out));
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.graph().record(OpKind::sub, {a, b}, std::move(out));
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.graph().record(OpKind::mul, {a, b}, std::move(out));
}

Var mul_scalar(Var x, double s) {
  return x.graph().record(OpKind::mul_scalar, {x}, map_values(x.value(), [s](double v) { return v * s; }), s);
}

Var add_scalar(Var x, double s) {
  return x.graph().record(OpKind::add_scalar, {x}, map_values(x.value(), [s](double v) { return v + s; }), s);
}

Var relu(Var x) {
  return x.graph().record(OpKind::relu, {x},
                          map_values(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }));
}

Var sigmoid(Var x) {
  auto f = [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return x.graph().record(OpKind::sigmoid, {x}, map_values(x.value(), f));
}

Tensor softmax_rows(const Tensor& x) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto dst = out.row(r);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - peak);
      total += dst[c];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

Var softmax_rows(Var x) {
  return x.graph().record(OpKind::softmax_rows, {x}, softmax_rows(x.value()));
}

Var log_softmax_rows(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto in = xv.row(r);
    auto dst = out.row(r);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (double v : in) total += std::exp(v - peak);
    const double lse = peak + std::log(total);
    for (std::size_t c = 0; c < in.size(); ++c) dst[c] = in[c] - lse;
  }
  return x.graph().record(OpKind::log_softmax_rows, {x}, std::move(out));
}

Var log_clamped(Var x) {
  return x.graph().record(OpKind::log_clamped, {x}, map_values(x.value(), [](double v) {
                            return std::log(std::clamp(v, kProbFloor, 1.0));
                          }));
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return x.graph().record(OpKind::sum, {x}, Tensor::scalar(total));
}

Var mean(Var x) {
  const Tensor& xv = x.value();
  if (xv.empty()) throw ShapeError("mean of an empty tensor");
  double total = 0.0;
  for (double v : xv.values()) total += v;
  return x.graph().record(OpKind::mean, {x}, Tensor::scalar(total / static_cast<double>(xv.size())));
}

Var gather(Var x, std::vector<std::size_t> flat_indices) {
  const Tensor& xv = x.value();
  Tensor out(flat_indices.size(), 1);
  for (std::size_t k = 0; k < flat_indices.size(); ++k) {
    if (flat_indices[k] >= xv.size()) throw ShapeError("gather: index out of range");
    out[k] = xv[flat_indices[k]];
  }
  return x.graph().record(OpKind::gather, {x}, std::move(out), 0.0, std::move(flat_indices));
}

Var pick(Var x, std::span<const int> cols) {
  const Tensor& xv = x.value();
  if (cols.size() != xv.rows()) {
    throw ShapeError("pick: " + std::to_string(cols.size()) + " column indices for " +
                     xv.shape_string());
  }
  std::vector<std::size_t> flat(cols.size());
  for (std::size_t r = 0; r < cols.size(); ++r) {
    if (cols[r] < 0 || static_cast<std::size_t>(cols[r]) >= xv.cols()) {
      throw UsageError("label " + std::to_string(cols[r]) + " outside [0, " +
                       std::to_string(xv.cols()) + ")");
    }
    flat[r] = r * xv.cols() + static_cast<std::size_t>(cols[r]);
  }
  return gather(x, std::move(flat));
}

Var grad_reverse(Var x, double scale) {
  if (!(scale >= 0.0)) throw UsageError("grad_reverse: scale must be non-negative");
  return x.graph().record(OpKind::grad_reverse, {x}, x.value(), scale);
}

Var pairwise_sq_dist(Var x) {
  const Tensor& xv = x.value();
  const std::size_t b = xv.rows();
  Tensor out(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < xv.cols(); ++c) {
        const double diff = xv(i, c) - xv(j, c);
        acc += diff * diff;
      }
      out(i, j) = acc;
      out(j, i) = acc;
    }
  return x.graph().record(OpKind::pairwise_sq_dist, {x}, std::move(out));
}

std::size_t argmax(std::span<const double> row) {
  if (row.empty()) throw UsageError("argmax of an empty row");
  // First maximum wins ties.
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace mlada
