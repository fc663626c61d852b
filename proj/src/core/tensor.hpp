#pragma once

// Dense 2-D tensors and a tape-based reverse-mode differentiation graph.
//
// Tensor is a plain value type. Differentiation happens on a Graph: every
// operation appends a node holding its output value, and backward() walks the
// tape in reverse creation order, so each node is visited exactly once.
// Var is a cheap handle (graph pointer + node index) used to chain ops.

#include <cstddef>
#include <deque>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mlada {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  bool same_shape(const Tensor& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  bool all_finite() const noexcept;
  // Copies the listed rows, in order, into a new tensor.
  Tensor select_rows(std::span<const std::size_t> indices) const;
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

enum class OpKind {
  leaf,
  matmul,
  add,
  add_row,
  sub,
  mul,
  mul_scalar,
  add_scalar,
  relu,
  sigmoid,
  softmax_rows,
  log_softmax_rows,
  log_clamped,
  sum,
  mean,
  gather,
  grad_reverse,
  pairwise_sq_dist,
};

std::string_view op_name(OpKind kind);

class Graph;

class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor& value() const;
  // Empty until a backward pass has reached this node.
  const Tensor& adjoint() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  // Value of a 1x1 node.
  double item() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Accumulates d(loss)/d(node) into the adjoint of every node that requires
  // a gradient. Calling twice without zero_adjoints() doubles the adjoints.
  void backward(Var loss);
  void zero_adjoints();

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& adjoint(std::size_t id) const { return nodes_.at(id).adjoint; }
  OpKind op(std::size_t id) const { return nodes_.at(id).op; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Appends a node. Throws NumericError when the value is not finite.
  Var record(OpKind op, std::initializer_list<Var> parents, Tensor value, double scalar = 0.0,
             std::vector<std::size_t> index = {});

 private:
  struct Node {
    OpKind op = OpKind::leaf;
    std::vector<std::size_t> parents;
    Tensor value;
    Tensor adjoint;
    bool requires_grad = false;
    double scalar = 0.0;
    std::vector<std::size_t> index;
  };

  void propagate(const Node& node, const Tensor& upstream, std::vector<Tensor>& pass);

  // A deque keeps references returned by value() and adjoint() valid as
  // later operations append nodes.
  std::deque<Node> nodes_;
};

// Probabilities entering a log are clamped to [kProbFloor, 1].
inline constexpr double kProbFloor = 1e-12;

Var matmul(Var a, Var b);
Var add(Var a, Var b);
// Adds a 1xn row to every row of an mxn input.
Var add_row(Var x, Var row);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var mul_scalar(Var x, double s);
Var add_scalar(Var x, double s);
// Derivative at exactly 0 is 0.
Var relu(Var x);
Var sigmoid(Var x);
Var softmax_rows(Var x);
Var log_softmax_rows(Var x);
// log(clamp(x, kProbFloor, 1)); gradient is zero where the clamp is active.
Var log_clamped(Var x);
Var sum(Var x);
Var mean(Var x);
// Column vector of x's row-major entries at the given flat indices.
Var gather(Var x, std::vector<std::size_t> flat_indices);
// Per row i, the entry at column cols[i].
Var pick(Var x, std::span<const int> cols);
// Identity forward; backward multiplies the incoming adjoint by -scale.
Var grad_reverse(Var x, double scale);
// b x m -> b x b matrix of squared Euclidean row distances.
Var pairwise_sq_dist(Var x);

// Plain (non-graph) helpers.
Tensor softmax_rows(const Tensor& x);
std::size_t argmax(std::span<const double> row);

}  // namespace mlada
