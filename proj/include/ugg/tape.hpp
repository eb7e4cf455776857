#pragma once

#include <array>
#include <vector>

#include "ugg/tensor.hpp"

namespace ugg {

class Tape;

// Handle to a node on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  const Tensor& val() const;
  const Shape& shape() const { return val().shape(); }
};

enum class Op {
  Leaf, Constant,
  Add, Sub, Mul, Div,
  Neg, Scale, AddConst,
  Matmul, Bmm,
  Relu, Gelu, Exp, Log, Sqrt, Square, Sin, Cos,
  Softmax, LogSoftmax, LayerNorm,
  SumAll, SumAxis, MinAxis, MaxAxis,
  Reshape, Transpose, Concat, Slice, GatherRows,
  Cross3,
};

// Reverse-mode tape over a fixed op vocabulary. Build the graph with the free
// functions below, call backward() on a scalar, read grads with grad().
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Var leaf(Tensor value);       // differentiable input
  Var constant(Tensor value);   // non-differentiable input

  void backward(Var scalar_loss);
  // Gradient of the last backward() target w.r.t. this node (zeros if unused).
  Tensor grad(Var v) const;

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].val; }
  size_t num_nodes() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

  // Smallest |input| over all Relu nodes recorded so far; used by gradient
  // checks to reject configurations sitting on a kink. Returns +inf if the
  // tape holds no Relu.
  double min_abs_relu_input() const;

  struct Node {
    Op op;
    std::array<int, 3> in{-1, -1, -1};
    std::vector<int> extra;      // Concat operands
    Tensor val;
    Tensor grad;                 // allocated lazily during backward
    bool needs_grad = false;
    std::vector<int64_t> iaux;   // perm / indices / arg positions
    int64_t a0 = 0, a1 = 0, a2 = 0;
    double daux = 0.0;
    Tensor taux;                 // op-specific saved state (layernorm)
  };

  int push(Node n);
  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

 private:
  void backward_node(int id);
  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// ---- graph builders ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var divide(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_const(Var a, double c);

Var matmul(Var a, Var b);   // [m,k] x [k,n]
Var bmm(Var a, Var b);      // [B,m,k] x [B,k,n]

Var relu(Var a);
Var gelu(Var a);
Var exp_(Var a);
Var log_(Var a);
Var sqrt_(Var a);
Var square(Var a);
Var sin_(Var a);
Var cos_(Var a);

Var softmax_lastdim(Var a);
Var log_softmax_lastdim(Var a);
Var layer_norm_lastdim(Var x, Var gamma, Var beta, double eps = 1e-5);

Var sum_all(Var a);                                  // -> scalar
Var sum_axis(Var a, int64_t axis, bool keepdim);
Var mean_axis(Var a, int64_t axis, bool keepdim);
Var min_axis(Var a, int64_t axis, bool keepdim);
Var max_axis(Var a, int64_t axis, bool keepdim);
Var mean_all(Var a);

Var reshape(Var a, Shape shape);
Var transpose(Var a, std::vector<int64_t> perm);
Var concat(const std::vector<Var>& parts, int64_t axis);
Var slice(Var a, int64_t axis, int64_t start, int64_t len);
Var gather_rows(Var table, const std::vector<int64_t>& indices);
Var cross3(Var a, Var b);   // [...,3] x [...,3]

// Convenience compositions.
Var stack0(const std::vector<Var>& parts);           // new leading axis
Var l2norm_lastdim(Var a, double eps, bool keepdim); // sqrt(sum(a^2) + eps)
Var dot_lastdim(Var a, Var b, bool keepdim);         // sum(a*b) over last axis

}  // namespace ugg
