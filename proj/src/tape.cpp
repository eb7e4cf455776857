#include "ugg/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "ugg/common.hpp"

namespace ugg {
namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

// Walks the broadcast output space of (a, b), handing each visit the mapped
// flat indices into a and b. Used for elementwise forwards and backwards so
// the index logic lives in exactly one place.
template <class F>
void bcast_walk(const Shape& as, const Shape& bs, F&& visit) {
  const Shape out = broadcast_shape(as, bs);
  const int64_t rank = static_cast<int64_t>(out.size());
  std::vector<int64_t> sa(static_cast<size_t>(rank), 0), sb(static_cast<size_t>(rank), 0);
  int64_t stride = 1;
  for (int64_t d = rank - 1, ai = static_cast<int64_t>(as.size()) - 1; d >= 0; --d, --ai) {
    if (ai >= 0 && as[static_cast<size_t>(ai)] != 1) sa[static_cast<size_t>(d)] = stride;
    if (ai >= 0) stride *= as[static_cast<size_t>(ai)];
  }
  stride = 1;
  for (int64_t d = rank - 1, bi = static_cast<int64_t>(bs.size()) - 1; d >= 0; --d, --bi) {
    if (bi >= 0 && bs[static_cast<size_t>(bi)] != 1) sb[static_cast<size_t>(d)] = stride;
    if (bi >= 0) stride *= bs[static_cast<size_t>(bi)];
  }
  std::vector<int64_t> idx(static_cast<size_t>(rank), 0);
  const int64_t total = numel(out);
  int64_t ia = 0, ib = 0;
  for (int64_t flat = 0; flat < total; ++flat) {
    visit(flat, ia, ib);
    for (int64_t d = rank - 1; d >= 0; --d) {
      auto du = static_cast<size_t>(d);
      if (++idx[du] < out[du]) { ia += sa[du]; ib += sb[du]; break; }
      ia -= sa[du] * (out[du] - 1);
      ib -= sb[du] * (out[du] - 1);
      idx[du] = 0;
    }
  }
}

struct AxisView {
  int64_t outer, n, inner;
};

AxisView axis_view(const Shape& s, int64_t axis) {
  check(axis >= 0 && axis < static_cast<int64_t>(s.size()),
        "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisView v{1, s[static_cast<size_t>(axis)], 1};
  for (int64_t d = 0; d < axis; ++d) v.outer *= s[static_cast<size_t>(d)];
  for (size_t d = static_cast<size_t>(axis) + 1; d < s.size(); ++d) v.inner *= s[d];
  return v;
}

Shape drop_axis(const Shape& s, int64_t axis, bool keepdim) {
  Shape out = s;
  if (keepdim) out[static_cast<size_t>(axis)] = 1;
  else out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out.empty()) out = {};
  return out;
}

double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
double gelu_bwd(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
         x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

}  // namespace

const Tensor& Var::val() const {
  check(tape != nullptr && id >= 0, "Var is not bound to a tape");
  return tape->value(id);
}

int Tape::push(Node n) {
  if (!grad_enabled_) n.needs_grad = false;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(value);
  n.needs_grad = true;
  return Var{this, push(std::move(n))};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.val = std::move(value);
  n.needs_grad = false;
  return Var{this, push(std::move(n))};
}

double Tape::min_abs_relu_input() const {
  double best = std::numeric_limits<double>::infinity();
  for (const Node& n : nodes_) {
    if (n.op != Op::Relu) continue;
    const Tensor& x = nodes_[static_cast<size_t>(n.in[0])].val;
    for (int64_t i = 0; i < x.size(); ++i) best = std::min(best, std::abs(x[i]));
  }
  return best;
}

Tensor Tape::grad(Var v) const {
  check(v.tape == this, "Var belongs to a different tape");
  const Node& n = nodes_[static_cast<size_t>(v.id)];
  if (n.grad.size() == 0) return Tensor::zeros(n.val.shape());
  return n.grad;
}

namespace {
Tensor& ensure(Tensor& g, const Shape& shape) {
  if (g.size() == 0) g = Tensor::zeros(shape);
  return g;
}
}  // namespace

void Tape::backward(Var scalar_loss) {
  check(scalar_loss.tape == this, "loss Var belongs to a different tape");
  check(grad_enabled_, "backward() on a tape built with gradients disabled");
  Node& top = nodes_[static_cast<size_t>(scalar_loss.id)];
  check(top.val.size() == 1, "backward() target must be a scalar, got " + shape_str(top.val.shape()));
  for (Node& n : nodes_) n.grad = Tensor();
  top.grad = Tensor::full(top.val.shape(), 1.0);
  for (int id = scalar_loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    backward_node(id);
  }
}

void Tape::backward_node(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const Tensor& g = n.grad;
  auto in_node = [&](int slot) -> Node& { return nodes_[static_cast<size_t>(n.in[static_cast<size_t>(slot)])]; };
  auto want = [&](int slot) { return in_node(slot).needs_grad; };

  switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
      return;
    case Op::Add: {
      Node& a = in_node(0); Node& b = in_node(1);
      if (want(0)) ensure(a.grad, a.val.shape());
      if (want(1)) ensure(b.grad, b.val.shape());
      bcast_walk(a.val.shape(), b.val.shape(), [&](int64_t o, int64_t ia, int64_t ib) {
        if (want(0)) a.grad[ia] += g[o];
        if (want(1)) b.grad[ib] += g[o];
      });
      return;
    }
    case Op::Sub: {
      Node& a = in_node(0); Node& b = in_node(1);
      if (want(0)) ensure(a.grad, a.val.shape());
      if (want(1)) ensure(b.grad, b.val.shape());
      bcast_walk(a.val.shape(), b.val.shape(), [&](int64_t o, int64_t ia, int64_t ib) {
        if (want(0)) a.grad[ia] += g[o];
        if (want(1)) b.grad[ib] -= g[o];
      });
      return;
    }
    case Op::Mul: {
      Node& a = in_node(0); Node& b = in_node(1);
      if (want(0)) ensure(a.grad, a.val.shape());
      if (want(1)) ensure(b.grad, b.val.shape());
      bcast_walk(a.val.shape(), b.val.shape(), [&](int64_t o, int64_t ia, int64_t ib) {
        if (want(0)) a.grad[ia] += g[o] * b.val[ib];
        if (want(1)) b.grad[ib] += g[o] * a.val[ia];
      });
      return;
    }
    case Op::Div: {
      Node& a = in_node(0); Node& b = in_node(1);
      if (want(0)) ensure(a.grad, a.val.shape());
      if (want(1)) ensure(b.grad, b.val.shape());
      bcast_walk(a.val.shape(), b.val.shape(), [&](int64_t o, int64_t ia, int64_t ib) {
        const double bv = b.val[ib];
        if (want(0)) a.grad[ia] += g[o] / bv;
        if (want(1)) b.grad[ib] -= g[o] * a.val[ia] / (bv * bv);
      });
      return;
    }
    case Op::Neg: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] -= g[i];
      return;
    }
    case Op::Scale: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] += n.daux * g[i];
      return;
    }
    case Op::AddConst: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
      return;
    }
    case Op::Matmul: {
      Node& a = in_node(0); Node& b = in_node(1);
      const int64_t m = a.val.dim(0), k = a.val.dim(1), p = b.val.dim(1);
      CMap A(a.val.data(), m, k), B(b.val.data(), k, p), G(g.data(), m, p);
      if (want(0)) { ensure(a.grad, a.val.shape()); MMap(a.grad.data(), m, k) += G * B.transpose(); }
      if (want(1)) { ensure(b.grad, b.val.shape()); MMap(b.grad.data(), k, p) += A.transpose() * G; }
      return;
    }
    case Op::Bmm: {
      Node& a = in_node(0); Node& b = in_node(1);
      const int64_t nb = a.val.dim(0), m = a.val.dim(1), k = a.val.dim(2), p = b.val.dim(2);
      if (want(0)) ensure(a.grad, a.val.shape());
      if (want(1)) ensure(b.grad, b.val.shape());
      for (int64_t q = 0; q < nb; ++q) {
        CMap A(a.val.data() + q * m * k, m, k);
        CMap B(b.val.data() + q * k * p, k, p);
        CMap G(g.data() + q * m * p, m, p);
        if (want(0)) MMap(a.grad.data() + q * m * k, m, k) += G * B.transpose();
        if (want(1)) MMap(b.grad.data() + q * k * p, k, p) += A.transpose() * G;
      }
      return;
    }
    case Op::Relu: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i)
        if (a.val[i] > 0.0) a.grad[i] += g[i];
      return;
    }
    case Op::Gelu: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * gelu_bwd(a.val[i]);
      return;
    }
    case Op::Exp: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * n.val[i];
      return;
    }
    case Op::Log: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] / a.val[i];
      return;
    }
    case Op::Sqrt: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * 0.5 / n.val[i];
      return;
    }
    case Op::Square: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * 2.0 * a.val[i];
      return;
    }
    case Op::Sin: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * std::cos(a.val[i]);
      return;
    }
    case Op::Cos: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] -= g[i] * std::sin(a.val[i]);
      return;
    }
    case Op::Softmax: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      const int64_t d = n.val.dim(n.val.rank() - 1);
      const int64_t rows = n.val.size() / d;
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = n.val.data() + r * d;
        const double* gr = g.data() + r * d;
        double dot = 0.0;
        for (int64_t j = 0; j < d; ++j) dot += gr[j] * y[j];
        double* ga = a.grad.data() + r * d;
        for (int64_t j = 0; j < d; ++j) ga[j] += y[j] * (gr[j] - dot);
      }
      return;
    }
    case Op::LogSoftmax: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      const int64_t d = n.val.dim(n.val.rank() - 1);
      const int64_t rows = n.val.size() / d;
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = n.val.data() + r * d;
        const double* gr = g.data() + r * d;
        double gsum = 0.0;
        for (int64_t j = 0; j < d; ++j) gsum += gr[j];
        double* ga = a.grad.data() + r * d;
        for (int64_t j = 0; j < d; ++j) ga[j] += gr[j] - std::exp(y[j]) * gsum;
      }
      return;
    }
    case Op::LayerNorm: {
      Node& x = in_node(0); Node& gm = in_node(1); Node& bt = in_node(2);
      const int64_t d = n.val.dim(n.val.rank() - 1);
      const int64_t rows = n.val.size() / d;
      // taux packs [xhat (rows*d), inv_std (rows)].
      const double* xhat = n.taux.data();
      const double* inv = n.taux.data() + rows * d;
      if (want(1)) {
        ensure(gm.grad, gm.val.shape());
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t j = 0; j < d; ++j) gm.grad[j] += g[r * d + j] * xhat[r * d + j];
      }
      if (want(2)) {
        ensure(bt.grad, bt.val.shape());
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t j = 0; j < d; ++j) bt.grad[j] += g[r * d + j];
      }
      if (want(0)) {
        ensure(x.grad, x.val.shape());
        for (int64_t r = 0; r < rows; ++r) {
          double mean_gh = 0.0, mean_ghx = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            const double gh = g[r * d + j] * gm.val[j];
            mean_gh += gh;
            mean_ghx += gh * xhat[r * d + j];
          }
          mean_gh /= static_cast<double>(d);
          mean_ghx /= static_cast<double>(d);
          for (int64_t j = 0; j < d; ++j) {
            const double gh = g[r * d + j] * gm.val[j];
            x.grad[r * d + j] += inv[r] * (gh - mean_gh - xhat[r * d + j] * mean_ghx);
          }
        }
      }
      return;
    }
    case Op::SumAll: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      const double gv = g[0];
      for (int64_t i = 0; i < a.grad.size(); ++i) a.grad[i] += gv;
      return;
    }
    case Op::SumAxis: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      const AxisView v = axis_view(a.val.shape(), n.a0);
      for (int64_t o = 0; o < v.outer; ++o)
        for (int64_t j = 0; j < v.n; ++j)
          for (int64_t i = 0; i < v.inner; ++i)
            a.grad[(o * v.n + j) * v.inner + i] += g[o * v.inner + i];
      return;
    }
    case Op::MinAxis:
    case Op::MaxAxis: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t o = 0; o < g.size(); ++o) a.grad[n.iaux[static_cast<size_t>(o)]] += g[o];
      return;
    }
    case Op::Reshape: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      for (int64_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
      return;
    }
    case Op::Transpose: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      // n.iaux maps output flat index -> input flat index.
      for (int64_t o = 0; o < g.size(); ++o) a.grad[n.iaux[static_cast<size_t>(o)]] += g[o];
      return;
    }
    case Op::Concat: {
      const AxisView ov = axis_view(n.val.shape(), n.a0);
      int64_t off = 0;
      for (int part : n.extra) {
        Node& a = nodes_[static_cast<size_t>(part)];
        const int64_t an = a.val.dim(n.a0);
        if (a.needs_grad) {
          ensure(a.grad, a.val.shape());
          for (int64_t o = 0; o < ov.outer; ++o)
            for (int64_t j = 0; j < an; ++j)
              for (int64_t i = 0; i < ov.inner; ++i)
                a.grad[(o * an + j) * ov.inner + i] += g[(o * ov.n + off + j) * ov.inner + i];
        }
        off += an;
      }
      return;
    }
    case Op::Slice: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      const AxisView av = axis_view(a.val.shape(), n.a0);
      const int64_t start = n.a1, len = n.a2;
      for (int64_t o = 0; o < av.outer; ++o)
        for (int64_t j = 0; j < len; ++j)
          for (int64_t i = 0; i < av.inner; ++i)
            a.grad[(o * av.n + start + j) * av.inner + i] += g[(o * len + j) * av.inner + i];
      return;
    }
    case Op::GatherRows: {
      Node& a = in_node(0);
      if (!want(0)) return;
      ensure(a.grad, a.val.shape());
      const int64_t row = a.val.size() / a.val.dim(0);
      for (size_t r = 0; r < n.iaux.size(); ++r) {
        const int64_t src = n.iaux[r];
        for (int64_t i = 0; i < row; ++i)
          a.grad[src * row + i] += g[static_cast<int64_t>(r) * row + i];
      }
      return;
    }
    case Op::Cross3: {
      Node& a = in_node(0); Node& b = in_node(1);
      if (want(0)) ensure(a.grad, a.val.shape());
      if (want(1)) ensure(b.grad, b.val.shape());
      const int64_t rows = g.size() / 3;
      for (int64_t r = 0; r < rows; ++r) {
        const double* av = a.val.data() + r * 3;
        const double* bv = b.val.data() + r * 3;
        const double* gv = g.data() + r * 3;
        if (want(0)) {
          // d/da (a x b).g = b x g
          a.grad[r * 3 + 0] += bv[1] * gv[2] - bv[2] * gv[1];
          a.grad[r * 3 + 1] += bv[2] * gv[0] - bv[0] * gv[2];
          a.grad[r * 3 + 2] += bv[0] * gv[1] - bv[1] * gv[0];
        }
        if (want(1)) {
          // d/db (a x b).g = g x a
          b.grad[r * 3 + 0] += gv[1] * av[2] - gv[2] * av[1];
          b.grad[r * 3 + 1] += gv[2] * av[0] - gv[0] * av[2];
          b.grad[r * 3 + 2] += gv[0] * av[1] - gv[1] * av[0];
        }
      }
      return;
    }
  }
  check(false, "unhandled op in backward");
}

// ---- forward builders ----

namespace {

Var binary(Op op, Var a, Var b) {
  check(a.tape == b.tape, "operands live on different tapes");
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  Tensor out(broadcast_shape(av.shape(), bv.shape()));
  bcast_walk(av.shape(), bv.shape(), [&](int64_t o, int64_t ia, int64_t ib) {
    switch (op) {
      case Op::Add: out[o] = av[ia] + bv[ib]; break;
      case Op::Sub: out[o] = av[ia] - bv[ib]; break;
      case Op::Mul: out[o] = av[ia] * bv[ib]; break;
      case Op::Div: out[o] = av[ia] / bv[ib]; break;
      default: check(false, "not elementwise");
    }
  });
  Tape::Node n;
  n.op = op;
  n.in = {a.id, b.id, -1};
  n.val = std::move(out);
  n.needs_grad = t.node(a.id).needs_grad || t.node(b.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var unary(Op op, Var a, double daux = 0.0) {
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  Tensor out(av.shape());
  for (int64_t i = 0; i < av.size(); ++i) {
    const double x = av[i];
    switch (op) {
      case Op::Neg: out[i] = -x; break;
      case Op::Scale: out[i] = daux * x; break;
      case Op::AddConst: out[i] = x + daux; break;
      case Op::Relu: out[i] = x > 0.0 ? x : 0.0; break;
      case Op::Gelu: out[i] = gelu_fwd(x); break;
      case Op::Exp: out[i] = std::exp(x); break;
      case Op::Log: out[i] = std::log(x); break;
      case Op::Sqrt: out[i] = std::sqrt(x); break;
      case Op::Square: out[i] = x * x; break;
      case Op::Sin: out[i] = std::sin(x); break;
      case Op::Cos: out[i] = std::cos(x); break;
      default: check(false, "not unary");
    }
  }
  Tape::Node n;
  n.op = op;
  n.in = {a.id, -1, -1};
  n.val = std::move(out);
  n.daux = daux;
  n.needs_grad = t.node(a.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

}  // namespace

Var add(Var a, Var b) { return binary(Op::Add, a, b); }
Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }
Var divide(Var a, Var b) { return binary(Op::Div, a, b); }
Var neg(Var a) { return unary(Op::Neg, a); }
Var scale(Var a, double c) { return unary(Op::Scale, a, c); }
Var add_const(Var a, double c) { return unary(Op::AddConst, a, c); }
Var relu(Var a) { return unary(Op::Relu, a); }
Var gelu(Var a) { return unary(Op::Gelu, a); }
Var exp_(Var a) { return unary(Op::Exp, a); }
Var log_(Var a) { return unary(Op::Log, a); }
Var sqrt_(Var a) { return unary(Op::Sqrt, a); }
Var square(Var a) { return unary(Op::Square, a); }
Var sin_(Var a) { return unary(Op::Sin, a); }
Var cos_(Var a) { return unary(Op::Cos, a); }

Var matmul(Var a, Var b) {
  check(a.tape == b.tape, "operands live on different tapes");
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  check(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0),
        "matmul shape mismatch: " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  Tensor out({av.dim(0), bv.dim(1)});
  MMap(out.data(), av.dim(0), bv.dim(1)) =
      CMap(av.data(), av.dim(0), av.dim(1)) * CMap(bv.data(), bv.dim(0), bv.dim(1));
  Tape::Node n;
  n.op = Op::Matmul;
  n.in = {a.id, b.id, -1};
  n.val = std::move(out);
  n.needs_grad = t.node(a.id).needs_grad || t.node(b.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var bmm(Var a, Var b) {
  check(a.tape == b.tape, "operands live on different tapes");
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  check(av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0) && av.dim(2) == bv.dim(1),
        "bmm shape mismatch: " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  const int64_t nb = av.dim(0), m = av.dim(1), k = av.dim(2), p = bv.dim(2);
  Tensor out({nb, m, p});
  for (int64_t q = 0; q < nb; ++q)
    MMap(out.data() + q * m * p, m, p) =
        CMap(av.data() + q * m * k, m, k) * CMap(bv.data() + q * k * p, k, p);
  Tape::Node n;
  n.op = Op::Bmm;
  n.in = {a.id, b.id, -1};
  n.val = std::move(out);
  n.needs_grad = t.node(a.id).needs_grad || t.node(b.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var softmax_lastdim(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  check(av.rank() >= 1, "softmax needs rank >= 1");
  const int64_t d = av.dim(av.rank() - 1);
  const int64_t rows = av.size() / d;
  Tensor out(av.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * d;
    double mx = x[0];
    for (int64_t j = 1; j < d; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < d; ++j) { out[r * d + j] = std::exp(x[j] - mx); sum += out[r * d + j]; }
    for (int64_t j = 0; j < d; ++j) out[r * d + j] /= sum;
  }
  Tape::Node n;
  n.op = Op::Softmax;
  n.in = {a.id, -1, -1};
  n.val = std::move(out);
  n.needs_grad = t.node(a.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var log_softmax_lastdim(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  check(av.rank() >= 1, "log_softmax needs rank >= 1");
  const int64_t d = av.dim(av.rank() - 1);
  const int64_t rows = av.size() / d;
  Tensor out(av.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * d;
    double mx = x[0];
    for (int64_t j = 1; j < d; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < d; ++j) sum += std::exp(x[j] - mx);
    const double lse = mx + std::log(sum);
    for (int64_t j = 0; j < d; ++j) out[r * d + j] = x[j] - lse;
  }
  Tape::Node n;
  n.op = Op::LogSoftmax;
  n.in = {a.id, -1, -1};
  n.val = std::move(out);
  n.needs_grad = t.node(a.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var layer_norm_lastdim(Var x, Var gamma, Var beta, double eps) {
  check(x.tape == gamma.tape && x.tape == beta.tape, "operands live on different tapes");
  Tape& t = *x.tape;
  const Tensor& xv = x.val();
  const int64_t d = xv.dim(xv.rank() - 1);
  check(gamma.val().size() == d && beta.val().size() == d, "layer_norm affine size mismatch");
  const int64_t rows = xv.size() / d;
  Tensor out(xv.shape());
  Tensor aux({rows * d + rows});
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) { const double c = xr[j] - mean; var += c * c; }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    aux[rows * d + r] = inv;
    for (int64_t j = 0; j < d; ++j) {
      const double xh = (xr[j] - mean) * inv;
      aux[r * d + j] = xh;
      out[r * d + j] = xh * gamma.val()[j] + beta.val()[j];
    }
  }
  Tape::Node n;
  n.op = Op::LayerNorm;
  n.in = {x.id, gamma.id, beta.id};
  n.val = std::move(out);
  n.taux = std::move(aux);
  n.daux = eps;
  n.needs_grad = t.node(x.id).needs_grad || t.node(gamma.id).needs_grad || t.node(beta.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var sum_all(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  double s = 0.0;
  for (int64_t i = 0; i < av.size(); ++i) s += av[i];
  Tape::Node n;
  n.op = Op::SumAll;
  n.in = {a.id, -1, -1};
  n.val = Tensor::scalar(s);
  n.needs_grad = t.node(a.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var mean_all(Var a) {
  const int64_t sz = a.val().size();
  return scale(sum_all(a), 1.0 / static_cast<double>(sz));
}

Var sum_axis(Var a, int64_t axis, bool keepdim) {
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  const AxisView v = axis_view(av.shape(), axis);
  Tensor out = Tensor::zeros(drop_axis(av.shape(), axis, keepdim));
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t j = 0; j < v.n; ++j)
      for (int64_t i = 0; i < v.inner; ++i)
        out[o * v.inner + i] += av[(o * v.n + j) * v.inner + i];
  Tape::Node n;
  n.op = Op::SumAxis;
  n.in = {a.id, -1, -1};
  n.a0 = axis;
  n.val = std::move(out);
  n.needs_grad = t.node(a.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var mean_axis(Var a, int64_t axis, bool keepdim) {
  const int64_t d = a.val().dim(axis);
  return scale(sum_axis(a, axis, keepdim), 1.0 / static_cast<double>(d));
}

namespace {
Var extremum_axis(Var a, int64_t axis, bool keepdim, bool take_max) {
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  const AxisView v = axis_view(av.shape(), axis);
  check(v.n > 0, "empty reduction axis");
  Tensor out(drop_axis(av.shape(), axis, keepdim));
  std::vector<int64_t> arg(static_cast<size_t>(out.size()));
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t i = 0; i < v.inner; ++i) {
      int64_t best_j = 0;
      double best = av[(o * v.n) * v.inner + i];
      for (int64_t j = 1; j < v.n; ++j) {
        const double x = av[(o * v.n + j) * v.inner + i];
        if (take_max ? (x > best) : (x < best)) { best = x; best_j = j; }
      }
      out[o * v.inner + i] = best;
      arg[static_cast<size_t>(o * v.inner + i)] = (o * v.n + best_j) * v.inner + i;
    }
  Tape::Node n;
  n.op = take_max ? Op::MaxAxis : Op::MinAxis;
  n.in = {a.id, -1, -1};
  n.a0 = axis;
  n.val = std::move(out);
  n.iaux = std::move(arg);
  n.needs_grad = t.node(a.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}
}  // namespace

Var min_axis(Var a, int64_t axis, bool keepdim) { return extremum_axis(a, axis, keepdim, false); }
Var max_axis(Var a, int64_t axis, bool keepdim) { return extremum_axis(a, axis, keepdim, true); }

Var reshape(Var a, Shape shape) {
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  check(numel(shape) == av.size(),
        "reshape " + shape_str(av.shape()) + " -> " + shape_str(shape) + " changes element count");
  Tensor out(shape, std::vector<double>(av.data(), av.data() + av.size()));
  Tape::Node n;
  n.op = Op::Reshape;
  n.in = {a.id, -1, -1};
  n.val = std::move(out);
  n.needs_grad = t.node(a.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var transpose(Var a, std::vector<int64_t> perm) {
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  const int64_t rank = av.rank();
  check(static_cast<int64_t>(perm.size()) == rank, "transpose perm rank mismatch");
  Shape out_shape(static_cast<size_t>(rank));
  for (int64_t d = 0; d < rank; ++d) out_shape[static_cast<size_t>(d)] = av.dim(perm[static_cast<size_t>(d)]);
  std::vector<int64_t> in_strides(static_cast<size_t>(rank), 1);
  for (int64_t d = rank - 2; d >= 0; --d)
    in_strides[static_cast<size_t>(d)] = in_strides[static_cast<size_t>(d) + 1] * av.dim(d + 1);
  Tensor out(out_shape);
  std::vector<int64_t> map(static_cast<size_t>(out.size()));
  std::vector<int64_t> idx(static_cast<size_t>(rank), 0);
  for (int64_t o = 0; o < out.size(); ++o) {
    int64_t src = 0;
    for (int64_t d = 0; d < rank; ++d)
      src += idx[static_cast<size_t>(d)] * in_strides[static_cast<size_t>(perm[static_cast<size_t>(d)])];
    out[o] = av[src];
    map[static_cast<size_t>(o)] = src;
    for (int64_t d = rank - 1; d >= 0; --d) {
      auto du = static_cast<size_t>(d);
      if (++idx[du] < out_shape[du]) break;
      idx[du] = 0;
    }
  }
  Tape::Node n;
  n.op = Op::Transpose;
  n.in = {a.id, -1, -1};
  n.val = std::move(out);
  n.iaux = std::move(map);
  n.needs_grad = t.node(a.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var concat(const std::vector<Var>& parts, int64_t axis) {
  check(!parts.empty(), "concat of zero tensors");
  Tape& t = *parts[0].tape;
  const Shape& s0 = parts[0].val().shape();
  int64_t total = 0;
  bool needs = false;
  for (const Var& p : parts) {
    check(p.tape == &t, "operands live on different tapes");
    const Shape& s = p.val().shape();
    check(s.size() == s0.size(), "concat rank mismatch");
    for (size_t d = 0; d < s.size(); ++d)
      if (static_cast<int64_t>(d) != axis)
        check(s[d] == s0[d], "concat off-axis dim mismatch");
    total += p.val().dim(axis);
    needs = needs || t.node(p.id).needs_grad;
  }
  Shape out_shape = s0;
  out_shape[static_cast<size_t>(axis)] = total;
  Tensor out(out_shape);
  const AxisView ov = axis_view(out_shape, axis);
  int64_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.val();
    const int64_t pn = pv.dim(axis);
    for (int64_t o = 0; o < ov.outer; ++o)
      for (int64_t j = 0; j < pn; ++j)
        for (int64_t i = 0; i < ov.inner; ++i)
          out[(o * ov.n + off + j) * ov.inner + i] = pv[(o * pn + j) * ov.inner + i];
    off += pn;
  }
  Tape::Node n;
  n.op = Op::Concat;
  n.a0 = axis;
  n.val = std::move(out);
  n.needs_grad = needs;
  for (const Var& p : parts) n.extra.push_back(p.id);
  return Var{&t, t.push(std::move(n))};
}

Var slice(Var a, int64_t axis, int64_t start, int64_t len) {
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  const AxisView v = axis_view(av.shape(), axis);
  check(start >= 0 && len >= 0 && start + len <= v.n,
        "slice [" + std::to_string(start) + "," + std::to_string(start + len) + ") out of range for " +
            shape_str(av.shape()));
  Shape out_shape = av.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  Tensor out(out_shape);
  for (int64_t o = 0; o < v.outer; ++o)
    for (int64_t j = 0; j < len; ++j)
      for (int64_t i = 0; i < v.inner; ++i)
        out[(o * len + j) * v.inner + i] = av[(o * v.n + start + j) * v.inner + i];
  Tape::Node n;
  n.op = Op::Slice;
  n.in = {a.id, -1, -1};
  n.a0 = axis;
  n.a1 = start;
  n.a2 = len;
  n.val = std::move(out);
  n.needs_grad = t.node(a.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var gather_rows(Var table, const std::vector<int64_t>& indices) {
  Tape& t = *table.tape;
  const Tensor& tv = table.val();
  check(tv.rank() >= 1, "gather_rows needs rank >= 1");
  const int64_t rows = tv.dim(0);
  const int64_t rowsz = tv.size() / rows;
  Shape out_shape = tv.shape();
  out_shape[0] = static_cast<int64_t>(indices.size());
  Tensor out(out_shape);
  for (size_t r = 0; r < indices.size(); ++r) {
    const int64_t src = indices[r];
    check(src >= 0 && src < rows, "gather_rows index out of range");
    for (int64_t i = 0; i < rowsz; ++i)
      out[static_cast<int64_t>(r) * rowsz + i] = tv[src * rowsz + i];
  }
  Tape::Node n;
  n.op = Op::GatherRows;
  n.in = {table.id, -1, -1};
  n.val = std::move(out);
  n.iaux = indices;
  n.needs_grad = t.node(table.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var cross3(Var a, Var b) {
  check(a.tape == b.tape, "operands live on different tapes");
  Tape& t = *a.tape;
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  check(av.same_shape(bv) && av.dim(av.rank() - 1) == 3, "cross3 wants matching [...,3] shapes");
  Tensor out(av.shape());
  const int64_t rows = av.size() / 3;
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * 3;
    const double* y = bv.data() + r * 3;
    out[r * 3 + 0] = x[1] * y[2] - x[2] * y[1];
    out[r * 3 + 1] = x[2] * y[0] - x[0] * y[2];
    out[r * 3 + 2] = x[0] * y[1] - x[1] * y[0];
  }
  Tape::Node n;
  n.op = Op::Cross3;
  n.in = {a.id, b.id, -1};
  n.val = std::move(out);
  n.needs_grad = t.node(a.id).needs_grad || t.node(b.id).needs_grad;
  return Var{&t, t.push(std::move(n))};
}

Var stack0(const std::vector<Var>& parts) {
  std::vector<Var> lifted;
  lifted.reserve(parts.size());
  for (const Var& p : parts) {
    Shape s = p.val().shape();
    s.insert(s.begin(), 1);
    lifted.push_back(reshape(p, s));
  }
  return concat(lifted, 0);
}

Var l2norm_lastdim(Var a, double eps, bool keepdim) {
  Var s = sum_axis(square(a), a.val().rank() - 1, keepdim);
  return sqrt_(add_const(s, eps));
}

Var dot_lastdim(Var a, Var b, bool keepdim) {
  return sum_axis(mul(a, b), a.val().rank() - 1, keepdim);
}

}  // namespace ugg
