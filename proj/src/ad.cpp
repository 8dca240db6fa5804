#include "ocs/ad.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace ocs::ad {

namespace {

std::atomic<std::int64_t> g_alive{0};
std::atomic<std::int64_t> g_peak_alive{0};

void bump_alive() {
  auto n = ++g_alive;
  auto peak = g_peak_alive.load(std::memory_order_relaxed);
  while (n > peak &&
         !g_peak_alive.compare_exchange_weak(peak, n, std::memory_order_relaxed)) {
  }
}

// sum g over dims that were broadcast from size 1 up to the target shape
Array reduce_to(const Array& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Array out = g;
  if (rows == 1 && out.rows() > 1) out = out.colwise().sum().eval();
  if (cols == 1 && out.cols() > 1) out = out.rowwise().sum().eval();
  return out;
}

Array broadcast(const Array& a, Eigen::Index rows, Eigen::Index cols) {
  if (a.rows() == rows && a.cols() == cols) return a;
  Array out(rows, cols);
  if (a.rows() == 1 && a.cols() == 1) {
    out.setConstant(a(0, 0));
  } else if (a.rows() == 1) {
    out = a.row(0).replicate(rows, 1);
  } else {
    out = a.col(0).replicate(1, cols);
  }
  return out;
}

void check_broadcastable(const Var& a, const Var& b) {
  auto ok = [](Eigen::Index x, Eigen::Index y) { return x == y || x == 1 || y == 1; };
  if (!ok(a.rows(), b.rows()) || !ok(a.cols(), b.cols()))
    throw std::invalid_argument("ad: shapes not broadcastable");
}

NodePtr make_node(Array val) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  return n;
}

// records parents + backward only when a gradient can flow
Var make_op(Array val, std::initializer_list<Var> inputs,
            std::function<void(Node&)> bwd) {
  auto n = make_node(std::move(val));
  bool rg = false;
  for (const auto& in : inputs) rg = rg || in.requires_grad();
  if (rg) {
    n->requires_grad = true;
    for (const auto& in : inputs) n->parents.push_back(in.node());
    n->backward_fn = std::move(bwd);
  }
  return Var(n);
}

}  // namespace

Node::Node() { bump_alive(); }
Node::~Node() { --g_alive; }

std::int64_t Node::alive_count() { return g_alive.load(); }
std::int64_t Node::peak_alive_count() { return g_peak_alive.load(); }
void Node::reset_peak_alive() { g_peak_alive.store(g_alive.load()); }

void Node::accumulate(const Array& g) {
  if (!grad_set) {
    grad = g;
    grad_set = true;
  } else {
    grad += g;
  }
}

Var Var::constant(Array v) { return Var(make_node(std::move(v))); }

Var Var::constant(double v) {
  Array a(1, 1);
  a(0, 0) = v;
  return constant(std::move(a));
}

Var Var::param(Array v) {
  auto n = make_node(std::move(v));
  n->requires_grad = true;
  return Var(n);
}

Array Var::grad() const {
  if (!node_->grad_set) return Array::Zero(node_->val.rows(), node_->val.cols());
  return node_->grad;
}

void Var::zero_grad() const {
  node_->grad_set = false;
  node_->grad.resize(0, 0);
}

// ---------------------------------------------------------------------------
// elementwise binary with broadcasting

namespace {

enum class BinOp { Add, Sub, Mul, Div };

Var binary(const Var& a, const Var& b, BinOp op) {
  check_broadcastable(a, b);
  Eigen::Index rows = std::max(a.rows(), b.rows());
  Eigen::Index cols = std::max(a.cols(), b.cols());
  Array av = broadcast(a.value(), rows, cols);
  Array bv = broadcast(b.value(), rows, cols);
  Array val;
  switch (op) {
    case BinOp::Add: val = av + bv; break;
    case BinOp::Sub: val = av - bv; break;
    case BinOp::Mul: val = av * bv; break;
    case BinOp::Div: val = av / bv; break;
  }
  auto ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
  auto an = a.node(), bn = b.node();
  return make_op(std::move(val), {a, b}, [=](Node& self) {
    switch (op) {
      case BinOp::Add:
        if (an->requires_grad) an->accumulate(reduce_to(self.grad, ar, ac));
        if (bn->requires_grad) bn->accumulate(reduce_to(self.grad, br, bc));
        break;
      case BinOp::Sub:
        if (an->requires_grad) an->accumulate(reduce_to(self.grad, ar, ac));
        if (bn->requires_grad) bn->accumulate(reduce_to(-self.grad, br, bc));
        break;
      case BinOp::Mul:
        if (an->requires_grad)
          an->accumulate(reduce_to(self.grad * broadcast(bn->val, self.val.rows(), self.val.cols()), ar, ac));
        if (bn->requires_grad)
          bn->accumulate(reduce_to(self.grad * broadcast(an->val, self.val.rows(), self.val.cols()), br, bc));
        break;
      case BinOp::Div: {
        Array bb = broadcast(bn->val, self.val.rows(), self.val.cols());
        if (an->requires_grad) an->accumulate(reduce_to(self.grad / bb, ar, ac));
        if (bn->requires_grad) {
          Array ab = broadcast(an->val, self.val.rows(), self.val.cols());
          bn->accumulate(reduce_to(-self.grad * ab / (bb * bb), br, bc));
        }
        break;
      }
    }
  });
}

}  // namespace

Var operator+(const Var& a, const Var& b) { return binary(a, b, BinOp::Add); }
Var operator-(const Var& a, const Var& b) { return binary(a, b, BinOp::Sub); }
Var operator*(const Var& a, const Var& b) { return binary(a, b, BinOp::Mul); }
Var operator/(const Var& a, const Var& b) { return binary(a, b, BinOp::Div); }

Var operator-(const Var& a) {
  auto an = a.node();
  return make_op(-a.value(), {a}, [an](Node& self) { an->accumulate(-self.grad); });
}

Var operator+(const Var& a, double s) {
  auto an = a.node();
  return make_op(a.value() + s, {a}, [an](Node& self) { an->accumulate(self.grad); });
}
Var operator+(double s, const Var& a) { return a + s; }
Var operator-(const Var& a, double s) { return a + (-s); }
Var operator-(double s, const Var& a) { return -a + s; }

Var operator*(const Var& a, double s) {
  auto an = a.node();
  return make_op(a.value() * s, {a},
                 [an, s](Node& self) { an->accumulate(self.grad * s); });
}
Var operator*(double s, const Var& a) { return a * s; }
Var operator/(const Var& a, double s) { return a * (1.0 / s); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("ad: matmul shape mismatch");
  Array val = (a.value().matrix() * b.value().matrix()).array();
  auto an = a.node(), bn = b.node();
  return make_op(std::move(val), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad)
      an->accumulate((self.grad.matrix() * bn->val.matrix().transpose()).array());
    if (bn->requires_grad)
      bn->accumulate((an->val.matrix().transpose() * self.grad.matrix()).array());
  });
}

// ---------------------------------------------------------------------------
// elementwise unary

Var exp(const Var& a) {
  Array v = a.value().exp();
  auto an = a.node();
  return make_op(v, {a}, [an, v](Node& self) { an->accumulate(self.grad * v); });
}

Var log(const Var& a) {
  auto an = a.node();
  return make_op(a.value().log(), {a},
                 [an](Node& self) { an->accumulate(self.grad / an->val); });
}

Var sin(const Var& a) {
  auto an = a.node();
  return make_op(a.value().sin(), {a},
                 [an](Node& self) { an->accumulate(self.grad * an->val.cos()); });
}

Var cos(const Var& a) {
  auto an = a.node();
  return make_op(a.value().cos(), {a},
                 [an](Node& self) { an->accumulate(-self.grad * an->val.sin()); });
}

Var tanh(const Var& a) {
  Array v = a.value().tanh();
  auto an = a.node();
  return make_op(v, {a},
                 [an, v](Node& self) { an->accumulate(self.grad * (1.0 - v * v)); });
}

Var sigmoid(const Var& a) {
  Array v = 1.0 / (1.0 + (-a.value()).exp());
  auto an = a.node();
  return make_op(v, {a},
                 [an, v](Node& self) { an->accumulate(self.grad * v * (1.0 - v)); });
}

Var softplus(const Var& a) {
  // log(1 + e^x) computed stably as max(x,0) + log1p(e^-|x|)
  Array x = a.value();
  Array v = x.max(0.0) + (1.0 + (-x.abs()).exp()).log();
  Array sig = 1.0 / (1.0 + (-x).exp());
  auto an = a.node();
  return make_op(v, {a},
                 [an, sig](Node& self) { an->accumulate(self.grad * sig); });
}

Var relu(const Var& a) {
  Array v = a.value().max(0.0);
  Array mask = (a.value() > 0.0).cast<double>();
  auto an = a.node();
  return make_op(v, {a},
                 [an, mask](Node& self) { an->accumulate(self.grad * mask); });
}

Var sqrt(const Var& a) {
  Array v = a.value().sqrt();
  auto an = a.node();
  return make_op(v, {a},
                 [an, v](Node& self) { an->accumulate(self.grad * 0.5 / v); });
}

Var square(const Var& a) {
  auto an = a.node();
  return make_op(a.value().square(), {a}, [an](Node& self) {
    an->accumulate(self.grad * 2.0 * an->val);
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Array v = a.value().max(lo).min(hi);
  Array mask = ((a.value() > lo) && (a.value() < hi)).cast<double>();
  auto an = a.node();
  return make_op(v, {a},
                 [an, mask](Node& self) { an->accumulate(self.grad * mask); });
}

Var max_with(const Var& a, double floor) {
  Array v = a.value().max(floor);
  Array mask = (a.value() > floor).cast<double>();
  auto an = a.node();
  return make_op(v, {a},
                 [an, mask](Node& self) { an->accumulate(self.grad * mask); });
}

// ---------------------------------------------------------------------------
// reductions / shape ops

Var sum(const Var& a) {
  Array v(1, 1);
  v(0, 0) = a.value().sum();
  auto an = a.node();
  return make_op(std::move(v), {a}, [an](Node& self) {
    an->accumulate(Array::Constant(an->val.rows(), an->val.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) { return sum(a) / static_cast<double>(a.value().size()); }

Var sum_rows(const Var& a) {
  Array v = a.value().rowwise().sum();
  auto an = a.node();
  return make_op(std::move(v), {a}, [an](Node& self) {
    an->accumulate(self.grad.col(0).replicate(1, an->val.cols()));
  });
}

Var sum_cols(const Var& a) {
  Array v = a.value().colwise().sum();
  auto an = a.node();
  return make_op(std::move(v), {a}, [an](Node& self) {
    an->accumulate(self.grad.row(0).replicate(an->val.rows(), 1));
  });
}

Var tile_rows(const Var& a, Eigen::Index n) {
  if (a.rows() != 1) throw std::invalid_argument("ad: tile_rows wants a row vector");
  Array v = a.value().row(0).replicate(n, 1);
  auto an = a.node();
  return make_op(std::move(v), {a}, [an](Node& self) {
    an->accumulate(self.grad.colwise().sum());
  });
}

Var concat_cols(std::span<const Var> parts) {
  Eigen::Index rows = parts[0].rows(), cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Array v(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  auto n = make_node(std::move(v));
  if (rg) {
    n->requires_grad = true;
    std::vector<NodePtr> ps;
    for (const auto& p : parts) ps.push_back(p.node());
    n->parents = ps;
    n->backward_fn = [ps](Node& self) {
      Eigen::Index off = 0;
      for (const auto& p : ps) {
        if (p->requires_grad) p->accumulate(self.grad.middleCols(off, p->val.cols()));
        off += p->val.cols();
      }
    };
  }
  return Var(n);
}

Var concat_rows(std::span<const Var> parts) {
  Eigen::Index cols = parts[0].cols(), rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  Array v(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  auto n = make_node(std::move(v));
  if (rg) {
    n->requires_grad = true;
    std::vector<NodePtr> ps;
    for (const auto& p : parts) ps.push_back(p.node());
    n->parents = ps;
    n->backward_fn = [ps](Node& self) {
      Eigen::Index off = 0;
      for (const auto& p : ps) {
        if (p->requires_grad) p->accumulate(self.grad.middleRows(off, p->val.rows()));
        off += p->val.rows();
      }
    };
  }
  return Var(n);
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index len) {
  Array v = a.value().middleCols(start, len);
  auto an = a.node();
  return make_op(std::move(v), {a}, [an, start, len](Node& self) {
    Array g = Array::Zero(an->val.rows(), an->val.cols());
    g.middleCols(start, len) = self.grad;
    an->accumulate(g);
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index len) {
  Array v = a.value().middleRows(start, len);
  auto an = a.node();
  return make_op(std::move(v), {a}, [an, start, len](Node& self) {
    Array g = Array::Zero(an->val.rows(), an->val.cols());
    g.middleRows(start, len) = self.grad;
    an->accumulate(g);
  });
}

Var stop_grad(const Var& a) { return Var::constant(a.value()); }

Var gather_rows(const Var& a, std::shared_ptr<const std::vector<Eigen::Index>> idx,
                Eigen::Index out_rows) {
  Array v(out_rows, a.cols());
  for (Eigen::Index i = 0; i < out_rows; ++i) {
    Eigen::Index j = (*idx)[static_cast<size_t>(i)];
    if (j < 0)
      v.row(i).setZero();
    else
      v.row(i) = a.value().row(j);
  }
  auto an = a.node();
  return make_op(std::move(v), {a}, [an, idx, out_rows](Node& self) {
    Array g = Array::Zero(an->val.rows(), an->val.cols());
    for (Eigen::Index i = 0; i < out_rows; ++i) {
      Eigen::Index j = (*idx)[static_cast<size_t>(i)];
      if (j >= 0) g.row(j) += self.grad.row(i);
    }
    an->accumulate(g);
  });
}

// ---------------------------------------------------------------------------
// backward

void backward(const Var& loss) {
  if (loss.value().size() != 1)
    throw std::invalid_argument("ad: backward expects a scalar loss");
  if (!loss.requires_grad()) return;

  // iterative post-order topo sort over the reachable requires_grad subgraph
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i].get();
      ++i;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  Array seed(1, 1);
  seed(0, 0) = 1.0;
  loss.node()->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad_set) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Var> params, double lr_, double beta1, double beta2,
           double eps)
    : lr(lr_), params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Array::Zero(p.rows(), p.cols()));
    v_.push_back(Array::Zero(p.rows(), p.cols()));
  }
}

void Adam::step(double max_grad_norm) {
  ++t_;
  double scale = 1.0;
  if (max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_) sq += p.grad().square().sum();
    double norm = std::sqrt(sq);
    if (norm > max_grad_norm) scale = max_grad_norm / norm;
  }
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Array g = params_[i].grad() * scale;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.square();
    Array mhat = m_[i] / bc1;
    Array vhat = v_[i] / bc2;
    params_[i].mutable_value() -= lr * mhat / (vhat.sqrt() + eps_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace ocs::ad
