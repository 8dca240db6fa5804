// Reverse-mode automatic differentiation on dense double arrays.
//
// A Var is a handle to a node in a dynamically built tape. Operations on
// Vars record a backward closure when any input requires gradients;
// otherwise they produce plain constants, so evaluation-only code pays no
// graph cost and retains no history.
//
// Shapes are (rows, cols). Binary elementwise ops broadcast a dimension of
// size 1 against any size (numpy-style, limited to the two dims).

#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace ocs::ad {

using Array = Eigen::ArrayXXd;

struct Node {
  Array val;
  Array grad;  // allocated on first accumulate
  bool requires_grad = false;
  bool grad_set = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Node();
  ~Node();

  void accumulate(const Array& g);

  // instrumentation for memory-scaling checks
  static std::int64_t alive_count();
  static std::int64_t peak_alive_count();
  static void reset_peak_alive();
};

using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var constant(Array v);
  static Var constant(double v);  // 1x1
  static Var param(Array v);      // leaf with requires_grad

  bool defined() const { return node_ != nullptr; }
  const Array& value() const { return node_->val; }
  Array& mutable_value() { return node_->val; }
  double scalar() const { return node_->val(0, 0); }
  Eigen::Index rows() const { return node_->val.rows(); }
  Eigen::Index cols() const { return node_->val.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // gradient of the last backward() pass; zero-shaped if none reached
  Array grad() const;
  void zero_grad() const;

  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// ---------------------------------------------------------------------------
// ops

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double s);
Var operator+(double s, const Var& a);
Var operator-(const Var& a, double s);
Var operator-(double s, const Var& a);
Var operator*(const Var& a, double s);
Var operator*(double s, const Var& a);
Var operator/(const Var& a, double s);

Var matmul(const Var& a, const Var& b);

Var exp(const Var& a);
Var log(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var relu(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
// clamps value; gradient passes where lo < x < hi, zero outside
Var clamp(const Var& a, double lo, double hi);
// elementwise max against a scalar floor; gradient passes where a > floor
Var max_with(const Var& a, double floor);

Var sum(const Var& a);                     // -> 1x1
Var mean(const Var& a);                    // -> 1x1
Var sum_rows(const Var& a);                // n x k -> n x 1
Var sum_cols(const Var& a);                // n x k -> 1 x k
Var tile_rows(const Var& a, Eigen::Index n);  // 1 x k -> n x k

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index len);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index len);

// value copy with the tape cut: output is a constant
Var stop_grad(const Var& a);

// rows of the output gather rows of the input; index -1 reads as zero.
// Used for im2col-style patch extraction; backward scatter-adds.
Var gather_rows(const Var& a, std::shared_ptr<const std::vector<Eigen::Index>> idx,
                Eigen::Index out_rows);

void backward(const Var& loss);

// ---------------------------------------------------------------------------
// optimizer

class Adam {
 public:
  Adam(std::vector<Var> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  // global-norm gradient clip applied before the update when max_norm > 0
  void step(double max_grad_norm = 0.0);
  void zero_grad();
  double lr = 0.0;
  const std::vector<Var>& params() const { return params_; }

 private:
  std::vector<Var> params_;
  std::vector<Array> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace ocs::ad
