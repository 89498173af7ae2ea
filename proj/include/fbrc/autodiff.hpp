#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// Every value is a 2-D matrix (batch rows x feature columns). Backward rules
// are themselves written in terms of differentiable ops, so gradients produced
// with `create_graph = true` can be differentiated again. That is what makes
// losses containing ||d f / d input||^2 trainable.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbrc::ad {

using Matrix = Eigen::MatrixXd;

class Var;

/// Thrown when an op produces NaN or infinity. Carries the op name.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& op)
      : std::runtime_error("non-finite value produced by op '" + op + "'"), op_(op) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Computes parent gradients from the node itself and its upstream gradient.
// `need[i]` is false when parent i does not lead to any requested input; the
// rule may leave that slot undefined.
using BackwardFn = std::function<std::vector<Var>(const Var& self, const Var& grad,
                                                  const std::vector<bool>& need)>;

struct Node {
  Matrix value;
  std::vector<Var> parents;
  BackwardFn backward;
  const char* op = "leaf";
  bool requires_grad = false;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Only meaningful for leaves; used by optimizers and Polyak updates.
  Matrix& mutable_value() { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }
  double item() const;
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// ---- grad mode ----

bool grad_enabled();

/// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- leaves ----

Var constant(Matrix value);
Var constant(double value);
Var parameter(Matrix value);
/// An input that gradients may be taken with respect to (e.g. actions).
Var input(Matrix value, bool requires_grad = true);
/// Same value, cut out of the graph.
Var detach(const Var& x);

/// Builds a non-leaf node; checks the value is finite. Exposed for tests.
Var make_op(const char* op, Matrix value, std::vector<Var> parents, BackwardFn backward);

// ---- elementwise binary (identical shapes, or broadcast from 1x1 / 1xn / Bx1) ----

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);

Var broadcast_to(const Var& x, Eigen::Index rows, Eigen::Index cols);

// ---- elementwise unary ----

Var neg(const Var& x);
Var scale(const Var& x, double c);
Var add_scalar(const Var& x, double c);
Var relu(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var sigmoid(const Var& x);
Var softplus(const Var& x);
Var square(const Var& x);
Var abs(const Var& x);
Var atanh(const Var& x);
Var clamp(const Var& x, double lo, double hi);

// ---- reductions and shape ops ----

Var sum(const Var& x);        // -> 1x1
Var mean(const Var& x);       // -> 1x1
Var sum_rows(const Var& x);   // -> 1 x cols
Var sum_cols(const Var& x);   // -> rows x 1
Var logsumexp_cols(const Var& x);  // row-wise log-sum-exp -> rows x 1
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& x);
Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count);
Var pad_cols(const Var& x, Eigen::Index total, Eigen::Index start);
Var concat_cols(const std::vector<Var>& xs);
/// Row-major reshape: element k of the row-major flattening keeps position k.
Var reshape(const Var& x, Eigen::Index rows, Eigen::Index cols);

// ---- operators ----

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);

// ---- differentiation ----

/// Gradients of a 1x1 `root` with respect to each of `wrt`. Inputs that the
/// root does not depend on get a zero gradient. With `create_graph` the
/// returned gradients are themselves differentiable.
std::vector<Var> grad(const Var& root, std::span<const Var> wrt, bool create_graph = false);
Var grad(const Var& root, const Var& wrt, bool create_graph = false);

/// Forward evaluation of a built graph is eager; this returns the root value
/// and re-validates finiteness.
const Matrix& forward(const Var& root);

}  // namespace fbrc::ad
