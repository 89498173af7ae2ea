#include "fbrc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>

namespace fbrc::ad {

namespace {

thread_local bool g_grad_enabled = true;

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// x * 0 is 0 for finite x and NaN for inf/NaN; the sum vectorizes where
// allFinite() does not.
bool all_finite(const Matrix& m) { return (m.array() * 0.0).sum() == 0.0; }

Var leaf(Matrix value, bool requires_grad, const char* op) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->op = op;
  if (!all_finite(node->value)) throw NonFiniteError(op);
  return Var(std::move(node));
}

Matrix mask_of(const Matrix& m, auto pred) {
  return m.unaryExpr([&](double v) { return pred(v) ? 1.0 : 0.0; });
}

}  // namespace

double Var::item() const {
  if (rows() != 1 || cols() != 1) {
    throw ShapeError("item() on non-scalar " + shape_str(value()));
  }
  return value()(0, 0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Matrix value) { return leaf(std::move(value), false, "constant"); }
Var constant(double value) { return constant(Matrix::Constant(1, 1, value)); }
Var parameter(Matrix value) { return leaf(std::move(value), true, "parameter"); }
Var input(Matrix value, bool requires_grad) {
  return leaf(std::move(value), requires_grad, "input");
}
Var detach(const Var& x) { return leaf(x.value(), false, "detach"); }

Var make_op(const char* op, Matrix value, std::vector<Var> parents, BackwardFn backward) {
  if (!all_finite(value)) throw NonFiniteError(op);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  bool any = false;
  if (g_grad_enabled) {
    any = std::any_of(parents.begin(), parents.end(),
                      [](const Var& p) { return p.requires_grad(); });
  }
  if (any) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

// ---- broadcasting ----

Var broadcast_to(const Var& x, Eigen::Index rows, Eigen::Index cols) {
  const auto r = x.rows();
  const auto c = x.cols();
  if (r == rows && c == cols) return x;
  if (r == 1 && c == 1) {
    return make_op("broadcast_scalar", Matrix::Constant(rows, cols, x.value()(0, 0)), {x},
                   [](const Var&, const Var& g, const std::vector<bool>&) {
                     return std::vector<Var>{sum(g)};
                   });
  }
  if (r == 1 && c == cols) {
    return make_op("broadcast_rows", x.value().replicate(rows, 1), {x},
                   [](const Var&, const Var& g, const std::vector<bool>&) {
                     return std::vector<Var>{sum_rows(g)};
                   });
  }
  if (c == 1 && r == rows) {
    return make_op("broadcast_cols", x.value().replicate(1, cols), {x},
                   [](const Var&, const Var& g, const std::vector<bool>&) {
                     return std::vector<Var>{sum_cols(g)};
                   });
  }
  throw ShapeError("cannot broadcast " + shape_str(x.value()) + " to " +
                   std::to_string(rows) + "x" + std::to_string(cols));
}

namespace {

std::pair<Var, Var> align(const Var& a, const Var& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return {a, b};
  const auto rows = std::max(a.rows(), b.rows());
  const auto cols = std::max(a.cols(), b.cols());
  try {
    return {broadcast_to(a, rows, cols), broadcast_to(b, rows, cols)};
  } catch (const ShapeError&) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.value()) +
                     " and " + shape_str(b.value()));
  }
}

}  // namespace

Var add(const Var& a0, const Var& b0) {
  auto [a, b] = align(a0, b0, "add");
  return make_op("add", a.value() + b.value(), {a, b},
                 [](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{g, g};
                 });
}

Var sub(const Var& a0, const Var& b0) {
  auto [a, b] = align(a0, b0, "sub");
  return make_op("sub", a.value() - b.value(), {a, b},
                 [](const Var&, const Var& g, const std::vector<bool>& need) {
                   return std::vector<Var>{g, need[1] ? neg(g) : Var()};
                 });
}

Var mul(const Var& a0, const Var& b0) {
  auto [a, b] = align(a0, b0, "mul");
  return make_op("mul", a.value().cwiseProduct(b.value()), {a, b},
                 [](const Var& self, const Var& g, const std::vector<bool>& need) {
                   const auto& p = self.node()->parents;
                   return std::vector<Var>{need[0] ? mul(g, p[1]) : Var(),
                                           need[1] ? mul(g, p[0]) : Var()};
                 });
}

Var div(const Var& a0, const Var& b0) {
  auto [a, b] = align(a0, b0, "div");
  return make_op("div", a.value().cwiseQuotient(b.value()), {a, b},
                 [](const Var& self, const Var& g, const std::vector<bool>& need) {
                   const auto& p = self.node()->parents;
                   Var ga = need[0] ? div(g, p[1]) : Var();
                   Var gb = need[1] ? neg(div(mul(g, p[0]), square(p[1]))) : Var();
                   return std::vector<Var>{ga, gb};
                 });
}

Var minimum(const Var& a0, const Var& b0) {
  auto [a, b] = align(a0, b0, "minimum");
  Matrix take_a = (a.value().array() <= b.value().array()).cast<double>().matrix();
  Matrix out = a.value().cwiseMin(b.value());
  return make_op("minimum", std::move(out), {a, b},
                 [take_a](const Var&, const Var& g, const std::vector<bool>& need) {
                   Matrix take_b = Matrix::Ones(take_a.rows(), take_a.cols()) - take_a;
                   return std::vector<Var>{need[0] ? mul(g, constant(take_a)) : Var(),
                                           need[1] ? mul(g, constant(take_b)) : Var()};
                 });
}

// ---- unary ----

Var neg(const Var& x) {
  return make_op("neg", -x.value(), {x}, [](const Var&, const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{neg(g)};
  });
}

Var scale(const Var& x, double c) {
  return make_op("scale", x.value() * c, {x},
                 [c](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{scale(g, c)};
                 });
}

Var add_scalar(const Var& x, double c) {
  return make_op("add_scalar", (x.value().array() + c).matrix(), {x},
                 [](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{g};
                 });
}

Var relu(const Var& x) {
  Matrix mask = mask_of(x.value(), [](double v) { return v > 0.0; });
  return make_op("relu", x.value().cwiseMax(0.0), {x},
                 [mask](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{mul(g, constant(mask))};
                 });
}

Var tanh(const Var& x) {
  return make_op("tanh", x.value().array().tanh().matrix(), {x},
                 [](const Var& self, const Var& g, const std::vector<bool>&) {
                   // d tanh = 1 - tanh^2, expressed through the parent so it
                   // stays differentiable without a self-reference cycle.
                   Var y = tanh(self.node()->parents[0]);
                   return std::vector<Var>{mul(g, sub(constant(1.0), square(y)))};
                 });
}

Var exp(const Var& x) {
  return make_op("exp", x.value().array().exp().matrix(), {x},
                 [](const Var& self, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{mul(g, exp(self.node()->parents[0]))};
                 });
}

Var log(const Var& x) {
  return make_op("log", x.value().array().log().matrix(), {x},
                 [](const Var& self, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{div(g, self.node()->parents[0])};
                 });
}

Var sigmoid(const Var& x) {
  Matrix y = x.value().unaryExpr([](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
  return make_op("sigmoid", std::move(y), {x},
                 [](const Var& self, const Var& g, const std::vector<bool>&) {
                   Var s = sigmoid(self.node()->parents[0]);
                   return std::vector<Var>{mul(g, mul(s, sub(constant(1.0), s)))};
                 });
}

Var softplus(const Var& x) {
  Matrix y = x.value().unaryExpr(
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
  return make_op("softplus", std::move(y), {x},
                 [](const Var& self, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{mul(g, sigmoid(self.node()->parents[0]))};
                 });
}

Var square(const Var& x) {
  return make_op("square", x.value().array().square().matrix(), {x},
                 [](const Var& self, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{mul(g, scale(self.node()->parents[0], 2.0))};
                 });
}

Var abs(const Var& x) {
  Matrix sign = x.value().unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  return make_op("abs", x.value().cwiseAbs(), {x},
                 [sign](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{mul(g, constant(sign))};
                 });
}

Var atanh(const Var& x) {
  return make_op("atanh", x.value().array().atanh().matrix(), {x},
                 [](const Var& self, const Var& g, const std::vector<bool>&) {
                   const Var& p = self.node()->parents[0];
                   return std::vector<Var>{div(g, sub(constant(1.0), square(p)))};
                 });
}

Var clamp(const Var& x, double lo, double hi) {
  Matrix mask = mask_of(x.value(), [=](double v) { return v >= lo && v <= hi; });
  return make_op("clamp", x.value().cwiseMax(lo).cwiseMin(hi), {x},
                 [mask](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{mul(g, constant(mask))};
                 });
}

// ---- reductions ----

Var sum(const Var& x) {
  const auto r = x.rows();
  const auto c = x.cols();
  return make_op("sum", Matrix::Constant(1, 1, x.value().sum()), {x},
                 [r, c](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{broadcast_to(g, r, c)};
                 });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw ShapeError("mean of empty matrix");
  return scale(sum(x), 1.0 / n);
}

Var sum_rows(const Var& x) {
  const auto r = x.rows();
  return make_op("sum_rows", x.value().colwise().sum(), {x},
                 [r](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{broadcast_to(g, r, g.cols())};
                 });
}

Var sum_cols(const Var& x) {
  const auto c = x.cols();
  return make_op("sum_cols", x.value().rowwise().sum(), {x},
                 [c](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{broadcast_to(g, g.rows(), c)};
                 });
}

Var logsumexp_cols(const Var& x) {
  const Matrix& v = x.value();
  Eigen::VectorXd mx = v.rowwise().maxCoeff();
  Matrix out(v.rows(), 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    out(i, 0) = mx(i) + std::log((v.row(i).array() - mx(i)).exp().sum());
  }
  return make_op("logsumexp_cols", std::move(out), {x},
                 [](const Var& self, const Var& g, const std::vector<bool>&) {
                   const Var& p = self.node()->parents[0];
                   // softmax = exp(x - lse(x)); recompute lse from the parent.
                   Var lse = logsumexp_cols(p);
                   Var soft = exp(sub(p, broadcast_to(lse, p.rows(), p.cols())));
                   return std::vector<Var>{mul(broadcast_to(g, p.rows(), p.cols()), soft)};
                 });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.value()) + " times " + shape_str(b.value()));
  }
  Matrix out;
  out.noalias() = a.value() * b.value();
  return make_op("matmul", std::move(out), {a, b},
                 [](const Var& self, const Var& g, const std::vector<bool>& need) {
                   const auto& p = self.node()->parents;
                   return std::vector<Var>{need[0] ? matmul(g, transpose(p[1])) : Var(),
                                           need[1] ? matmul(transpose(p[0]), g) : Var()};
                 });
}

Var transpose(const Var& x) {
  return make_op("transpose", x.value().transpose(), {x},
                 [](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{transpose(g)};
                 });
}

Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw ShapeError("slice_cols out of range for " + shape_str(x.value()));
  }
  const auto total = x.cols();
  return make_op("slice_cols", x.value().middleCols(start, count), {x},
                 [total, start](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{pad_cols(g, total, start)};
                 });
}

Var pad_cols(const Var& x, Eigen::Index total, Eigen::Index start) {
  if (start < 0 || start + x.cols() > total) throw ShapeError("pad_cols out of range");
  Matrix out = Matrix::Zero(x.rows(), total);
  out.middleCols(start, x.cols()) = x.value();
  const auto count = x.cols();
  return make_op("pad_cols", std::move(out), {x},
                 [start, count](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{slice_cols(g, start, count)};
                 });
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols of nothing");
  const auto rows = xs.front().rows();
  Eigen::Index total = 0;
  for (const auto& x : xs) {
    if (x.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    total += x.cols();
  }
  Matrix out(rows, total);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& x : xs) {
    offsets.push_back(at);
    out.middleCols(at, x.cols()) = x.value();
    at += x.cols();
  }
  return make_op("concat_cols", std::move(out), xs,
                 [offsets](const Var& self, const Var& g, const std::vector<bool>& need) {
                   const auto& p = self.node()->parents;
                   std::vector<Var> out(p.size());
                   for (std::size_t i = 0; i < p.size(); ++i) {
                     if (need[i]) out[i] = slice_cols(g, offsets[i], p[i].cols());
                   }
                   return out;
                 });
}

Var reshape(const Var& x, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != x.value().size()) {
    throw ShapeError("reshape " + shape_str(x.value()) + " to " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor src = x.value();
  Matrix out = Eigen::Map<const RowMajor>(src.data(), rows, cols);
  const auto r0 = x.rows();
  const auto c0 = x.cols();
  return make_op("reshape", std::move(out), {x},
                 [r0, c0](const Var&, const Var& g, const std::vector<bool>&) {
                   return std::vector<Var>{reshape(g, r0, c0)};
                 });
}

// ---- operators ----

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator*(const Var& a, const Var& b) { return mul(a, b); }
Var operator/(const Var& a, const Var& b) { return div(a, b); }
Var operator-(const Var& a) { return neg(a); }
Var operator+(const Var& a, double c) { return add_scalar(a, c); }
Var operator+(double c, const Var& a) { return add_scalar(a, c); }
Var operator-(const Var& a, double c) { return add_scalar(a, -c); }
Var operator-(double c, const Var& a) { return add_scalar(neg(a), c); }
Var operator*(const Var& a, double c) { return scale(a, c); }
Var operator*(double c, const Var& a) { return scale(a, c); }

// ---- differentiation ----

std::vector<Var> grad(const Var& root, std::span<const Var> wrt, bool create_graph) {
  if (!root.defined()) throw std::invalid_argument("grad of undefined root");
  if (root.rows() != 1 || root.cols() != 1) {
    throw ShapeError("grad requires a scalar root, got " + shape_str(root.value()));
  }

  std::vector<Var> result(wrt.size());
  if (!root.requires_grad()) {
    for (std::size_t i = 0; i < wrt.size(); ++i) {
      result[i] = constant(Matrix::Zero(wrt[i].rows(), wrt[i].cols()));
    }
    return result;
  }

  // Post-order DFS over nodes that record gradients.
  std::vector<Node*> order;
  std::unordered_map<Node*, std::size_t> index;
  {
    std::unordered_map<Node*, bool> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
    visited[root.node()] = true;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* parent = node->parents[next++].node();
        if (parent->requires_grad && !visited[parent]) {
          visited[parent] = true;
          stack.emplace_back(parent, 0);
        }
      } else {
        index[node] = order.size();
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  // A node is needed when it is a target or feeds one.
  std::vector<bool> needed(order.size(), false);
  std::vector<bool> target(order.size(), false);
  for (const auto& w : wrt) {
    if (auto it = index.find(w.node()); it != index.end()) {
      needed[it->second] = true;
      target[it->second] = true;
    }
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (needed[i]) continue;
    for (const auto& p : order[i]->parents) {
      auto it = index.find(p.node());
      if (it != index.end() && needed[it->second]) {
        needed[i] = true;
        break;
      }
    }
  }

  std::optional<NoGradGuard> guard;
  if (!create_graph) guard.emplace();

  std::vector<Var> grads(order.size());
  grads[index.at(root.node())] = constant(1.0);
  // Keep owning handles so self-Var can be formed for backward rules.
  std::unordered_map<Node*, std::shared_ptr<Node>> owner;
  owner[root.node()] = root.shared();
  for (std::size_t i = order.size(); i-- > 0;) {
    Node* node = order[i];
    if (!needed[i] || !grads[i].defined() || !node->backward) continue;
    std::vector<bool> need(node->parents.size(), false);
    bool any = false;
    for (std::size_t k = 0; k < node->parents.size(); ++k) {
      auto it = index.find(node->parents[k].node());
      need[k] = it != index.end() && needed[it->second];
      any = any || need[k];
      owner.emplace(node->parents[k].node(), node->parents[k].shared());
    }
    if (!any) continue;
    Var self(owner.at(node));
    std::vector<Var> pg = node->backward(self, grads[i], need);
    for (std::size_t k = 0; k < node->parents.size(); ++k) {
      if (!need[k] || !pg[k].defined()) continue;
      const std::size_t j = index.at(node->parents[k].node());
      grads[j] = grads[j].defined() ? add(grads[j], pg[k]) : pg[k];
    }
    // Free intermediate gradient memory early when not building a graph.
    if (!create_graph && !target[i]) grads[i] = Var();
  }

  for (std::size_t w = 0; w < wrt.size(); ++w) {
    auto it = index.find(wrt[w].node());
    if (it != index.end() && grads[it->second].defined()) {
      result[w] = grads[it->second];
    } else {
      result[w] = constant(Matrix::Zero(wrt[w].rows(), wrt[w].cols()));
    }
  }
  return result;
}

Var grad(const Var& root, const Var& wrt, bool create_graph) {
  std::vector<Var> one{wrt};
  return grad(root, one, create_graph).front();
}

const Matrix& forward(const Var& root) {
  if (!root.value().allFinite()) throw NonFiniteError(root.op());
  return root.value();
}

}  // namespace fbrc::ad
