#pragma once
/**
 * @file autodiff.hpp
 * @brief Define-by-run reverse-mode differentiation over dense tensors.
 *
 * Every operation returns a new Tensor whose node remembers its inputs and a
 * backward rule. Calling backward() on a scalar walks the graph in reverse
 * topological order and accumulates gradients into every tensor that
 * requires them. The graph lives exactly as long as the tensors that
 * reference it, so rebuilding it each epoch costs nothing extra.
 *
 * Complex tensors store interleaved (re, im) pairs; their shape counts
 * complex elements. They only occur between the spectral transforms.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sbfnn/errors.hpp"

namespace sbfnn::ad {

using Shape = std::vector<std::size_t>;

enum class Op {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  Square,
  Sqrt,
  Exp,
  Log,
  Tanh,
  Sum,
  Mean,
  Variance,
  Norm2,
  RowBias,
  Column,
  Row,
  Reshape,
  Custom,
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

struct Node {
  Shape shape;
  bool complex = false;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  Op op = Op::Leaf;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return inputs.empty(); }
  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

namespace detail {
inline thread_local int no_grad_depth = 0;
}

/// While alive, new operations on this thread record no backward rules.
class NoGradGuard {
 public:
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false) {
    if (shape.empty()) shape = {1};
    for (auto d : shape)
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
    if (ad::numel(shape) != data.size())
      throw DimensionError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                           shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto count = ad::numel(shape);
    return from(std::move(shape), std::vector<double>(count, 0.0), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

  /// Complex tensor from interleaved (re, im) storage.
  static Tensor complex_from(Shape shape, std::vector<double> interleaved) {
    if (ad::numel(shape) * 2 != interleaved.size())
      throw DimensionError("complex tensor storage does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->complex = true;
    n->value = std::move(interleaved);
    return Tensor(std::move(n));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return ad::numel(node_->shape); }
  std::size_t rows() const { return node_->shape[0]; }
  std::size_t cols() const { return rank() > 1 ? node_->shape[1] : 1; }
  bool is_complex() const { return node_->complex; }
  bool requires_grad() const { return node_->requires_grad; }
  Op op() const { return node_->op; }

  std::span<const double> data() const { return node_->value; }
  /// Writable storage; meant for optimizers and initializers touching leaves.
  std::span<double> mutable_data() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  double item() const {
    if (numel() != 1 || is_complex()) throw ContractError("item() requires a real scalar, got " + shape_str(shape()));
    return node_->value[0];
  }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  void zero_grad() {
    if (node_->requires_grad) node_->grad.assign(node_->value.size(), 0.0);
  }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  /// Leaf copy with the same values and no history.
  Tensor detach(bool requires_grad = false) const {
    Tensor t = from(shape(), node_->value, requires_grad);
    t.node_->complex = node_->complex;
    return t;
  }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds the result node; drops history when no input needs a gradient.
inline Tensor make_result(Op op, Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                          std::function<void(Node&)> backward, bool complex = false) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->complex = complex;
  n->op = op;
  bool needs = false;
  if (grad_enabled())
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.ptr());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

/// Adds g into the gradient of input `index` when that input is differentiable.
inline std::vector<double>* grad_sink(Node& self, std::size_t index) {
  Node& in = *self.inputs[index];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

inline void require_real(const Tensor& t, const char* op) {
  if (t.is_complex()) throw ContractError(std::string(op) + ": complex operand not supported");
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require_real(a, "matmul");
  require_real(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &B[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  return make_result(Op::MatMul, {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& G = self.grad;
    const auto& A = self.inputs[0]->value;
    const auto& B = self.inputs[1]->value;
    if (auto* ga = grad_sink(self, 0)) {
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
          (*ga)[i * k + p] += s;
        }
    }
    if (auto* gb = grad_sink(self, 1)) {
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += aip * G[i * n + j];
        }
    }
  });
}

/// x[n x h] + bias[h], bias broadcast over rows.
inline Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_real(x, "add_row_bias");
  const std::size_t n = x.rows(), h = x.cols();
  if (bias.numel() != h)
    throw DimensionError("add_row_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j) out[i * h + j] += b[j];
  return make_result(Op::RowBias, x.shape(), std::move(out), {x, bias}, [n, h](Node& self) {
    if (auto* gx = grad_sink(self, 0))
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += self.grad[i];
    if (auto* gb = grad_sink(self, 1))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < h; ++j) (*gb)[j] += self.grad[i * h + j];
  });
}

// ---------------------------------------------------------------------------
// Elementwise binary

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
  return make_result(Op::Add, a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (auto* g = grad_sink(self, k))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  }, a.is_complex());
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
  return make_result(Op::Sub, a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = grad_sink(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_sink(self, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
  }, a.is_complex());
}

/// Hadamard product; a scalar operand is broadcast.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  require_real(a, "mul");
  require_real(b, "mul");
  const bool a_scalar = a.numel() == 1 && b.numel() != 1;
  const bool b_scalar = b.numel() == 1 && a.numel() != 1;
  if (!a_scalar && !b_scalar) require_same_shape(a, b, "mul");
  const Shape shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = numel(shape);
  std::vector<double> out(n);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = A[a_scalar ? 0 : i] * B[b_scalar ? 0 : i];
  return make_result(Op::Mul, shape, std::move(out), {a, b}, [a_scalar, b_scalar, n](Node& self) {
    const auto& A = self.inputs[0]->value;
    const auto& B = self.inputs[1]->value;
    if (auto* ga = grad_sink(self, 0))
      for (std::size_t i = 0; i < n; ++i) (*ga)[a_scalar ? 0 : i] += self.grad[i] * B[b_scalar ? 0 : i];
    if (auto* gb = grad_sink(self, 1))
      for (std::size_t i = 0; i < n; ++i) (*gb)[b_scalar ? 0 : i] += self.grad[i] * A[a_scalar ? 0 : i];
  });
}

// ---------------------------------------------------------------------------
// Elementwise unary

inline Tensor scale(const Tensor& x, double s) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= s;
  return make_result(Op::Scale, x.shape(), std::move(out), {x}, [s](Node& self) {
    if (auto* g = grad_sink(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s * self.grad[i];
  }, x.is_complex());
}

inline Tensor add_scalar(const Tensor& x, double s) {
  require_real(x, "add_scalar");
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v += s;
  return make_result(Op::AddScalar, x.shape(), std::move(out), {x}, [](Node& self) {
    if (auto* g = grad_sink(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

namespace detail {
/// Shared shape of a pointwise op whose derivative depends on input and output.
template <class F, class D>
Tensor unary(Op op, const Tensor& x, F f, D dfdx) {
  require_real(x, "unary op");
  const auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = f(X[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [dfdx](Node& self) {
    if (auto* g = grad_sink(self, 0)) {
      const auto& X = self.inputs[0]->value;
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * dfdx(X[i], self.value[i]);
    }
  });
}
}  // namespace detail

inline Tensor square(const Tensor& x) {
  return detail::unary(Op::Square, x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Tensor sqrt(const Tensor& x) {
  for (double v : x.data())
    if (v < 0.0) throw DomainError("sqrt of negative input " + std::to_string(v));
  return detail::unary(Op::Sqrt, x, [](double v) { return std::sqrt(v); },
                       [](double, double y) { return 0.5 / y; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary(Op::Exp, x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
  for (double v : x.data())
    if (v < 0.0) throw DomainError("log of negative input " + std::to_string(v));
  return detail::unary(Op::Log, x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(Op::Tanh, x, [](double v) { return std::tanh(v); },
                       [](double, double y) { return 1.0 - y * y; });
}

// ---------------------------------------------------------------------------
// Reductions (all produce shape [1])

inline Tensor sum(const Tensor& x) {
  require_real(x, "sum");
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result(Op::Sum, {1}, {s}, {x}, [](Node& self) {
    if (auto* g = grad_sink(self, 0))
      for (auto& v : *g) v += self.grad[0];
  });
}

inline Tensor mean(const Tensor& x) {
  require_real(x, "mean");
  const double n = static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result(Op::Mean, {1}, {s / n}, {x}, [n](Node& self) {
    if (auto* g = grad_sink(self, 0))
      for (auto& v : *g) v += self.grad[0] / n;
  });
}

/// Population variance (1/n denominator).
inline Tensor variance(const Tensor& x) {
  require_real(x, "variance");
  const auto X = x.data();
  const double n = static_cast<double>(X.size());
  double mu = 0.0;
  for (double v : X) mu += v;
  mu /= n;
  double s = 0.0;
  for (double v : X) s += (v - mu) * (v - mu);
  return make_result(Op::Variance, {1}, {s / n}, {x}, [mu, n](Node& self) {
    if (auto* g = grad_sink(self, 0)) {
      const auto& X = self.inputs[0]->value;
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0] * 2.0 * (X[i] - mu) / n;
    }
  });
}

/// Euclidean norm; the subgradient at the origin is taken as zero.
inline Tensor norm2(const Tensor& x) {
  require_real(x, "norm2");
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  const double r = std::sqrt(s);
  return make_result(Op::Norm2, {1}, {r}, {x}, [r](Node& self) {
    if (r == 0.0) return;
    if (auto* g = grad_sink(self, 0)) {
      const auto& X = self.inputs[0]->value;
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0] * X[i] / r;
    }
  });
}

// ---------------------------------------------------------------------------
// Indexing

/// Column j of a 2-D tensor as a vector of length rows.
inline Tensor column(const Tensor& x, std::size_t j) {
  require_real(x, "column");
  if (x.rank() != 2 || j >= x.cols())
    throw DimensionError("column " + std::to_string(j) + " out of range for " + shape_str(x.shape()));
  const std::size_t n = x.rows(), h = x.cols();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x.data()[i * h + j];
  return make_result(Op::Column, {n}, std::move(out), {x}, [n, h, j](Node& self) {
    if (auto* g = grad_sink(self, 0))
      for (std::size_t i = 0; i < n; ++i) (*g)[i * h + j] += self.grad[i];
  });
}

/// Row i of a 2-D tensor as a vector of length cols.
inline Tensor row(const Tensor& x, std::size_t i) {
  require_real(x, "row");
  if (x.rank() != 2 || i >= x.rows())
    throw DimensionError("row " + std::to_string(i) + " out of range for " + shape_str(x.shape()));
  const std::size_t h = x.cols();
  std::vector<double> out(x.data().begin() + i * h, x.data().begin() + (i + 1) * h);
  return make_result(Op::Row, {h}, std::move(out), {x}, [h, i](Node& self) {
    if (auto* g = grad_sink(self, 0))
      for (std::size_t j = 0; j < h; ++j) (*g)[i * h + j] += self.grad[j];
  });
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (ad::numel(shape) != x.numel())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(Op::Reshape, std::move(shape), std::move(out), {x}, [](Node& self) {
    if (auto* g = grad_sink(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  }, x.is_complex());
}

// ---------------------------------------------------------------------------
// Backward pass

/// Nodes reachable from root that carry gradients, parents before children.
inline std::vector<Node*> topological_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;
}

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
/// Intermediate gradients are recomputed on each call; leaf gradients add up
/// until zero_grad().
inline void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1 || loss.is_complex())
    throw ContractError("backward requires a real scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined tensor")));
  if (!loss.requires_grad()) return;
  Node* root = &loss.node();
  const auto order = topological_order(root);
  for (Node* n : order)
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

inline void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

// ---------------------------------------------------------------------------
// Gradient checking

/// Max over coordinates of |analytic - central| / max(1, |central|) for a
/// scalar function of one tensor.
inline double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double step) {
  if (step <= 0.0) throw ContractError("grad_check: step must be positive");
  Tensor x = point.detach(true);
  Tensor y = f(x);
  if (!std::isfinite(y.item())) throw DivergenceError("grad_check: function value is not finite", 0.0);
  backward(y);
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

  double worst = 0.0;
  std::vector<double> probe(point.data().begin(), point.data().end());
  NoGradGuard guard;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = f(Tensor::from(point.shape(), probe)).item();
    probe[i] = orig - step;
    const double fm = f(Tensor::from(point.shape(), probe)).item();
    probe[i] = orig;
    const double central = (fp - fm) / (2.0 * step);
    if (!std::isfinite(central)) throw DivergenceError("grad_check: non-finite difference quotient", 0.0);
    worst = std::max(worst, std::abs(analytic[i] - central) / std::max(1.0, std::abs(central)));
  }
  return worst;
}

/// Same error measure over a set of parameter tensors of a loss closure.
/// Parameters are perturbed in place and restored.
inline double grad_check_params(const std::function<Tensor()>& loss, std::span<Tensor> params, double step) {
  if (step <= 0.0) throw ContractError("grad_check_params: step must be positive");
  for (auto& p : params) p.zero_grad();
  Tensor y = loss();
  if (!std::isfinite(y.item())) throw DivergenceError("grad_check_params: loss is not finite", 0.0);
  backward(y);
  double worst = 0.0;
  NoGradGuard guard;
  for (auto& p : params) {
    std::vector<double> analytic(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + step;
      const double fp = loss().item();
      data[i] = orig - step;
      const double fm = loss().item();
      data[i] = orig;
      const double central = (fp - fm) / (2.0 * step);
      if (!std::isfinite(central)) throw DivergenceError("grad_check_params: non-finite difference quotient", 0.0);
      worst = std::max(worst, std::abs(analytic[i] - central) / std::max(1.0, std::abs(central)));
    }
  }
  return worst;
}

}  // namespace sbfnn::ad
