#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "eags/rng.hpp"
#include "eags/tensor.hpp"

namespace eags::nn {

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of operations in construction order. backward() walks it in exact
// reverse order, so the graph is acyclic by construction.
//
// Parameter leaves reference the caller's tensor instead of copying it; the
// tensor must outlive the graph. With record_grad == false no backward
// closures are kept, which is what inference uses.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(bool record_grad = true) : record_grad_(record_grad) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  // Const overload never receives gradients (used with frozen params).
  Var parameter(const Tensor& p);
  Var parameter(Tensor& p);

  const Tensor& value(std::size_t id) const;
  // Gradient buffer for a node, allocated (zeroed) on first access.
  std::vector<double>& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  bool recording() const { return record_grad_; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and accumulates into every bound parameter's
  // Tensor::grad (allocating zeros for parameters the loss does not touch).
  void backward(Var loss);

  Var push(Tensor value, BackwardFn fn);

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;  // parameter leaf: value lives elsewhere
    Tensor* param = nullptr;      // parameter that receives the gradient
    BackwardFn backward;
    std::vector<double> grad;
  };

  std::vector<Node> nodes_;
  bool record_grad_;
};

// ---- ops -------------------------------------------------------------------
// All ops throw ShapeError naming the op and the offending shapes.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
// a[m x n] + bias[n] broadcast over rows.
Var add_bias(Var a, Var bias);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var sum(Var a);
// Softmax along axis (1 / -1 = along each row, 0 = along each column).
// With a mask (length = size along the axis), disallowed entries get
// probability exactly zero.
Var softmax(Var a, int axis = -1, std::span<const std::uint8_t> allowed = {});
Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5);
// tanh approximation of GELU.
Var gelu(Var x);
Var embedding(Var table, std::span<const int> ids);
Var transpose(Var a);
Var slice_cols(Var a, std::size_t begin, std::size_t width);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var a, std::span<const std::size_t> rows);
// Inverted dropout; identity when p == 0.
Var dropout(Var x, double p, Rng& rng);
// Weighted mean over rows of -log softmax(logits[i])[targets[i]], softmax
// restricted to allowed columns when a mask is given. Rows with weight 0 are
// ignored; the weights must not all be zero.
Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights,
                  std::span<const std::uint8_t> allowed = {});

// ---- optimisation ----------------------------------------------------------

// param -= lr * grad, then grads are zeroed. Throws InputError when a tensor
// has no gradient.
void sgd_step(std::span<Tensor> params, double lr);

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<Tensor> params);
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace eags::nn
