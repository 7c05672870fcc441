#pragma once

// Dense f64 tensors plus a tape for reverse-mode differentiation.
//
// A Tensor is a value-semantic handle to a shared node holding shape, values
// and an optional gradient buffer. Ops (ops.hpp) write a node once and never
// mutate it afterwards; the only sanctioned in-place writes are to leaf
// tensors (parameters, attack iterates) between tapes, via values_mut().
//
// The Tape is a Wengert list: every op that has a grad-requiring input
// appends a backward closure in execution order, and backward() replays the
// list in reverse, accumulating vector-Jacobian products into the grads of
// grad-requiring inputs. A tape is single-use.

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace radar {

using Shape = std::vector<int>;

// Raised whenever an op produces a NaN/Inf value or gradient; the message
// names the offending op.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward touches this node
  bool requires_grad = false;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int i) const { return shape().at(static_cast<size_t>(i)); }
  int64_t size() const;

  const std::vector<double>& values() const;
  // In-place access for leaves only (never call on a tensor recorded by a
  // live tape).
  std::vector<double>& values_mut();
  double item() const;  // scalar tensors

  bool requires_grad() const;
  Tensor& set_requires_grad(bool b);
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void clear_grad() const;

  // Deep copy of values into a fresh leaf (no grad, no requires_grad).
  Tensor clone_values() const;

  detail::TensorNode* node() const { return node_.get(); }
  std::shared_ptr<detail::TensorNode> shared_node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

class Tape {
 public:
  // Ops register: the display name, the node they produced, the grad-relevant
  // input nodes, and a closure computing the vector-Jacobian product.
  void record(const char* op,
              std::shared_ptr<detail::TensorNode> out,
              std::vector<std::shared_ptr<detail::TensorNode>> inputs,
              std::function<void()> backward_fn);

  size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Seeds d(root)/d(root) = 1 and sweeps the list once in reverse, so every
  // recorded op is visited exactly once in reverse topological order.
  void backward(const Tensor& root);

 private:
  struct Node {
    const char* op;
    std::shared_ptr<detail::TensorNode> out;
    std::vector<std::shared_ptr<detail::TensorNode>> inputs;
    std::function<void()> fn;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Free-function form used throughout the toolkit.
inline void backward(Tape& tape, const Tensor& root) { tape.backward(root); }

void check_finite(const char* op, const std::vector<double>& values);

}  // namespace radar
