#include "radar/tensor.hpp"

#include <cmath>
#include <sstream>

namespace radar {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape has non-positive dimension " + std::to_string(d));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void check_finite(const char* op, const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string("non-finite value produced by op '") + op + "'");
    }
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size())) {
    throw std::invalid_argument("tensor values length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  check_finite("tensor", values);
  node_ = std::make_shared<detail::TensorNode>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
}

Tensor Tensor::zeros(Shape shape) {
  int64_t n = shape_numel(shape);
  Tensor t;
  t.node_ = std::make_shared<detail::TensorNode>();
  t.node_->shape = std::move(shape);
  t.node_->values.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t = zeros(std::move(shape));
  for (double& x : t.node_->values) x = v;
  check_finite("full", t.node_->values);
  return t;
}

Tensor Tensor::scalar(double v) { return full({1}, v); }

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->shape;
}

int64_t Tensor::size() const { return static_cast<int64_t>(values().size()); }

const std::vector<double>& Tensor::values() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->values;
}

std::vector<double>& Tensor::values_mut() {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->values;
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() requires a scalar tensor, got " + shape_str(shape()));
  return values()[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool b) {
  if (!node_) throw std::logic_error("use of undefined tensor");
  node_->requires_grad = b;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor has no gradient");
  return node_->grad;
}

void Tensor::clear_grad() const {
  if (node_) node_->grad.clear();
}

Tensor Tensor::clone_values() const { return Tensor(shape(), values()); }

void Tape::record(const char* op,
                  std::shared_ptr<detail::TensorNode> out,
                  std::vector<std::shared_ptr<detail::TensorNode>> inputs,
                  std::function<void()> backward_fn) {
  if (consumed_) throw std::logic_error("recording onto a consumed tape");
  nodes_.push_back(Node{op, std::move(out), std::move(inputs), std::move(backward_fn)});
}

void Tape::backward(const Tensor& root) {
  if (consumed_) throw std::logic_error("backward on a consumed tape");
  consumed_ = true;
  if (root.size() != 1) {
    throw std::invalid_argument("backward root must be scalar, got " + shape_str(root.shape()));
  }
  bool produced_here = false;
  for (const Node& n : nodes_) {
    if (n.out.get() == root.node()) {
      produced_here = true;
      break;
    }
  }
  if (!produced_here) throw std::invalid_argument("backward root was not produced by this tape");

  root.node()->grad.assign(1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // not on a path to the root
    it->fn();
    for (const auto& in : it->inputs) {
      if (!in->grad.empty()) check_finite(it->op, in->grad);
    }
  }
}

}  // namespace radar
