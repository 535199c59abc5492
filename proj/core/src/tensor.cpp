#include "histocam/tensor.hpp"

#include <cmath>
#include <sstream>

#include "histocam/errors.hpp"

namespace histocam::ag {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

void Node::accumulate(std::span<const double> g) {
  if (grad.empty()) {
    grad.assign(g.begin(), g.end());
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

void Node::accumulate_at(std::size_t i, double g) {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  grad[i] += g;
}

}  // namespace detail

namespace {

void check_shape(const Shape& shape, std::size_t n_values) {
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != n_values) {
    throw DimensionError("shape " + shape_to_string(shape) + " needs " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(n_values));
  }
}

const detail::Node& require(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw ContractError("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape, values.size());
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return require(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return require(node_).value.size(); }

std::span<const double> Tensor::values() const { return require(node_).value; }

std::span<double> Tensor::mutable_values() {
  require(node_);
  return node_->value;
}

double Tensor::item() const {
  const auto& node = require(node_);
  if (node.value.size() != 1) {
    throw DimensionError("item() needs a single-element tensor, got " + shape_to_string(node.shape));
  }
  return node.value[0];
}

bool Tensor::requires_grad() const { return require(node_).requires_grad; }

void Tensor::set_requires_grad(bool on) {
  require(node_);
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return !require(node_).grad.empty(); }

std::span<const double> Tensor::grad() const {
  const auto& node = require(node_);
  if (node.grad.empty()) throw ContractError("tensor " + shape_to_string(node.shape) + " has no gradient");
  return node.grad;
}

void Tensor::zero_grad() {
  require(node_);
  node_->grad.clear();
}

Tensor Tensor::detached() const {
  const auto& node = require(node_);
  return Tensor(node.shape, node.value, false);
}

Tensor grad_of(const Tensor& source) {
  auto g = source.grad();
  return Tensor(source.shape(), std::vector<double>(g.begin(), g.end()));
}

Tensor Tape::record(std::span<const Tensor> inputs, Shape shape, std::vector<double> values,
                    BackwardFn backward_fn) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite value produced by a tensor op");
  }
  bool needs_grad = false;
  if (recording_) {
    for (const auto& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  Tensor out(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) {
    if (consumed_) throw ContractError("recording onto a tape that was already replayed; call reset() first");
    entries_.push_back(Entry{out.node_, std::move(backward_fn)});
  }
  return out;
}

std::size_t Tape::backward(const Tensor& loss) {
  if (consumed_) throw ContractError("backward called twice on the same tape without reset()");
  if (loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) throw ContractError("loss does not depend on any tensor that requires a gradient");
  consumed_ = true;

  loss.node()->accumulate_at(0, 1.0);
  std::size_t visited = 0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    ++visited;
    const auto& out = *it->output;
    if (out.grad.empty()) continue;  // not on any path to the loss
    it->backward_fn(out.grad);
  }
  return visited;
}

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

}  // namespace histocam::ag
