#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace histocam::ag {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient has been accumulated
  bool requires_grad = false;

  void accumulate(std::span<const double> g);
  void accumulate_at(std::size_t i, double g);
};

}  // namespace detail

/// Dense row-major tensor of doubles.
///
/// A Tensor is a cheap handle: copies share the same storage and gradient
/// buffer. Values produced by ops are treated as immutable; only leaves
/// (parameters, inputs) are edited in place through mutable_values().
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Deep copy of the values, detached from any tape.
  Tensor detached() const;

  bool same_storage(const Tensor& other) const noexcept { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend class Tape;

  std::shared_ptr<detail::Node> node_;
};

/// Returns the accumulated gradient of `source` as a new constant tensor.
Tensor grad_of(const Tensor& source);

/// Define-by-run record of differentiable operations.
///
/// Ops append an entry whenever one of their inputs requires a gradient.
/// backward() walks the entries in reverse execution order, which is a valid
/// reverse topological order because every entry's inputs were produced
/// before it. A tape may be replayed only once; reset() clears it for the
/// next forward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> output_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// With recording disabled, ops produce constants and nothing is stored.
  /// Used for inference where no gradient is wanted.
  void set_recording(bool on) noexcept { recording_ = on; }
  bool recording() const noexcept { return recording_; }

  /// Creates the output tensor of an op. The output requires a gradient iff
  /// recording is on and any input does; in that case `backward_fn` is kept.
  Tensor record(std::span<const Tensor> inputs, Shape shape, std::vector<double> values,
                BackwardFn backward_fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Returns the number of entries
  /// visited, which always equals size().
  std::size_t backward(const Tensor& loss);

  void reset();
  std::size_t size() const noexcept { return entries_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Entry {
    std::shared_ptr<detail::Node> output;
    BackwardFn backward_fn;
  };

  std::vector<Entry> entries_;
  bool recording_ = true;
  bool consumed_ = false;
};

}  // namespace histocam::ag
