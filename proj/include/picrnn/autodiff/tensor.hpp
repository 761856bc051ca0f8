#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace picrnn::ad {

/// Up to four axes (batch, channel, height, width). Empty shape = scalar.
using Shape = std::vector<int>;

/// Aligned storage: Eigen picks its vectorised summation order from the
/// buffer address, so alignment keeps results bitwise reproducible.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node;

/// Dense double-precision tensor that records the operations producing it
/// (define-by-run) so that backward() can propagate gradients to leaves.
/// Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor constant(const Shape& shape, double value);
  static Tensor from(const Shape& shape, std::vector<double> values);
  /// Leaf that accumulates gradients.
  static Tensor parameter(const Shape& shape, std::vector<double> values);
  static Tensor scalar(double value) { return from({}, {value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int dim(int axis) const;
  int rank() const { return int(shape().size()); }
  std::size_t size() const;

  std::span<const double> data() const;
  /// Writable values; only meaningful for leaves (optimizers, tests).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  bool is_leaf() const;
  /// Accumulated gradient; empty span when none has been materialized.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, no history.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

using BackwardFn = std::function<void(const Node& self)>;

struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  /// Gradient buffer, zero-initialised on first use.
  Buffer& grad_buffer();
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Builds an op result. The backward function receives the output node
/// (value and grad) and must accumulate into the inputs that require grad.
Tensor make_result(Shape shape, Buffer value,
                   std::vector<Tensor> inputs, BackwardFn backward);

/// Reverse-mode sweep from a scalar root. Returns the number of leaves that
/// received gradient; zero (with a warning on stderr) for a detached root.
/// Throws std::invalid_argument for a non-scalar root.
std::size_t backward(const Tensor& loss);

}  // namespace picrnn::ad
