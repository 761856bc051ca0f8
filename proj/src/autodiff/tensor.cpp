#include "picrnn/autodiff/tensor.hpp"

#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace picrnn::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= std::size_t(d);
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Buffer& Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

namespace {

std::shared_ptr<Node> new_node(const Shape& shape, Buffer values) {
  if (shape.size() > 4) throw std::invalid_argument("tensors have at most four axes");
  if (values.size() != numel(shape))
    throw std::invalid_argument("value count does not match shape " + to_string(shape));
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  return node;
}

const Node& checked(const std::shared_ptr<Node>& node) {
  if (!node) throw std::logic_error("use of undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape) { return constant(shape, 0.0); }

Tensor Tensor::constant(const Shape& shape, double value) {
  return Tensor(new_node(shape, Buffer(numel(shape), value)));
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values) {
  return Tensor(new_node(shape, Buffer(values.begin(), values.end())));
}

Tensor Tensor::parameter(const Shape& shape, std::vector<double> values) {
  auto node = new_node(shape, Buffer(values.begin(), values.end()));
  node->requires_grad = true;
  node->grad.assign(node->value.size(), 0.0);
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }
int Tensor::dim(int axis) const { return shape().at(std::size_t(axis)); }
std::size_t Tensor::size() const { return checked(node_).value.size(); }
std::span<const double> Tensor::data() const { return checked(node_).value; }
std::span<double> Tensor::mutable_data() {
  checked(node_);
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on a tensor with " + std::to_string(size()) + " elements");
  return node_->value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::is_leaf() const { return checked(node_).leaf; }
std::span<const double> Tensor::grad() const { return checked(node_).grad; }
std::span<double> Tensor::mutable_grad() {
  checked(node_);
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(new_node(shape(), checked(node_).value)); }

Tensor make_result(Shape shape, Buffer value, std::vector<Tensor> inputs,
                   BackwardFn backward) {
  auto node = new_node(shape, std::move(value));
  if (g_grad_enabled) {
    bool track = false;
    for (const auto& in : inputs) track = track || in.requires_grad();
    if (track) {
      node->requires_grad = true;
      node->leaf = false;
      node->inputs.reserve(inputs.size());
      for (auto& in : inputs) node->inputs.push_back(in.node());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

std::size_t backward(const Tensor& loss) {
  if (loss.size() != 1) throw std::invalid_argument("backward() needs a scalar root");
  if (!loss.requires_grad()) {
    std::cerr << "warning: backward() on a tensor that does not require grad\n";
    return 0;
  }

  // iterative post-order DFS: rollouts are hundreds of ops deep
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : order)
    if (!node->leaf) node->grad.assign(node->value.size(), 0.0);
  loss.node()->grad_buffer()[0] += 1.0;

  std::size_t leaves = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->leaf) {
      ++leaves;
      continue;
    }
    node->backward(*node);
  }
  for (Node* node : order)
    if (!node->leaf && node != loss.node().get()) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  return leaves;
}

}  // namespace picrnn::ad
