#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fgdfpn/tensor.hpp"

namespace fgdfpn {

/// One value in the recorded operation graph: the forward result plus a
/// gradient slot of identical shape (allocated lazily on first use).
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;

  Tensor<T>& ensure_grad() {
    if (grad.empty() && value.numel() > 0) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

/// Handle to a Node. Values are treated as immutable once produced; gradients
/// accumulate additively during backward passes.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr<T> n) : n_(std::move(n)) {}

  static Var from(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  // Var is a handle: const-ness of the handle does not protect the node,
  // mirroring shared_ptr semantics. Backward closures rely on this.
  bool valid() const { return n_ != nullptr; }
  const Tensor<T>& value() const { return n_->value; }
  Tensor<T>& mutable_value() const { return n_->value; }
  Tensor<T>& grad() const { return n_->ensure_grad(); }
  const Shape& shape() const { return n_->value.shape(); }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  const NodePtr<T>& node() const { return n_; }

 private:
  NodePtr<T> n_;
};

/// Ordered record of executed differentiable operations. Replaying the
/// records in reverse yields gradients for every recorded input. A tape
/// serves exactly one backward pass and is cleared afterwards; a second
/// backward on the same tape is an error.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
    return Var<T>::from(std::move(value), requires_grad && recording_);
  }

  void record(std::function<void()> backward_step) {
    if (recording_) steps_.push_back(std::move(backward_step));
  }

  size_t size() const { return steps_.size(); }

  void backward(const Var<T>& loss) {
    if (!recording_) throw std::logic_error("backward: tape is not recording");
    if (consumed_) throw std::logic_error("backward: tape already consumed by a backward pass");
    if (loss.shape().numel() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  loss.shape().str());
    consumed_ = true;
    loss.node()->ensure_grad()[0] += T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    steps_.clear();
  }

  void clear() {
    steps_.clear();
    consumed_ = false;
  }

 private:
  std::vector<std::function<void()>> steps_;
  bool recording_ = true;
  bool consumed_ = false;
};

/// Output-node helper shared by all op implementations: the result requires a
/// gradient iff some input does and the tape is live.
template <typename T>
Var<T> make_result(Tape<T>& tape, Tensor<T> value, bool any_input_grad) {
  auto v = Var<T>::from(std::move(value), any_input_grad && tape.recording());
  if (v.requires_grad()) v.node()->ensure_grad();
  return v;
}

/// Trainable tensor: a persistent graph leaf with a unique name within its
/// model. grad is zero after zero_grad and accumulates during backward.
template <typename T>
struct Parameter {
  std::string name;
  Var<T> var;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> value) : name(std::move(n)) {
    var = Var<T>::from(std::move(value), true);
    var.node()->ensure_grad();
  }

  Tensor<T>& value() { return var.mutable_value(); }
  const Tensor<T>& value() const { return var.value(); }
  Tensor<T>& grad() { return var.grad(); }
  void zero_grad() { var.grad().fill(T(0)); }
};

}  // namespace fgdfpn
