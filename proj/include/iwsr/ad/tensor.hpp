// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace iwsr::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string to_string(const Shape& shape);

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <class Real>
constexpr DType dtype_of() {
  return sizeof(Real) == 4 ? DType::f32 : DType::f64;
}

template <class Real>
struct TensorImpl;

/// One executed differentiable operation. `seq` is the global execution
/// index, so sorting by it yields a topological order of the graph.
template <class Real>
struct Node {
  std::uint64_t seq = 0;
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl<Real>>> inputs;
  std::function<void(const TensorImpl<Real>& out)> backward;
  std::size_t visits = 0;
};

template <class Real>
struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;
  bool requires_grad = false;
  std::shared_ptr<Node<Real>> node;

  /// Gradient buffer, allocated (zero-filled) on first use.
  Real* grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
    return grad.data();
  }
};

/// Dense row-major tensor (last axis fastest) with shared-handle semantics:
/// copies alias the same storage, like a framework tensor handle.
template <class Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), Real(0)); }
  static Tensor full(Shape shape, Real v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(Real v) { return Tensor(Shape{}, v); }

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<Real> data() { return impl_->data; }
  std::span<const Real> data() const { return impl_->data; }
  Real operator[](std::size_t i) const { return impl_->data[i]; }
  Real& operator[](std::size_t i) { return impl_->data[i]; }

  /// Scalar value of a one-element tensor.
  Real item() const;

  /// Accumulated gradient; empty span when none has been produced yet.
  std::span<const Real> grad() const { return impl_->grad; }
  std::span<Real> mutable_grad() { return {impl_->grad_buffer(), impl_->data.size()}; }
  bool has_grad() const { return impl_->grad.size() == impl_->data.size() && !impl_->data.empty(); }
  void zero_grad();

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);

  /// Value copy detached from any graph.
  Tensor detach() const;
  /// Deep copy of values into a fresh leaf with the same requires_grad flag.
  Tensor clone() const;

  const std::shared_ptr<TensorImpl<Real>>& impl() const { return impl_; }
  const Node<Real>* node() const { return impl_ ? impl_->node.get() : nullptr; }

  static Tensor from_impl(std::shared_ptr<TensorImpl<Real>> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  std::shared_ptr<TensorImpl<Real>> impl_;
};

/// Real and imaginary halves of a complex-valued tensor.
template <class Real>
struct ComplexPair {
  Tensor<Real> real;
  Tensor<Real> imag;
};

/// Whether new operations record graph nodes on this thread.
bool grad_enabled();

/// Disables graph recording for its lifetime (inference, metric code).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

std::uint64_t next_node_seq();

struct BackwardStats {
  std::size_t nodes_visited = 0;
};

/// Nodes reachable from `root`, in execution (topological) order.
template <class Real>
std::vector<Node<Real>*> graph_of(const Tensor<Real>& root);

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls (add-into); intermediate gradients are reset at the start of each
/// sweep so repeated calls on one graph add exactly one more dLoss/dθ.
template <class Real>
BackwardStats backward(const Tensor<Real>& loss);

}  // namespace iwsr::ad
