// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/ad/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "iwsr/error.hpp"

namespace iwsr::ad {

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_seq{0};
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::uint64_t next_node_seq() { return ++g_seq; }

template <class Real>
Tensor<Real>::Tensor(Shape shape, Real fill) : impl_(std::make_shared<TensorImpl<Real>>()) {
  impl_->data.assign(numel_of(shape), fill);
  impl_->shape = std::move(shape);
}

template <class Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> values)
    : impl_(std::make_shared<TensorImpl<Real>>()) {
  if (numel_of(shape) != values.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " holds " +
                         std::to_string(numel_of(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

template <class Real>
Real Tensor<Real>::item() const {
  if (numel() != 1) {
    throw ContractError("item() needs a one-element tensor, shape is " + to_string(shape()));
  }
  return impl_->data[0];
}

template <class Real>
void Tensor<Real>::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), Real(0));
}

template <class Real>
Tensor<Real>& Tensor<Real>::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

template <class Real>
Tensor<Real> Tensor<Real>::detach() const {
  return Tensor(impl_->shape, impl_->data);
}

template <class Real>
Tensor<Real> Tensor<Real>::clone() const {
  Tensor t(impl_->shape, impl_->data);
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

template <class Real>
std::vector<Node<Real>*> graph_of(const Tensor<Real>& root) {
  std::vector<Node<Real>*> nodes;
  if (!root.defined() || !root.impl()->node) return nodes;
  std::unordered_set<const Node<Real>*> seen;
  std::vector<Node<Real>*> stack{root.impl()->node.get()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    Node<Real>* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (const auto& in : n->inputs) {
      Node<Real>* child = in->node.get();
      if (child && seen.insert(child).second) stack.push_back(child);
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](auto* a, auto* b) { return a->seq < b->seq; });
  return nodes;
}

template <class Real>
BackwardStats backward(const Tensor<Real>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  BackwardStats stats;
  auto root = loss.impl();
  if (!root->node) {
    // A leaf loss: d(loss)/d(loss) = 1.
    if (root->requires_grad) root->grad_buffer()[0] += Real(1);
    return stats;
  }

  // Map each node back to the tensor it produced.
  std::vector<TensorImpl<Real>*> owners;
  {
    std::unordered_set<const TensorImpl<Real>*> seen{root.get()};
    std::vector<TensorImpl<Real>*> stack{root.get()};
    while (!stack.empty()) {
      auto* t = stack.back();
      stack.pop_back();
      owners.push_back(t);
      for (const auto& in : t->node->inputs) {
        if (in->node && seen.insert(in.get()).second) stack.push_back(in.get());
      }
    }
  }
  std::sort(owners.begin(), owners.end(),
            [](auto* a, auto* b) { return a->node->seq > b->node->seq; });

  for (auto* t : owners) t->grad.assign(t->data.size(), Real(0));
  root->grad[0] = Real(1);

  for (auto* t : owners) {
    t->node->visits += 1;
    ++stats.nodes_visited;
    if (t->node->backward) t->node->backward(*t);
  }
  return stats;
}

template class Tensor<float>;
template class Tensor<double>;
template std::vector<Node<float>*> graph_of(const Tensor<float>&);
template std::vector<Node<double>*> graph_of(const Tensor<double>&);
template BackwardStats backward(const Tensor<float>&);
template BackwardStats backward(const Tensor<double>&);

}  // namespace iwsr::ad
